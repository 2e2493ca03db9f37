//! `decomm plan | simulate | reproduce`.
//!
//! Every flag can also be set through an environment variable named
//! `DECOMM_` followed by the flag in upper case with `-` replaced by `_`,
//! e.g. `DECOMM_COMM_COST=-1`. Command-line values win.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use decomm_core::domains::{build_production, subgoal_strategy, GridConfig, Production, ProductionConfig, Strategy};
use decomm_core::lgo::{lgo_msbpi, LgoProblem};
use decomm_core::mmdp::solve_mmdp;
use decomm_core::msbpi::{msbpi, MsbpiConfig};
use decomm_core::{DecMdpCom, Error as CoreError};

use crate::export;
use crate::format::{read_model, ModelFile};
use crate::reproduce::{self, comm_table, RunOptions};
use crate::sim::{monte_carlo, Domain, SimConfig, Simulator};
use crate::toy;

#[derive(Debug, Parser)]
#[command(name = "decomm", version, about = "Plan and simulate two-agent control with costly communication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a planner and write its mechanism or table.
    Plan(PlanArgs),
    /// Monte-Carlo evaluation of a strategy over a parameter sweep.
    Simulate(SimArgs),
    /// Regenerate a reference table (T1..T13) and diff it.
    Reproduce(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanAlgo {
    Msbpi,
    Lgo,
    Myopic,
    Mmdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimAlgo {
    NoComm,
    Ideal,
    Always,
    Subgoals,
    Myopic,
    Lgo,
    Msbpi,
}

#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    /// meeting, production, toy2, or a model file path.
    #[arg(long, env = "DECOMM_DOMAIN", default_value = "meeting")]
    pub domain: String,
    /// Success probabilities to sweep (agent/machine 1; agent 2 too unless --p2).
    #[arg(long, env = "DECOMM_PU", value_delimiter = ',', default_value = "0.8")]
    pub pu: Vec<f64>,
    /// Fixed success probability of agent/machine 2.
    #[arg(long, env = "DECOMM_P2")]
    pub p2: Option<f64>,
    #[arg(long, env = "DECOMM_COMM_COST", value_delimiter = ',', allow_negative_numbers = true, default_value = "-1")]
    pub comm_cost: Vec<f64>,
    #[arg(long, env = "DECOMM_ACTION_COST", allow_negative_numbers = true, default_value = "-1")]
    pub action_cost: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, env = "DECOMM_ALGO", value_enum)]
    pub algo: PlanAlgo,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, env = "DECOMM_NODE_BUDGET", default_value_t = 1_000_000)]
    pub node_budget: usize,
    /// Longest option considered by MSBPI.
    #[arg(long, env = "DECOMM_MAX_OPTION_LEN")]
    pub max_option_len: Option<usize>,
    #[arg(long, env = "DECOMM_MAX_ITERATIONS", default_value_t = 1000)]
    pub max_iterations: usize,
    /// Output directory.
    #[arg(long, env = "DECOMM_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, env = "DECOMM_ALGO", value_enum)]
    pub algo: SimAlgo,
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Radius fractions for the sub-goal strategy.
    #[arg(long, env = "DECOMM_RADIUS", value_delimiter = ',', default_value = "0.1")]
    pub radius: Vec<f64>,
    #[arg(long, env = "DECOMM_EPISODES", default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, env = "DECOMM_SEED", default_value_t = 2005)]
    pub seed: u64,
    /// Precomputed LGO mechanism CSV (planned on the fly if absent).
    #[arg(long, env = "DECOMM_MECHANISM")]
    pub mechanism: Option<PathBuf>,
    #[arg(long, env = "DECOMM_NODE_BUDGET", default_value_t = 1_000_000)]
    pub node_budget: usize,
    /// Run episodes on one thread (results are identical either way).
    #[arg(long, env = "DECOMM_SERIAL")]
    pub serial: bool,
    /// Results CSV; stdout if absent.
    #[arg(long, env = "DECOMM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproArgs {
    /// T1..T13, or `all`.
    pub table: String,
    /// Only this column (e.g. no-comm, ideal, lgo).
    #[arg(long, env = "DECOMM_COL")]
    pub col: Option<String>,
    #[arg(long, env = "DECOMM_EPISODES", default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, env = "DECOMM_SEED", default_value_t = 2005)]
    pub seed: u64,
    #[arg(long, env = "DECOMM_SERIAL")]
    pub serial: bool,
    /// Diff CSV; stdout if absent.
    #[arg(long, env = "DECOMM_OUT")]
    pub out: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    eprintln!("config: {:?}", cli.command);
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `false` when a reproduction diff fails.
pub fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Plan(a) => plan(&a).map(|_| true),
        Command::Simulate(a) => simulate(&a).map(|_| true),
        Command::Reproduce(a) => reproduce_cmd(&a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
        }
        None => Box::new(io::stdout()),
    })
}

fn tag(x: f64) -> String {
    x.to_string()
}

/// A named built-in domain or a model file.
enum Source {
    Meeting,
    Production,
    Toy2,
    File(ModelFile),
}

fn source(name: &str) -> Result<Source> {
    Ok(match name {
        "meeting" => Source::Meeting,
        "production" => Source::Production,
        "toy2" => Source::Toy2,
        path => Source::File(read_model(Path::new(path))?),
    })
}

fn grid(p1: f64, p2: Option<f64>, cost: f64, action: f64) -> GridConfig {
    let mut g = GridConfig::corners(p1, cost);
    g.p2 = p2.unwrap_or(p1);
    g.action_cost = action;
    g
}

fn production(p1: f64, p2: Option<f64>, cost: f64, action: f64) -> Result<Production> {
    let mut cfg = ProductionConfig::standard(p1, p2.unwrap_or(p1), cost);
    cfg.action_cost = action;
    Ok(build_production(&cfg)?)
}

/// Builds the domain for one sweep point. Files keep their own parameters.
fn domain_at(src: &Source, d: &DomainArgs, p: f64, cost: f64) -> Result<Domain> {
    Ok(match src {
        Source::Meeting => Domain::Meeting(grid(p, d.p2, cost, d.action_cost)),
        Source::Production => Domain::Production(production(p, d.p2, cost, d.action_cost)?),
        Source::Toy2 => Domain::General(toy::toy2()),
        Source::File(ModelFile::Grid(g)) => Domain::Meeting(*g),
        Source::File(ModelFile::Production(c)) => Domain::Production(build_production(c)?),
        Source::File(ModelFile::Explicit(m)) => Domain::General(m.clone()),
    })
}

fn sweep(src: &Source, d: &DomainArgs) -> Vec<(f64, f64)> {
    match src {
        Source::Toy2 | Source::File(_) => vec![(f64::NAN, f64::NAN)],
        _ => d.pu.iter().flat_map(|&p| d.comm_cost.iter().map(move |&c| (p, c))).collect(),
    }
}

fn model_of(dom: &Domain) -> Result<&DecMdpCom> {
    match dom {
        Domain::Production(p) => Ok(&p.model),
        Domain::General(m) => Ok(m),
        Domain::Meeting(_) => bail!("this planner needs an explicit model; the meeting grid has 10^4 joint states"),
    }
}

fn lgo_problem(dom: &Domain) -> Result<LgoProblem<'_>> {
    match dom {
        Domain::Production(p) => Ok(p.lgo_problem()),
        Domain::General(m) => Ok(LgoProblem::from_goals(m)?),
        Domain::Meeting(_) => bail!("lgo needs the production domain or a model file"),
    }
}

fn point_dir(out: &Path, p: f64, c: f64) -> PathBuf {
    if p.is_nan() {
        out.to_path_buf()
    } else {
        out.join(format!("pu{}_c{}", tag(p), tag(c)))
    }
}

fn msbpi_cfg(budget: usize, len: Option<usize>, iters: usize) -> MsbpiConfig {
    MsbpiConfig { node_budget: budget, max_option_len: len, max_iterations: iters }
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    let src = source(&a.domain.domain)?;
    if a.algo == PlanAlgo::Myopic {
        if !matches!(src, Source::Meeting) {
            bail!("the myopic tables are defined for the meeting domain");
        }
        let mut rows = Vec::new();
        for &c in &a.domain.comm_cost {
            for &p in &a.domain.pu {
                if a.domain.p2.is_some_and(|p2| p2 != p) {
                    bail!("the communication tables assume equal success probabilities");
                }
                let mut params = reproduce::table_params(p, c);
                params.action_cost = a.domain.action_cost;
                let pol = decomm_core::myopic::comm_policy_table(&params)?;
                let cells: Vec<String> = pol.row().iter().map(|t| t.map_or("never".into(), |t| t.to_string())).collect();
                println!("comm_cost {c} p_u {p}: {}", cells.join(" "));
                rows.push((c, p, pol));
            }
        }
        std::fs::create_dir_all(&a.out)?;
        export::write_comm_tables(output(Some(&a.out.join("comm_table.csv")))?, &rows)?;
        return Ok(());
    }
    for (p, c) in sweep(&src, &a.domain) {
        let dom = domain_at(&src, &a.domain, p, c)?;
        let m = model_of(&dom)?;
        let dir = point_dir(&a.out, p, c);
        std::fs::create_dir_all(&dir)?;
        let s0 = m.index(m.initial.s1, m.initial.s2);
        match a.algo {
            PlanAlgo::Msbpi => {
                let cfg = msbpi_cfg(a.node_budget, a.max_option_len, a.max_iterations);
                let r = msbpi(m, None, &cfg).map_err(|e| match e {
                    CoreError::NodeBudget { budget } => {
                        anyhow!("search exceeded the node budget of {budget}; raise --node-budget or set --max-option-len")
                    }
                    e => e.into(),
                })?;
                for it in &r.iterations {
                    println!(
                        "iteration {}: V(s0) = {} improved {} nodes {}",
                        it.iteration, it.initial_value, it.improved_cells, it.nodes
                    );
                }
                let central = solve_mmdp(m).values.get(s0, 0);
                println!("V(s0, 0) = {} (centralised, free exchange: {central})", r.mechanism.values.get(s0, 0));
                export::write_general_mechanism(output(Some(&dir.join("mechanism.csv")))?, m, &r.mechanism)?;
                export::write_values(output(Some(&dir.join("values.csv")))?, m, &r.mechanism.values)?;
                export::write_msbpi_iterations(output(Some(&dir.join("iterations.csv")))?, &r.iterations)?;
            }
            PlanAlgo::Lgo => {
                let prob = lgo_problem(&dom)?;
                let r = lgo_msbpi(&prob, a.max_iterations)?;
                for (i, s) in r.sweeps.iter().enumerate() {
                    println!(
                        "sweep {i}: V(s0) = {} candidates {} evaluated {} changed {}",
                        s.initial_value, s.candidates, s.evaluations, s.changed
                    );
                }
                println!("V(s0, 0) = {}", r.mechanism.values.get(s0, 0));
                export::write_lgo_mechanism(output(Some(&dir.join("mechanism.csv")))?, &prob, &r.mechanism)?;
                export::write_values(output(Some(&dir.join("values.csv")))?, m, &r.mechanism.values)?;
                export::write_lgo_sweeps(output(Some(&dir.join("sweeps.csv")))?, &r.sweeps)?;
            }
            PlanAlgo::Mmdp => {
                let sol = solve_mmdp(m);
                println!("V(s0, 0) = {}", sol.values.get(s0, 0));
                export::write_values(output(Some(&dir.join("values.csv")))?, m, &sol.values)?;
            }
            PlanAlgo::Myopic => unreachable!(),
        }
    }
    Ok(())
}

pub fn simulate(a: &SimArgs) -> Result<()> {
    let src = source(&a.domain.domain)?;
    if let Some(path) = &a.mechanism {
        if !path.exists() {
            bail!("mechanism file {} does not exist", path.display());
        }
        if a.algo != SimAlgo::Lgo {
            bail!("--mechanism is only read for --algo lgo");
        }
    }
    let cfg = SimConfig { episodes: a.episodes, seed: a.seed, parallel: !a.serial, keep_log: false };
    let mut rows = Vec::new();
    for (p, c) in sweep(&src, &a.domain) {
        let dom = domain_at(&src, &a.domain, p, c)?;
        let base = if p.is_nan() { String::new() } else { format!("p_u={p};comm_cost={c}") };
        let mut strategies: Vec<(String, Strategy)> = Vec::new();
        match a.algo {
            SimAlgo::NoComm => strategies.push((base.clone(), Strategy::NoCommunication)),
            SimAlgo::Ideal => strategies.push((base.clone(), Strategy::Ideal)),
            SimAlgo::Always => strategies.push((base.clone(), Strategy::AlwaysCommunicate)),
            SimAlgo::Subgoals => {
                let Domain::Meeting(g) = &dom else { bail!("sub-goals run on the meeting domain") };
                for &r in &a.radius {
                    strategies.push((format!("{base};radius={r}"), subgoal_strategy(g, r)?));
                }
            }
            SimAlgo::Myopic => {
                let Domain::Meeting(g) = &dom else { bail!("myopic runs on the meeting domain") };
                if g.p1 != g.p2 {
                    bail!("the communication tables assume equal success probabilities");
                }
                let mut params = reproduce::table_params(g.p1, g.comm_cost);
                params.action_cost = g.action_cost;
                params.max_distance = g.width + g.height - 2;
                let pol = decomm_core::myopic::comm_policy_table(&params)?;
                strategies.push((base.clone(), Strategy::MyopicGreedy(pol)));
            }
            SimAlgo::Lgo => {
                let prob = lgo_problem(&dom)?;
                let mech = match &a.mechanism {
                    Some(path) => export::read_lgo_mechanism(File::open(path)?, &prob)?,
                    None => lgo_msbpi(&prob, 1000)?.mechanism,
                };
                strategies.push((base.clone(), Strategy::Lgo(mech)));
            }
            SimAlgo::Msbpi => {
                let m = model_of(&dom)?;
                let r = msbpi(m, None, &msbpi_cfg(a.node_budget, None, 1000))?;
                strategies.push((base.clone(), Strategy::General(r.mechanism)));
            }
        }
        for (param, s) in &strategies {
            let res = monte_carlo(&Simulator::new(&dom, s)?, &cfg)?;
            eprintln!(
                "{} {} {}: mean {:.4} (se {:.4}) comm {:.3} steps {:.2}{}",
                dom.name(),
                s.name(),
                param,
                res.mean,
                res.std_error(),
                res.comm_mean,
                res.steps_mean,
                if res.capped > 0 { format!(" capped {}", res.capped) } else { String::new() }
            );
            rows.push(export::ResultRow {
                domain: dom.name().to_string(),
                strategy: s.name().to_string(),
                param: param.clone(),
                result: res,
            });
        }
    }
    export::write_results(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

fn reproduce_cmd(a: &ReproArgs) -> Result<bool> {
    let ids: Vec<&str> = if a.table.eq_ignore_ascii_case("all") {
        reproduce::TABLES.to_vec()
    } else {
        vec![a.table.as_str()]
    };
    let opts = RunOptions { episodes: a.episodes, seed: a.seed, parallel: !a.serial };
    let mut all = reproduce::Report::default();
    for id in ids {
        let r = reproduce::reproduce(id, a.col.as_deref(), &opts)?;
        eprintln!("{id}: {}/{} cells within tolerance", r.passed(), r.scored());
        all.checks.extend(r.checks);
    }
    all.write_csv(output(a.out.as_deref())?)?;
    Ok(all.all_pass())
}

/// Row of the myopic table for one probability and cost, for scripting.
pub fn comm_row(p: f64, cost: f64) -> Result<Vec<Option<usize>>> {
    Ok(comm_table(p, cost)?.row().to_vec())
}
