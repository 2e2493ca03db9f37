//! Seeded Monte-Carlo execution of strategies.
//!
//! Episode `i` of a batch draws from ChaCha8 stream `i` of the batch seed,
//! so serial and parallel runs give identical results.

use anyhow::{bail, Result};
use decomm_core::domains::meeting::{subgoal_radius, STAY};
use decomm_core::domains::{GridConfig, Production, Strategy};
use decomm_core::lgo::{behavior_cost, LgoProblem};
use decomm_core::mmdp::{solve_mmdp, MmdpSolution};
use decomm_core::options::Act;
use decomm_core::{DecMdpCom, Local};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats::mean_var;

pub enum Domain {
    Meeting(GridConfig),
    Production(Production),
    /// Any model; episodes run to the horizon.
    General(DecMdpCom),
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Meeting(_) => "meeting",
            Domain::Production(_) => "production",
            Domain::General(_) => "general",
        }
    }

    fn model(&self) -> Option<&DecMdpCom> {
        match self {
            Domain::Meeting(_) => None,
            Domain::Production(p) => Some(&p.model),
            Domain::General(m) => Some(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub utility: f64,
    pub steps: usize,
    pub comms: usize,
    /// The meeting horizon cap ended the episode.
    pub capped: bool,
    /// Local states after every step, starting with the initial pair.
    pub trajectory: Vec<(Local, Local)>,
}

/// A strategy bound to a domain, with whatever it needs precomputed.
pub struct Simulator<'a> {
    domain: &'a Domain,
    strategy: &'a Strategy,
    centralised: Option<MmdpSolution>,
    lgo: Option<LgoProblem<'a>>,
}

impl<'a> Simulator<'a> {
    pub fn new(domain: &'a Domain, strategy: &'a Strategy) -> Result<Self> {
        let mut sim = Simulator { domain, strategy, centralised: None, lgo: None };
        match (domain, strategy) {
            (Domain::Meeting(g), s) => {
                g.validate()?;
                if matches!(s, Strategy::Lgo(_) | Strategy::General(_)) {
                    bail!("strategy {} is not available on the meeting grid", s.name());
                }
            }
            (_, Strategy::Ideal | Strategy::AlwaysCommunicate) => {
                sim.centralised = Some(solve_mmdp(domain.model().unwrap()));
            }
            (Domain::Production(p), Strategy::Lgo(_)) => sim.lgo = Some(p.lgo_problem()),
            (Domain::General(m), Strategy::Lgo(_)) => sim.lgo = Some(LgoProblem::from_goals(m)?),
            (Domain::General(_), Strategy::General(_)) => {}
            (d, s) => bail!("strategy {} is not available on the {} domain", s.name(), d.name()),
        }
        if let (Some(m), Strategy::Lgo(mech)) = (domain.model(), strategy) {
            if mech.assign.len() != m.num_global() * m.horizon {
                bail!("mechanism does not fit the model");
            }
        }
        Ok(sim)
    }

    pub fn run_episode(&self, rng: &mut impl Rng, record: bool) -> Episode {
        match self.domain {
            Domain::Meeting(g) => meeting_episode(g, self.strategy, rng, record),
            Domain::Production(p) => self.model_episode(&p.model, rng, record),
            Domain::General(m) => self.model_episode(m, rng, record),
        }
    }

    fn model_episode(&self, m: &DecMdpCom, rng: &mut impl Rng, record: bool) -> Episode {
        let (mut x, mut y) = (m.initial.s1, m.initial.s2);
        let mut ep = Episode { utility: 0.0, steps: 0, comms: 0, capped: false, trajectory: Vec::new() };
        if record {
            ep.trajectory.push((x, y));
        }
        let h = m.horizon;
        let mut t = 0;
        while t < h {
            match self.strategy {
                Strategy::Ideal | Strategy::AlwaysCommunicate => {
                    let (a1, a2) = self.centralised.as_ref().unwrap().action(m, x, y, t);
                    ep.utility += m.step_reward(x, y, Some(a1), Some(a2));
                    x = sample(m.agents[0].row(x, a1), rng.gen());
                    y = sample(m.agents[1].row(y, a2), rng.gen());
                    t += 1;
                    ep.comms += 1;
                    if matches!(self.strategy, Strategy::AlwaysCommunicate) {
                        ep.utility += m.comm_cost;
                    }
                    if record {
                        ep.trajectory.push((x, y));
                    }
                }
                Strategy::Lgo(mech) => {
                    let p = self.lgo.as_ref().unwrap();
                    let a = mech.get(m, x, y, t);
                    let (b1, b2) = (&p.behaviors[0][a.g1], &p.behaviors[1][a.g2]);
                    let (x0, y0, t0) = (x, y, t);
                    for j in 0..a.k {
                        let a1 = b1.action(x0, x, j, t0 + j);
                        let a2 = b2.action(y0, y, j, t0 + j);
                        ep.utility += m.step_reward(x, y, Some(a1), Some(a2)) - m.rewards.action_cost[0][a1]
                            - m.rewards.action_cost[1][a2]
                            + behavior_cost(m, 0, b1.as_ref(), x, a1)
                            + behavior_cost(m, 1, b2.as_ref(), y, a2);
                        x = sample(m.agents[0].row(x, a1), rng.gen());
                        y = sample(m.agents[1].row(y, a2), rng.gen());
                        if record {
                            ep.trajectory.push((x, y));
                        }
                    }
                    t += a.k;
                    let c = p.exchange_cost(t0, a.k);
                    if t < h || c != 0.0 {
                        ep.utility += c;
                        ep.comms += 1;
                    }
                }
                Strategy::General(mech) => {
                    let (o1, o2) = mech.pair(m, x, y, t);
                    let (t1, t2) = (o1.tree(), o2.tree());
                    let (mut u, mut v) = (0, 0);
                    loop {
                        let (nu, nv) = (t1.node(u), t2.node(v));
                        let (d1, d2) = (nu.act.domain(), nv.act.domain());
                        ep.utility += m.step_reward(x, y, d1, d2);
                        if let Some(a) = d1 {
                            x = sample(m.agents[0].row(x, a), rng.gen());
                        }
                        if let Some(a) = d2 {
                            y = sample(m.agents[1].row(y, a), rng.gen());
                        }
                        t += 1;
                        if record {
                            ep.trajectory.push((x, y));
                        }
                        if nu.act == Act::Communicate || nv.act == Act::Communicate {
                            if t < h {
                                ep.utility += m.comm_cost;
                            }
                            ep.comms += 1;
                            break;
                        }
                        let c1 = nu.children.iter().copied().find(|&c| t1.node(c).state == x);
                        let c2 = nv.children.iter().copied().find(|&c| t2.node(c).state == y);
                        match (c1, c2) {
                            (Some(c1), Some(c2)) if t < h => {
                                u = c1;
                                v = c2;
                            }
                            _ => break,
                        }
                    }
                }
                _ => unreachable!("rejected in Simulator::new"),
            }
        }
        ep.steps = t;
        ep.utility += m.terminal_reward(x, y);
        ep
    }
}

/// Index drawn from a sparse distribution with the uniform `u`.
fn sample(row: &[(Local, f64)], u: f64) -> Local {
    let mut acc = 0.0;
    for &(s, p) in row {
        acc += p;
        if u < acc {
            return s;
        }
    }
    row.last().map(|&(s, _)| s).expect("empty transition row")
}

fn meeting_episode(g: &GridConfig, strategy: &Strategy, rng: &mut impl Rng, record: bool) -> Episode {
    let mut a = g.cell(g.start1.0, g.start1.1);
    let mut b = g.cell(g.start2.0, g.start2.1);
    let mut ep = Episode { utility: 0.0, steps: 0, comms: 0, capped: false, trajectory: Vec::new() };
    if record {
        ep.trajectory.push((a, b));
    }
    let mut goal = g.midpoint(a, b);
    // sub-goal region radius and whether each agent is already inside it
    let mut radius = 0;
    let mut inside = (false, false);
    // steps left before the next scheduled exchange
    let mut countdown: Option<usize> = None;
    let resync = |a: Local, b: Local, radius: &mut usize, inside: &mut (bool, bool), countdown: &mut Option<usize>| {
        let goal = g.midpoint(a, b);
        let d = g.distance(a, b);
        match strategy {
            Strategy::SubGoals(p) => {
                *radius = subgoal_radius(d, *p);
                *inside = (g.distance(a, goal) <= *radius, g.distance(b, goal) <= *radius);
            }
            Strategy::MyopicGreedy(pol) => *countdown = pol.get(d).map(|tau| tau.saturating_sub(1).max(1)),
            _ => {}
        }
        goal
    };
    if a != b {
        goal = resync(a, b, &mut radius, &mut inside, &mut countdown);
    }
    while a != b {
        if ep.steps == g.horizon_cap {
            ep.capped = true;
            break;
        }
        if matches!(strategy, Strategy::Ideal | Strategy::AlwaysCommunicate) {
            goal = g.midpoint(a, b);
            ep.comms += 1;
            if matches!(strategy, Strategy::AlwaysCommunicate) {
                ep.utility += g.comm_cost;
            }
        }
        let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
        let (m1, m2) = (g.step_toward(a, goal), g.step_toward(b, goal));
        if m1 != STAY && u1 < g.p1 {
            a = g.target(a, m1);
        }
        if m2 != STAY && u2 < g.p2 {
            b = g.target(b, m2);
        }
        ep.steps += 1;
        ep.utility += 2.0 * g.action_cost;
        if record {
            ep.trajectory.push((a, b));
        }
        if a == b {
            break;
        }
        let exchange = match strategy {
            Strategy::SubGoals(_) => {
                let now = (g.distance(a, goal) <= radius, g.distance(b, goal) <= radius);
                let entered = (now.0 && !inside.0) || (now.1 && !inside.1);
                inside = now;
                entered
            }
            Strategy::MyopicGreedy(_) => match countdown.as_mut() {
                Some(c) => {
                    *c -= 1;
                    *c == 0
                }
                None => false,
            },
            _ => false,
        };
        if exchange {
            ep.comms += 1;
            ep.utility += g.comm_cost;
            goal = resync(a, b, &mut radius, &mut inside, &mut countdown);
        }
    }
    ep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Spread episodes over the rayon pool; results are unchanged.
    pub parallel: bool,
    pub keep_log: bool,
}

impl SimConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        SimConfig { episodes, seed, parallel: true, keep_log: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub mean: f64,
    pub variance: f64,
    pub comm_mean: f64,
    pub comm_variance: f64,
    pub steps_mean: f64,
    pub capped: usize,
    pub episodes: usize,
    pub seed: u64,
    pub log: Option<Vec<Episode>>,
}

impl SimResult {
    pub fn std_error(&self) -> f64 {
        (self.variance / self.episodes as f64).sqrt()
    }

    pub fn comm_std_error(&self) -> f64 {
        (self.comm_variance / self.episodes as f64).sqrt()
    }
}

pub fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

pub fn monte_carlo(sim: &Simulator<'_>, cfg: &SimConfig) -> Result<SimResult> {
    if cfg.episodes == 0 {
        bail!("episodes must be at least 1");
    }
    let run = |i: usize| sim.run_episode(&mut episode_rng(cfg.seed, i), false);
    let eps: Vec<Episode> = if cfg.parallel {
        (0..cfg.episodes).into_par_iter().map(run).collect()
    } else {
        (0..cfg.episodes).map(run).collect()
    };
    let util: Vec<f64> = eps.iter().map(|e| e.utility).collect();
    let comm: Vec<f64> = eps.iter().map(|e| e.comms as f64).collect();
    let (mean, variance) = mean_var(&util);
    let (comm_mean, comm_variance) = mean_var(&comm);
    let steps_mean = eps.iter().map(|e| e.steps as f64).sum::<f64>() / eps.len() as f64;
    Ok(SimResult {
        mean,
        variance,
        comm_mean,
        comm_variance,
        steps_mean,
        capped: eps.iter().filter(|e| e.capped).count(),
        episodes: cfg.episodes,
        seed: cfg.seed,
        log: cfg.keep_log.then_some(eps),
    })
}
