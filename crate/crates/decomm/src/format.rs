//! Plain-text model files.
//!
//! ```text
//! # comment
//! [model]
//! horizon = 3
//! comm_cost = -0.5
//! initial = s0 s0
//! goal = none | colocated | pairs s1:s1 s0:s1
//!
//! [agent1]            (and [agent2])
//! name = left
//! states = s0 s1
//! actions = go stay
//! noop = stay         (optional)
//! goals = s1          (optional)
//! cost = -1 0         (one per action)
//! row s0 go = s1:0.8 s0:0.2
//!
//! [joint]             (optional; '-' marks an agent that communicates)
//! s0 s1 go - = 2.5
//!
//! [terminal]          (optional; unlisted global states get 0)
//! s1 s1 = 10
//! ```
//!
//! Instead of the explicit sections a file may hold one `[grid]` or
//! `[production]` section:
//!
//! ```text
//! [grid]
//! width = 10
//! height = 10
//! p1 = 0.8
//! p2 = 0.8
//! start1 = 0 0
//! start2 = 9 9
//! action_cost = -1
//! comm_cost = -1
//! horizon_cap = 200
//!
//! [production]
//! p1 = 0.8
//! p2 = 0.8
//! horizon = 10
//! comm_cost = -1
//! action_cost = -1
//! initial = 0 0 0 8
//! options = 0,1 1,4 2,3 1,1 3,2 4,1 1,0
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so parsing a
//! serialized model gives back the same model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use decomm_core::domains::{GridConfig, ProductionConfig, ProductionOption, ProductionState};
use decomm_core::{AgentModel, DecMdpCom, FactoredState, GoalPredicate, JointKey, Rewards};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Semantic(String),
    #[error("cannot write {0:?}: names may not contain whitespace, ':', '=', '#' or be '-'")]
    BadName(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Explicit(DecMdpCom),
    Grid(GridConfig),
    Production(ProductionConfig),
}

#[derive(Default)]
struct RawAgent {
    name: Option<String>,
    states: Option<Vec<String>>,
    actions: Option<Vec<String>>,
    noop: Option<String>,
    goals: Vec<String>,
    cost: Option<Vec<f64>>,
    rows: Vec<(usize, String, String, Vec<(String, f64)>)>,
}

#[derive(Default)]
struct Raw {
    model: BTreeMap<String, (usize, String)>,
    agents: [RawAgent; 2],
    joint: Vec<(usize, [String; 4], f64)>,
    terminal: Option<Vec<(usize, String, String, f64)>>,
    grid: Option<BTreeMap<String, (usize, String)>>,
    production: Option<BTreeMap<String, (usize, String)>>,
}

fn num(line: usize, s: &str) -> Result<f64, FormatError> {
    s.trim().parse::<f64>().map_err(|_| syntax(line, format!("not a number: {s:?}")))
}

fn int(line: usize, s: &str) -> Result<usize, FormatError> {
    s.trim().parse::<usize>().map_err(|_| syntax(line, format!("not a non-negative integer: {s:?}")))
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn parse(text: &str) -> Result<ModelFile, FormatError> {
    let mut raw = Raw::default();
    let mut section: Option<String> = None;
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        let l = full.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim().to_string();
            match name.as_str() {
                "model" | "agent1" | "agent2" | "joint" => {}
                "terminal" => raw.terminal = Some(Vec::new()),
                "grid" => raw.grid = Some(BTreeMap::new()),
                "production" => raw.production = Some(BTreeMap::new()),
                _ => return Err(syntax(line, format!("unknown section [{name}]"))),
            }
            section = Some(name);
            continue;
        }
        let Some(sec) = section.as_deref() else {
            return Err(syntax(line, "content before the first section"));
        };
        let (lhs, rhs) = l.split_once('=').ok_or_else(|| syntax(line, "expected 'key = value'"))?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        match sec {
            "model" => {
                raw.model.insert(lhs.to_string(), (line, rhs.to_string()));
            }
            "grid" => {
                raw.grid.as_mut().unwrap().insert(lhs.to_string(), (line, rhs.to_string()));
            }
            "production" => {
                raw.production.as_mut().unwrap().insert(lhs.to_string(), (line, rhs.to_string()));
            }
            "agent1" | "agent2" => {
                let a = &mut raw.agents[if sec == "agent1" { 0 } else { 1 }];
                let key = words(lhs);
                match key.first().map(String::as_str) {
                    Some("name") => a.name = Some(rhs.to_string()),
                    Some("states") => a.states = Some(words(rhs)),
                    Some("actions") => a.actions = Some(words(rhs)),
                    Some("noop") => a.noop = Some(rhs.to_string()),
                    Some("goals") => a.goals = words(rhs),
                    Some("cost") => {
                        a.cost = Some(rhs.split_whitespace().map(|w| num(line, w)).collect::<Result<_, _>>()?)
                    }
                    Some("row") if key.len() == 3 => {
                        let mut entries = Vec::new();
                        for w in rhs.split_whitespace() {
                            let (s, p) = w.split_once(':').ok_or_else(|| syntax(line, "expected state:prob"))?;
                            entries.push((s.to_string(), num(line, p)?));
                        }
                        a.rows.push((line, key[1].clone(), key[2].clone(), entries));
                    }
                    _ => return Err(syntax(line, format!("unknown agent key {lhs:?}"))),
                }
            }
            "joint" => {
                let k = words(lhs);
                if k.len() != 4 {
                    return Err(syntax(line, "expected 's1 s2 a1 a2 = value'"));
                }
                raw.joint.push((line, [k[0].clone(), k[1].clone(), k[2].clone(), k[3].clone()], num(line, rhs)?));
            }
            "terminal" => {
                let k = words(lhs);
                if k.len() != 2 {
                    return Err(syntax(line, "expected 's1 s2 = value'"));
                }
                raw.terminal.as_mut().unwrap().push((line, k[0].clone(), k[1].clone(), num(line, rhs)?));
            }
            _ => unreachable!(),
        }
    }
    if let Some(g) = raw.grid {
        return parse_grid(&g).map(ModelFile::Grid);
    }
    if let Some(p) = raw.production {
        return parse_production(&p).map(ModelFile::Production);
    }
    build_explicit(raw).map(ModelFile::Explicit)
}

fn take<'a>(map: &'a BTreeMap<String, (usize, String)>, key: &str) -> Result<(usize, &'a str), FormatError> {
    map.get(key)
        .map(|(l, v)| (*l, v.as_str()))
        .ok_or_else(|| FormatError::Semantic(format!("missing key {key:?}")))
}

fn pair(line: usize, s: &str) -> Result<(usize, usize), FormatError> {
    let w = words(s);
    if w.len() != 2 {
        return Err(syntax(line, "expected two integers"));
    }
    Ok((int(line, &w[0])?, int(line, &w[1])?))
}

fn parse_grid(g: &BTreeMap<String, (usize, String)>) -> Result<GridConfig, FormatError> {
    let n = |k: &str| take(g, k).and_then(|(l, v)| num(l, v));
    let i = |k: &str| take(g, k).and_then(|(l, v)| int(l, v));
    let p = |k: &str| take(g, k).and_then(|(l, v)| pair(l, v));
    let cfg = GridConfig {
        width: i("width")?,
        height: i("height")?,
        p1: n("p1")?,
        p2: n("p2")?,
        start1: p("start1")?,
        start2: p("start2")?,
        action_cost: n("action_cost")?,
        comm_cost: n("comm_cost")?,
        horizon_cap: i("horizon_cap")?,
    };
    cfg.validate().map_err(|e| FormatError::Semantic(e.to_string()))?;
    Ok(cfg)
}

fn parse_production(g: &BTreeMap<String, (usize, String)>) -> Result<ProductionConfig, FormatError> {
    let n = |k: &str| take(g, k).and_then(|(l, v)| num(l, v));
    let (line, init) = take(g, "initial")?;
    let init: Vec<usize> = init.split_whitespace().map(|w| int(line, w)).collect::<Result<_, _>>()?;
    if init.len() != 4 {
        return Err(syntax(line, "initial needs four counts"));
    }
    let (line, opts) = take(g, "options")?;
    let mut options = Vec::new();
    for w in opts.split_whitespace() {
        let (a, b) = w.split_once(',').ok_or_else(|| syntax(line, "options are written xa,xb"))?;
        options.push(ProductionOption::new(int(line, a)?, int(line, b)?));
    }
    let (hl, h) = take(g, "horizon")?;
    Ok(ProductionConfig {
        p1: n("p1")?,
        p2: n("p2")?,
        horizon: int(hl, h)?,
        comm_cost: n("comm_cost")?,
        action_cost: n("action_cost")?,
        initial: ProductionState::new(init[0], init[1], init[2], init[3]),
        options,
    })
}

fn lookup(names: &[String], name: &str, what: &str, line: usize) -> Result<usize, FormatError> {
    names.iter().position(|n| n == name).ok_or_else(|| syntax(line, format!("unknown {what} {name:?}")))
}

fn build_agent(raw: RawAgent, which: usize) -> Result<AgentModel, FormatError> {
    let missing = |k: &str| FormatError::Semantic(format!("[agent{which}] is missing {k:?}"));
    let states = raw.states.ok_or_else(|| missing("states"))?;
    let actions = raw.actions.ok_or_else(|| missing("actions"))?;
    let mut transition = vec![vec![Vec::new(); actions.len()]; states.len()];
    let mut seen = vec![vec![false; actions.len()]; states.len()];
    for (line, s, a, entries) in raw.rows {
        let si = lookup(&states, &s, "state", line)?;
        let ai = lookup(&actions, &a, "action", line)?;
        if seen[si][ai] {
            return Err(syntax(line, format!("duplicate row for {s} {a}")));
        }
        seen[si][ai] = true;
        for (to, p) in entries {
            transition[si][ai].push((lookup(&states, &to, "state", line)?, p));
        }
    }
    for (si, row) in seen.iter().enumerate() {
        for (ai, ok) in row.iter().enumerate() {
            if !ok {
                return Err(FormatError::Semantic(format!(
                    "[agent{which}] has no row for {} {}",
                    states[si], actions[ai]
                )));
            }
        }
    }
    let noop = match raw.noop {
        Some(n) => Some(lookup(&actions, &n, "action", 0)?),
        None => None,
    };
    let goal_candidates = raw.goals.iter().map(|g| lookup(&states, g, "state", 0)).collect::<Result<_, _>>()?;
    Ok(AgentModel {
        name: raw.name.unwrap_or_else(|| format!("agent{which}")),
        states,
        actions,
        transition,
        goal_candidates,
        noop,
    })
}

fn build_explicit(raw: Raw) -> Result<DecMdpCom, FormatError> {
    let [r1, r2] = raw.agents;
    let cost1 = r1.cost.clone();
    let cost2 = r2.cost.clone();
    let a1 = build_agent(r1, 1)?;
    let a2 = build_agent(r2, 2)?;
    let cost = |c: Option<Vec<f64>>, a: &AgentModel| -> Result<Vec<f64>, FormatError> {
        let c = c.unwrap_or_else(|| vec![0.0; a.num_actions()]);
        if c.len() != a.num_actions() {
            return Err(FormatError::Semantic(format!("{} needs one cost per action", a.name)));
        }
        Ok(c)
    };
    let mut rewards = Rewards::additive(cost(cost1, &a1)?, cost(cost2, &a2)?);
    for (line, [s1, s2, x1, x2], v) in raw.joint {
        let act = |n: &str, a: &AgentModel| -> Result<Option<usize>, FormatError> {
            if n == "-" {
                Ok(None)
            } else {
                lookup(&a.actions, n, "action", line).map(Some)
            }
        };
        let key = JointKey {
            s1: lookup(&a1.states, &s1, "state", line)?,
            s2: lookup(&a2.states, &s2, "state", line)?,
            a1: act(&x1, &a1)?,
            a2: act(&x2, &a2)?,
        };
        rewards.joint.insert(key, v);
    }
    let n2 = a2.num_states();
    if let Some(entries) = raw.terminal {
        let mut table = vec![0.0; a1.num_states() * n2];
        for (line, s1, s2, v) in entries {
            let i = lookup(&a1.states, &s1, "state", line)?;
            let j = lookup(&a2.states, &s2, "state", line)?;
            table[i * n2 + j] = v;
        }
        rewards.terminal = Some(table);
    }
    let m = &raw.model;
    let (hl, h) = take(m, "horizon")?;
    let (cl, c) = take(m, "comm_cost")?;
    let (il, init) = take(m, "initial")?;
    let iw = words(init);
    if iw.len() != 2 {
        return Err(syntax(il, "initial needs two state names"));
    }
    let initial = FactoredState::new(lookup(&a1.states, &iw[0], "state", il)?, lookup(&a2.states, &iw[1], "state", il)?);
    let goal = match m.get("goal") {
        None => GoalPredicate::None,
        Some((gl, g)) => {
            let w = words(g);
            match w.first().map(String::as_str) {
                Some("none") => GoalPredicate::None,
                Some("colocated") => GoalPredicate::CoLocated,
                Some("pairs") => {
                    let mut v = Vec::new();
                    for p in &w[1..] {
                        let (x, y) = p.split_once(':').ok_or_else(|| syntax(*gl, "pairs are written s1:s2"))?;
                        v.push((lookup(&a1.states, x, "state", *gl)?, lookup(&a2.states, y, "state", *gl)?));
                    }
                    GoalPredicate::States(v)
                }
                _ => return Err(syntax(*gl, "goal is none, colocated or pairs ...")),
            }
        }
    };
    Ok(DecMdpCom {
        agents: [a1, a2],
        rewards,
        comm_cost: num(cl, c)?,
        horizon: int(hl, h)?,
        initial,
        goal,
    })
}

fn check_name(n: &str) -> Result<&str, FormatError> {
    if n.is_empty() || n == "-" || n.chars().any(|c| c.is_whitespace() || matches!(c, ':' | '=' | '#' | '[' | ']')) {
        Err(FormatError::BadName(n.to_string()))
    } else {
        Ok(n)
    }
}

fn join_f(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn serialize(file: &ModelFile) -> Result<String, FormatError> {
    let mut o = String::new();
    match file {
        ModelFile::Grid(g) => {
            let _ = writeln!(o, "[grid]");
            let _ = writeln!(o, "width = {}\nheight = {}", g.width, g.height);
            let _ = writeln!(o, "p1 = {}\np2 = {}", g.p1, g.p2);
            let _ = writeln!(o, "start1 = {} {}\nstart2 = {} {}", g.start1.0, g.start1.1, g.start2.0, g.start2.1);
            let _ = writeln!(o, "action_cost = {}\ncomm_cost = {}", g.action_cost, g.comm_cost);
            let _ = writeln!(o, "horizon_cap = {}", g.horizon_cap);
        }
        ModelFile::Production(p) => {
            let _ = writeln!(o, "[production]");
            let _ = writeln!(o, "p1 = {}\np2 = {}\nhorizon = {}", p.p1, p.p2, p.horizon);
            let _ = writeln!(o, "comm_cost = {}\naction_cost = {}", p.comm_cost, p.action_cost);
            let i = p.initial;
            let _ = writeln!(o, "initial = {} {} {} {}", i.ba, i.bb, i.ca, i.cb);
            let opts: Vec<String> = p.options.iter().map(|x| format!("{},{}", x.xa, x.xb)).collect();
            let _ = writeln!(o, "options = {}", opts.join(" "));
        }
        ModelFile::Explicit(m) => write_explicit(&mut o, m)?,
    }
    Ok(o)
}

fn write_explicit(o: &mut String, m: &DecMdpCom) -> Result<(), FormatError> {
    let [a1, a2] = &m.agents;
    let _ = writeln!(o, "[model]");
    let _ = writeln!(o, "horizon = {}", m.horizon);
    let _ = writeln!(o, "comm_cost = {}", m.comm_cost);
    let _ = writeln!(o, "initial = {} {}", check_name(&a1.states[m.initial.s1])?, check_name(&a2.states[m.initial.s2])?);
    match &m.goal {
        GoalPredicate::None => {
            let _ = writeln!(o, "goal = none");
        }
        GoalPredicate::CoLocated => {
            let _ = writeln!(o, "goal = colocated");
        }
        GoalPredicate::States(v) => {
            let ps: Vec<String> = v.iter().map(|&(x, y)| format!("{}:{}", a1.states[x], a2.states[y])).collect();
            let _ = writeln!(o, "goal = pairs {}", ps.join(" "));
        }
    }
    for (i, a) in m.agents.iter().enumerate() {
        let _ = writeln!(o, "\n[agent{}]", i + 1);
        let _ = writeln!(o, "name = {}", a.name.trim());
        for n in a.states.iter().chain(&a.actions) {
            check_name(n)?;
        }
        let _ = writeln!(o, "states = {}", a.states.join(" "));
        let _ = writeln!(o, "actions = {}", a.actions.join(" "));
        if let Some(n) = a.noop {
            let _ = writeln!(o, "noop = {}", a.actions[n]);
        }
        if !a.goal_candidates.is_empty() {
            let g: Vec<&str> = a.goal_candidates.iter().map(|&g| a.states[g].as_str()).collect();
            let _ = writeln!(o, "goals = {}", g.join(" "));
        }
        let _ = writeln!(o, "cost = {}", join_f(&m.rewards.action_cost[i]));
        for (s, rows) in a.transition.iter().enumerate() {
            for (act, row) in rows.iter().enumerate() {
                let e: Vec<String> = row.iter().map(|&(to, p)| format!("{}:{}", a.states[to], p)).collect();
                let _ = writeln!(o, "row {} {} = {}", a.states[s], a.actions[act], e.join(" "));
            }
        }
    }
    if !m.rewards.joint.is_empty() {
        let _ = writeln!(o, "\n[joint]");
        let act = |a: Option<usize>, ag: &AgentModel| a.map_or("-".to_string(), |x| ag.actions[x].clone());
        for (k, v) in &m.rewards.joint {
            let _ = writeln!(o, "{} {} {} {} = {}", a1.states[k.s1], a2.states[k.s2], act(k.a1, a1), act(k.a2, a2), v);
        }
    }
    if let Some(t) = &m.rewards.terminal {
        let _ = writeln!(o, "\n[terminal]");
        for (idx, v) in t.iter().enumerate() {
            if *v != 0.0 {
                let (x, y) = m.unindex(idx);
                let _ = writeln!(o, "{} {} = {}", a1.states[x], a2.states[y], v);
            }
        }
    }
    Ok(())
}

pub fn read_model(path: &Path) -> anyhow::Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
