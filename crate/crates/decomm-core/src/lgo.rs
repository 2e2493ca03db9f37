//! Policy iteration restricted to goal-oriented options: each synchronised
//! state gets a pair of local behaviours and a window length `k` after which
//! the agents exchange again.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Action, AgentModel, DecMdpCom, FactoredState, Local};
use crate::value::ValueTable;

/// A local behaviour followed between two exchanges.
pub trait LocalBehavior {
    /// Action at `current`, `elapsed` steps after the exchange at which the
    /// agent was in `start`; `t` is absolute time.
    fn action(&self, start: Local, current: Local, elapsed: usize, t: usize) -> Action;
    fn label(&self) -> String;
    /// Whether taking `action` at `current` is exempt from its action cost.
    fn is_free(&self, _current: Local, _action: Action) -> bool {
        false
    }
}

/// Behaviours are shared across simulation threads.
pub type BoxedBehavior<'a> = Box<dyn LocalBehavior + Send + Sync + 'a>;

/// Action cost of agent `i` under behaviour `b`.
pub fn behavior_cost(m: &DecMdpCom, i: usize, b: &dyn LocalBehavior, current: Local, a: Action) -> f64 {
    if b.is_free(current, a) {
        0.0
    } else {
        m.rewards.action_cost[i][a]
    }
}

/// Finite-horizon optimal policy of one agent's local process toward a goal.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalPolicy {
    pub goal: Local,
    /// Waiting action taken at the goal, free of cost.
    pub noop: Action,
    pub label: String,
    /// `actions[t][s]`, `t < T`.
    pub actions: Vec<Vec<Action>>,
    /// `values[t][s]`, `t <= T`.
    pub values: Vec<Vec<f64>>,
    /// States from which the goal cannot be reached within the horizon.
    pub unreachable: Vec<Local>,
}

impl GoalPolicy {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

impl LocalBehavior for GoalPolicy {
    fn action(&self, _start: Local, current: Local, _elapsed: usize, t: usize) -> Action {
        let t = t.min(self.actions.len().saturating_sub(1));
        self.actions[t][current]
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn is_free(&self, current: Local, action: Action) -> bool {
        current == self.goal && action == self.noop
    }
}

/// Backward induction where each action costs `action_cost[a]` and the goal is
/// absorbing at zero cost through the agent's no-op.
pub fn solve_local_mdp(agent: &AgentModel, goal: Local, horizon: usize, action_cost: &[f64]) -> Result<GoalPolicy> {
    if goal >= agent.num_states() {
        return Err(Error::InvalidState { agent: 0, index: goal });
    }
    let noop = agent.noop.ok_or(Error::MissingNoop { agent: 0 })?;
    let n = agent.num_states();
    let mut values = alloc::vec![alloc::vec![0.0; n]; horizon + 1];
    let mut actions = alloc::vec![alloc::vec![noop; n]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..n {
            if s == goal {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = noop;
            for a in 0..agent.num_actions() {
                let mut q = action_cost[a];
                for &(x, p) in agent.row(s, a) {
                    q += p * values[t + 1][x];
                }
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            values[t][s] = best;
            actions[t][s] = arg;
        }
    }
    // states that can reach the goal within the horizon, by support
    let mut reach = alloc::vec![false; n];
    reach[goal] = true;
    for _ in 0..horizon {
        let mut changed = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            if agent.transition[s].iter().any(|row| row.iter().any(|&(x, p)| p > 0.0 && reach[x])) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let unreachable = (0..n).filter(|&s| !reach[s]).collect();
    Ok(GoalPolicy {
        goal,
        noop,
        label: agent.states[goal].clone(),
        actions,
        values,
        unreachable,
    })
}

/// A model together with the candidate behaviours of each agent.
pub struct LgoProblem<'a> {
    pub model: &'a DecMdpCom,
    pub behaviors: [Vec<BoxedBehavior<'a>>; 2],
    /// Charge `C_Σ` for a window that ends at the horizon. Off by default:
    /// no exchange follows the last step.
    pub charge_final_exchange: bool,
}

impl LgoProblem<'_> {
    /// Exchange cost charged for a window `[t, t + k)`.
    pub fn exchange_cost(&self, t: usize, k: usize) -> f64 {
        if t + k < self.model.horizon || self.charge_final_exchange {
            self.model.comm_cost
        } else {
            0.0
        }
    }
}

impl<'a> LgoProblem<'a> {
    /// One goal-reaching behaviour per goal candidate.
    pub fn from_goals(m: &'a DecMdpCom) -> Result<Self> {
        let mut behaviors: [Vec<BoxedBehavior<'a>>; 2] = [Vec::new(), Vec::new()];
        for (i, slot) in behaviors.iter_mut().enumerate() {
            let ag = &m.agents[i];
            if ag.goal_candidates.is_empty() {
                return Err(Error::Invalid(format!("agent {} has no goal candidates", i + 1)));
            }
            for &g in &ag.goal_candidates {
                let pol = solve_local_mdp(ag, g, m.horizon, &m.rewards.action_cost[i]).map_err(|e| match e {
                    Error::MissingNoop { .. } => Error::MissingNoop { agent: i },
                    Error::InvalidState { index, .. } => Error::InvalidState { agent: i, index },
                    other => other,
                })?;
                slot.push(Box::new(pol));
            }
        }
        Ok(LgoProblem { model: m, behaviors, charge_final_exchange: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoalAssignment {
    pub g1: usize,
    pub g2: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgoMechanism {
    /// Indexed by `t * |S| + s`.
    pub assign: Vec<GoalAssignment>,
    pub values: ValueTable,
}

impl LgoMechanism {
    pub fn get(&self, m: &DecMdpCom, s1: Local, s2: Local, t: usize) -> GoalAssignment {
        self.assign[t * m.num_global() + m.index(s1, s2)]
    }
}

/// Marginal of one agent over a window: for each elapsed step `j`, the sparse
/// distribution and the expected action cost accumulated so far.
#[derive(Debug, Clone)]
struct Marginal {
    dist: Vec<Vec<(Local, f64)>>,
    cost: Vec<f64>,
}

struct Windows {
    /// `[agent][(start * T + t) * |G| + g]`
    marg: [Vec<Marginal>; 2],
    goals: [usize; 2],
}

impl Windows {
    fn build(p: &LgoProblem<'_>) -> Self {
        let m = p.model;
        let h = m.horizon;
        let mut marg: [Vec<Marginal>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let ag = &m.agents[i];
            let cost = &m.rewards.action_cost[i];
            let ng = p.behaviors[i].len();
            let mut scratch = alloc::vec![0.0; ag.num_states()];
            let mut out = Vec::with_capacity(ag.num_states() * h * ng);
            for start in 0..ag.num_states() {
                for t in 0..h {
                    for b in &p.behaviors[i] {
                        let mut dist = Vec::with_capacity(h - t + 1);
                        let mut costs = Vec::with_capacity(h - t + 1);
                        dist.push(alloc::vec![(start, 1.0)]);
                        costs.push(0.0);
                        for j in 0..(h - t) {
                            let mut c = costs[j];
                            let mut touched: Vec<Local> = Vec::new();
                            for &(x, px) in &dist[j] {
                                let a = b.action(start, x, j, t + j);
                                c += px * if b.is_free(x, a) { 0.0 } else { cost[a] };
                                for &(y, py) in ag.row(x, a) {
                                    if scratch[y] == 0.0 {
                                        touched.push(y);
                                    }
                                    scratch[y] += px * py;
                                }
                            }
                            touched.sort_unstable();
                            touched.dedup();
                            let next: Vec<(Local, f64)> = touched
                                .iter()
                                .map(|&y| {
                                    let v = scratch[y];
                                    scratch[y] = 0.0;
                                    (y, v)
                                })
                                .filter(|&(_, v)| v > 0.0)
                                .collect();
                            dist.push(next);
                            costs.push(c);
                        }
                        out.push(Marginal { dist, cost: costs });
                    }
                }
            }
            marg[i] = out;
        }
        Windows { marg, goals: [p.behaviors[0].len(), p.behaviors[1].len()] }
    }

    fn get(&self, i: usize, start: Local, t: usize, g: usize, h: usize) -> &Marginal {
        &self.marg[i][(start * h + t) * self.goals[i] + g]
    }
}

/// Checks `k >= 1` and `t + k <= T`.
fn check_k(t: usize, k: usize, horizon: usize) -> Result<()> {
    if k == 0 || t + k > horizon {
        Err(Error::InvalidSteps { t, n: k, horizon })
    } else {
        Ok(())
    }
}

/// Joint forward pass over `k` steps under a goal pair, tracking reward mass
/// per reached global state. Used by the public kernels.
fn joint_window(
    p: &LgoProblem<'_>,
    a: &GoalAssignment,
    s: &FactoredState,
    t: usize,
) -> Result<BTreeMap<(Local, Local), (f64, f64)>> {
    let m = p.model;
    check_k(t, a.k, m.horizon)?;
    let b1 = p.behaviors[0].get(a.g1).ok_or_else(|| Error::Invalid(format!("no behaviour {} for agent 1", a.g1)))?;
    let b2 = p.behaviors[1].get(a.g2).ok_or_else(|| Error::Invalid(format!("no behaviour {} for agent 2", a.g2)))?;
    let mut cur: BTreeMap<(Local, Local), (f64, f64)> = BTreeMap::new();
    cur.insert((s.s1, s.s2), (1.0, 0.0));
    for j in 0..a.k {
        let mut next: BTreeMap<(Local, Local), (f64, f64)> = BTreeMap::new();
        for (&(x, y), &(pr, rm)) in &cur {
            let a1 = b1.action(s.s1, x, j, t + j);
            let a2 = b2.action(s.s2, y, j, t + j);
            let r = m.step_reward(x, y, Some(a1), Some(a2)) - m.rewards.action_cost[0][a1] - m.rewards.action_cost[1][a2]
                + behavior_cost(m, 0, b1.as_ref(), x, a1)
                + behavior_cost(m, 1, b2.as_ref(), y, a2);
            for &(x2, p1) in m.agents[0].row(x, a1) {
                for &(y2, p2) in m.agents[1].row(y, a2) {
                    let q = p1 * p2;
                    if q == 0.0 {
                        continue;
                    }
                    let e = next.entry((x2, y2)).or_insert((0.0, 0.0));
                    e.0 += pr * q;
                    e.1 += (rm + pr * r) * q;
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// `P^N_g`: distribution over global state indices after `k` joint steps.
pub fn png(p: &LgoProblem<'_>, a: &GoalAssignment, s: &FactoredState, t: usize) -> Result<Vec<f64>> {
    let m = p.model;
    let w = joint_window(p, a, s, t)?;
    let mut out = alloc::vec![0.0; m.num_global()];
    for ((x, y), (pr, _)) in w {
        out[m.index(x, y)] += pr;
    }
    Ok(out)
}

/// `R^N_g`: expected reward of the window given it ends in `s_next`, plus one
/// exchange.
pub fn rng(p: &LgoProblem<'_>, a: &GoalAssignment, s: &FactoredState, t: usize, s_next: &FactoredState) -> Result<f64> {
    let w = joint_window(p, a, s, t)?;
    let cbar = match w.get(&(s_next.s1, s_next.s2)) {
        Some(&(pr, rm)) if pr > 0.0 => rm / pr,
        _ => 0.0,
    };
    Ok(cbar + p.exchange_cost(t, a.k))
}

/// The value of committing to `a` at `(s, t)` against `v`.
fn f_value(p: &LgoProblem<'_>, w: &Windows, a: &GoalAssignment, s1: Local, s2: Local, t: usize, v: &ValueTable) -> f64 {
    let m = p.model;
    let h = m.horizon;
    let m1 = w.get(0, s1, t, a.g1, h);
    let m2 = w.get(1, s2, t, a.g2, h);
    let k = a.k;
    let mut f = p.exchange_cost(t, k) + m1.cost[k] + m2.cost[k];
    if !m.rewards.joint.is_empty() {
        let (b1, b2) = (&p.behaviors[0][a.g1], &p.behaviors[1][a.g2]);
        for j in 0..k {
            for &(x, px) in &m1.dist[j] {
                let a1 = b1.action(s1, x, j, t + j);
                for &(y, py) in &m2.dist[j] {
                    let a2 = b2.action(s2, y, j, t + j);
                    let extra = m.step_reward(x, y, Some(a1), Some(a2))
                        - m.rewards.action_cost[0][a1]
                        - m.rewards.action_cost[1][a2];
                    f += px * py * extra;
                }
            }
        }
    }
    let row = v.row(t + k);
    let n2 = m.agents[1].num_states();
    for &(x, px) in &m1.dist[k] {
        let base = x * n2;
        let mut inner = 0.0;
        for &(y, py) in &m2.dist[k] {
            inner += py * row[base + y];
        }
        f += px * inner;
    }
    f
}

/// Value of every window assignment: `V(s, T)` is terminal, otherwise the
/// expected window reward plus the value where the window ends.
pub fn evaluate_lgo(delta: &LgoMechanism, p: &LgoProblem<'_>) -> Result<ValueTable> {
    let w = Windows::build(p);
    evaluate_with(delta, p, &w)
}

fn evaluate_with(delta: &LgoMechanism, p: &LgoProblem<'_>, w: &Windows) -> Result<ValueTable> {
    let m = p.model;
    let n = m.num_global();
    let mut v = ValueTable::new(m);
    for t in (0..m.horizon).rev() {
        for idx in 0..n {
            let a = delta.assign[t * n + idx];
            check_k(t, a.k, m.horizon)?;
            if a.g1 >= p.behaviors[0].len() || a.g2 >= p.behaviors[1].len() {
                return Err(Error::Invalid(format!("assignment {:?} names an unknown behaviour", a)));
            }
            let (x, y) = m.unindex(idx);
            let f = f_value(p, w, &a, x, y, t, &v);
            v.set(idx, t, f);
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepStats {
    /// Every `(k, s, t, g1, g2)` visited by the improvement loops.
    pub candidates: usize,
    /// Candidates whose window fits the horizon and were scored.
    pub evaluations: usize,
    pub changed: usize,
    /// `V(s0, 0)` of the policy evaluated before this sweep.
    pub initial_value: f64,
}

#[derive(Debug, Clone)]
pub struct LgoResult {
    pub mechanism: LgoMechanism,
    pub sweeps: Vec<SweepStats>,
    pub history: Vec<ValueTable>,
}

/// Policy iteration over goal pairs and window lengths.
pub fn lgo_msbpi(p: &LgoProblem<'_>, max_iterations: usize) -> Result<LgoResult> {
    let m = p.model;
    if p.behaviors[0].is_empty() || p.behaviors[1].is_empty() {
        return Err(Error::Invalid(String::from("both agents need at least one behaviour")));
    }
    let n = m.num_global();
    let h = m.horizon;
    let w = Windows::build(p);
    let assign = alloc::vec![GoalAssignment { g1: 0, g2: 0, k: 1 }; n * h];
    let mut delta = LgoMechanism { assign, values: ValueTable::new(m) };
    let s0 = m.index(m.initial.s1, m.initial.s2);
    let mut sweeps = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iterations.max(1) {
        let mut v = evaluate_with(&delta, p, &w)?;
        history.push(v.clone());
        let mut st = SweepStats { initial_value: v.get(s0, 0), ..Default::default() };
        for k in 1..h {
            for idx in 0..n {
                let (x, y) = m.unindex(idx);
                for t in 0..h {
                    let fits = t + k <= h;
                    for g1 in 0..p.behaviors[0].len() {
                        for g2 in 0..p.behaviors[1].len() {
                            st.candidates += 1;
                            if !fits {
                                continue;
                            }
                            st.evaluations += 1;
                            let a = GoalAssignment { g1, g2, k };
                            let f = f_value(p, &w, &a, x, y, t, &v);
                            if f > v.get(idx, t) {
                                v.set(idx, t, f);
                                delta.assign[t * n + idx] = a;
                                st.changed += 1;
                            }
                        }
                    }
                }
            }
        }
        let done = st.changed == 0;
        sweeps.push(st);
        if done {
            break;
        }
    }
    delta.values = evaluate_with(&delta, p, &w)?;
    Ok(LgoResult { mechanism: delta, sweeps, history })
}

/// Largest cross-agent interference in goal-reaching cost and the resulting
/// `2 T Δ` suboptimality bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBound {
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
    pub bound: f64,
}

/// `cost(agent, s, own_goal, other_goal)` is the expected cost for `agent`
/// to reach its goal from global state index `s` while the other agent heads
/// for `other_goal`.
pub fn delta_independence(
    num_states: usize,
    goals: [usize; 2],
    horizon: usize,
    cost: impl Fn(usize, usize, usize, usize) -> f64,
) -> DeltaBound {
    let mut d = [0.0f64; 2];
    for i in 0..2 {
        let (own, other) = (goals[i], goals[1 - i]);
        for s in 0..num_states {
            for g in 0..own {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for o in 0..other {
                    let c = cost(i, s, g, o);
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
                if other > 0 {
                    d[i] = d[i].max(hi - lo);
                }
            }
        }
    }
    let delta = d[0].max(d[1]);
    DeltaBound { delta1: d[0], delta2: d[1], delta, bound: 2.0 * horizon as f64 * delta }
}
