//! Myopic-greedy communication: the expected cost of never communicating,
//! of communicating exactly once, and the resulting communication-time
//! tables for the meeting problem.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Action, DecMdpCom, FactoredState, Local};

/// Local action policies the agents follow between exchanges. The policy may
/// depend on the state revealed by the last exchange.
pub trait SyncPolicy {
    fn action(&self, agent: usize, sync: &FactoredState, local: Local, t: usize) -> Action;
}

/// Communication-free policies, `actions[agent][t][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedLocalPolicies {
    pub actions: [Vec<Vec<Action>>; 2],
}

impl SyncPolicy for FixedLocalPolicies {
    fn action(&self, agent: usize, _sync: &FactoredState, local: Local, t: usize) -> Action {
        let table = &self.actions[agent];
        table[t.min(table.len() - 1)][local]
    }
}

fn start_time(s: &FactoredState) -> usize {
    s.t.unwrap_or(0)
}

/// Expected reward from `s0` until the global goal or the horizon, never
/// communicating.
pub fn theta_nc<P: SyncPolicy + ?Sized>(m: &DecMdpCom, s0: &FactoredState, pol: &P) -> Result<f64> {
    m.check_global(s0)?;
    let t0 = start_time(s0);
    let table = nc_table(m, s0, pol, t0);
    Ok(table[0][m.index(s0.s1, s0.s2)])
}

/// `table[t - t0][idx]`, values under the policies anchored at `anchor`.
fn nc_table<P: SyncPolicy + ?Sized>(m: &DecMdpCom, anchor: &FactoredState, pol: &P, t0: usize) -> Vec<Vec<f64>> {
    let n = m.num_global();
    let h = m.horizon.max(t0);
    let mut table = alloc::vec![alloc::vec![0.0; n]; h - t0 + 1];
    for t in (t0..h).rev() {
        for idx in 0..n {
            let (x, y) = m.unindex(idx);
            if m.is_goal(x, y) {
                continue;
            }
            let a1 = pol.action(0, anchor, x, t);
            let a2 = pol.action(1, anchor, y, t);
            let mut v = m.step_reward(x, y, Some(a1), Some(a2));
            for &(x2, p1) in m.agents[0].row(x, a1) {
                for &(y2, p2) in m.agents[1].row(y, a2) {
                    v += p1 * p2 * table[t + 1 - t0][m.index(x2, y2)];
                }
            }
            table[t - t0][idx] = v;
        }
    }
    table
}

/// Joint forward pass from `s0` for `steps` steps. Goal states absorb: they
/// stop accruing reward. Entries are `(x, y, met) -> (prob, reward mass)`.
fn forward<P: SyncPolicy + ?Sized>(
    m: &DecMdpCom,
    s0: &FactoredState,
    pol: &P,
    steps: usize,
    absorb: bool,
) -> BTreeMap<(Local, Local, bool), (f64, f64)> {
    let t0 = start_time(s0);
    let mut cur = BTreeMap::new();
    let met0 = absorb && m.is_goal(s0.s1, s0.s2);
    cur.insert((s0.s1, s0.s2, met0), (1.0, 0.0));
    for j in 0..steps {
        let mut next: BTreeMap<(Local, Local, bool), (f64, f64)> = BTreeMap::new();
        for (&(x, y, met), &(p, rm)) in &cur {
            if met {
                let e = next.entry((x, y, true)).or_insert((0.0, 0.0));
                e.0 += p;
                e.1 += rm;
                continue;
            }
            let a1 = pol.action(0, s0, x, t0 + j);
            let a2 = pol.action(1, s0, y, t0 + j);
            let r = m.step_reward(x, y, Some(a1), Some(a2));
            for &(x2, p1) in m.agents[0].row(x, a1) {
                for &(y2, p2) in m.agents[1].row(y, a2) {
                    let q = p1 * p2;
                    if q == 0.0 {
                        continue;
                    }
                    let met2 = absorb && m.is_goal(x2, y2);
                    let e = next.entry((x2, y2, met2)).or_insert((0.0, 0.0));
                    e.0 += p * q;
                    e.1 += (rm + p * r) * q;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Expected reward when the agents act from `s0` until time `t`, exchange
/// once (unless they already met), then continue without communicating under
/// policies anchored at the revealed state. Conditioned on agent 1 being in
/// `s1` at `t`; zero if agent 1 cannot be there.
pub fn theta_c<P: SyncPolicy + ?Sized>(m: &DecMdpCom, s0: &FactoredState, s1: Local, t: usize, pol: &P) -> Result<f64> {
    let (mass, total) = theta_c_parts(m, s0, t, pol, Some(s1))?;
    Ok(if mass > 0.0 { total / mass } else { 0.0 })
}

/// Unconditional version of [`theta_c`]: the expected reward of exchanging at
/// `t` as seen from `s0`.
pub fn theta_c_expected<P: SyncPolicy + ?Sized>(m: &DecMdpCom, s0: &FactoredState, t: usize, pol: &P) -> Result<f64> {
    Ok(theta_c_parts(m, s0, t, pol, None)?.1)
}

fn theta_c_parts<P: SyncPolicy + ?Sized>(
    m: &DecMdpCom,
    s0: &FactoredState,
    t: usize,
    pol: &P,
    only: Option<Local>,
) -> Result<(f64, f64)> {
    m.check_global(s0)?;
    let t0 = start_time(s0);
    if t <= t0 || t > m.horizon {
        return Err(Error::InvalidSteps { t: t0, n: t.saturating_sub(t0), horizon: m.horizon });
    }
    let dist = forward(m, s0, pol, t - t0, true);
    let (mut mass, mut total) = (0.0, 0.0);
    for (&(x, y, met), &(p, rm)) in &dist {
        if only.is_some_and(|s| s != x) {
            continue;
        }
        mass += p;
        total += rm;
        if !met {
            let anchor = FactoredState::at(x, y, t);
            let cont = nc_table(m, &anchor, pol, t)[0][m.index(x, y)];
            total += p * (m.comm_cost + cont);
        }
    }
    Ok((mass, total))
}

/// Probability of reaching time-stamped `s_next` from time-stamped `s`
/// under the policies anchored at `s`.
pub fn pbar<P: SyncPolicy + ?Sized>(m: &DecMdpCom, s: &FactoredState, s_next: &FactoredState, pol: &P) -> Result<f64> {
    let (t0, t1) = match (s.t, s_next.t) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingTimeStamp),
    };
    if s == s_next {
        return Ok(1.0);
    }
    if t1 < t0 + 1 {
        return Ok(0.0);
    }
    let dist = forward(m, s, pol, t1 - t0, false);
    Ok(dist.get(&(s_next.s1, s_next.s2, false)).map_or(0.0, |e| e.0))
}

/// Expected reward accumulated on the way from `s0` to `s`, given `s` is
/// reached at its time stamp.
pub fn rbar<P: SyncPolicy + ?Sized>(m: &DecMdpCom, s0: &FactoredState, s: &FactoredState, pol: &P) -> Result<f64> {
    let (t0, t1) = match (s0.t, s.t) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingTimeStamp),
    };
    if t1 <= t0 {
        return Err(Error::InvalidSteps { t: t0, n: 0, horizon: m.horizon });
    }
    let dist = forward(m, s0, pol, t1 - t0, false);
    Ok(match dist.get(&(s.s1, s.s2, false)) {
        Some(&(p, rm)) if p > 0.0 => rm / p,
        _ => 0.0,
    })
}

/// Expected time-to-meet values `Θ(d1, d2)` (one unit of cost per step) when
/// each agent walks toward the meeting point and succeeds with `p1` / `p2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    p1: f64,
    p2: f64,
    size: usize,
    cells: Vec<f64>,
}

impl ThetaTable {
    /// All cells with `d1, d2 <= max_d`.
    pub fn new(max_d: usize, p1: f64, p2: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 <= 1.0 && p2 > 0.0 && p2 <= 1.0) {
            return Err(Error::Divergent);
        }
        let size = max_d + 1;
        let mut cells = alloc::vec![0.0; size * size];
        let stall = 1.0 - (1.0 - p1) * (1.0 - p2);
        for d1 in 0..size {
            for d2 in 0..size {
                let at = |a: usize, b: usize| cells[a * size + b];
                let v = match (d1, d2) {
                    (0, 0) => 0.0,
                    (_, 0) => (p1 * at(d1 - 1, 0) - 1.0) / p1,
                    (0, _) => (p2 * at(0, d2 - 1) - 1.0) / p2,
                    _ => {
                        let s = p1 * p2 * at(d1 - 1, d2 - 1)
                            + p1 * (1.0 - p2) * at(d1 - 1, d2)
                            + (1.0 - p1) * p2 * at(d1, d2 - 1);
                        (s - 1.0) / stall
                    }
                };
                cells[d1 * size + d2] = v;
            }
        }
        Ok(ThetaTable { p1, p2, size, cells })
    }

    pub fn get(&self, d1: usize, d2: usize) -> f64 {
        self.cells[d1 * self.size + d2]
    }

    pub fn max_distance(&self) -> usize {
        self.size - 1
    }

    pub fn probabilities(&self) -> (f64, f64) {
        (self.p1, self.p2)
    }

    /// Number of cells solved.
    pub fn evaluations(&self) -> usize {
        self.cells.len()
    }
}

/// `Θ_nc(d1, d2)` for the meeting problem: minus the expected number of
/// steps until both agents reach the meeting point.
pub fn theta_nc_meeting(d1: usize, d2: usize, p1: f64, p2: f64) -> Result<f64> {
    if (d1 > 0 && p1 <= 0.0) || (d2 > 0 && p2 <= 0.0) {
        return Err(Error::Divergent);
    }
    let q1 = if p1 > 0.0 { p1 } else { 1.0 };
    let q2 = if p2 > 0.0 { p2 } else { 1.0 };
    Ok(ThetaTable::new(d1.max(d2), q1, q2)?.get(d1, d2))
}

/// Remaining distances of the two agents to a meeting point placed on a
/// shortest path between them. Agent 1 takes the nearer half.
pub fn split_distance(d: usize) -> (usize, usize) {
    (d / 2, d - d / 2)
}

/// Parameters of a communication-time table for the meeting problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeetingTableParams {
    pub max_distance: usize,
    pub p1: f64,
    pub p2: f64,
    pub comm_cost: f64,
    /// Per-agent cost of one step (non-positive).
    pub action_cost: f64,
    /// Latest time considered.
    pub horizon: usize,
}

/// For each synchronised distance, the time at which to exchange next.
/// `None` means never.
#[derive(Debug, Clone, PartialEq)]
pub struct CommPolicy {
    times: Vec<Option<usize>>,
}

impl CommPolicy {
    pub fn from_times(times: Vec<Option<usize>>) -> Self {
        CommPolicy { times }
    }

    pub fn get(&self, d: usize) -> Option<usize> {
        self.times.get(d).copied().flatten()
    }

    pub fn max_distance(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// Entries for distances `1..=max_distance`.
    pub fn row(&self) -> &[Option<usize>] {
        &self.times[1.min(self.times.len())..]
    }
}

/// Meeting-problem value functions in joint utility units (both agents pay
/// the step cost until they meet).
#[derive(Debug, Clone)]
pub struct MeetingValues {
    theta: ThetaTable,
    params: MeetingTableParams,
}

impl MeetingValues {
    pub fn new(params: MeetingTableParams) -> Result<Self> {
        let theta = ThetaTable::new(params.max_distance.max(1), params.p1, params.p2)?;
        Ok(MeetingValues { theta, params })
    }

    fn scale(&self) -> f64 {
        -2.0 * self.params.action_cost
    }

    /// Never communicating after a synchronisation at distance `d`.
    pub fn no_comm(&self, d: usize) -> f64 {
        let (a, b) = split_distance(d);
        self.scale() * self.theta.get(a, b)
    }

    /// Acting `t` steps from a synchronisation at distance `d`, exchanging
    /// then (unless met; meeting ends the episode at once) and never again.
    pub fn comm_at(&self, d: usize, t: usize) -> f64 {
        self.curve(d, t).last().copied().unwrap_or_else(|| self.no_comm(d))
    }

    /// `comm_at(d, 1..=t_max)`.
    pub fn curve(&self, d: usize, t_max: usize) -> Vec<f64> {
        let (p1, p2) = (self.params.p1, self.params.p2);
        let step = 2.0 * self.params.action_cost;
        let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        dist.insert(split_distance(d), 1.0);
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(t_max);
        for _ in 0..t_max {
            let mut next: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (&(a, b), &pr) in &dist {
                if a == 0 && b == 0 {
                    *next.entry((0, 0)).or_insert(0.0) += pr;
                    continue;
                }
                acc += step * pr;
                let m1: &[(usize, f64)] = if a > 0 { &[(1, p1), (0, 1.0 - p1)] } else { &[(0, 1.0)] };
                let m2: &[(usize, f64)] = if b > 0 { &[(1, p2), (0, 1.0 - p2)] } else { &[(0, 1.0)] };
                for &(da, pa) in m1 {
                    for &(db, pb) in m2 {
                        let q = pr * pa * pb;
                        if q > 0.0 {
                            *next.entry((a - da, b - db)).or_insert(0.0) += q;
                        }
                    }
                }
            }
            dist = next;
            let mut v = acc;
            for (&(a, b), &pr) in &dist {
                if a == 0 && b == 0 {
                    continue;
                }
                v += pr * (self.params.comm_cost + self.no_comm_capped(a + b));
            }
            out.push(v);
        }
        out
    }

    fn no_comm_capped(&self, d: usize) -> f64 {
        let (a, b) = split_distance(d);
        let m = self.theta.max_distance();
        if a <= m && b <= m {
            self.scale() * self.theta.get(a, b)
        } else {
            // only reachable when the table was built too small
            self.scale() * ThetaTable::new(a.max(b), self.params.p1, self.params.p2).map_or(0.0, |t| t.get(a, b))
        }
    }

    pub fn theta(&self) -> &ThetaTable {
        &self.theta
    }
}

/// Earliest `t` such that acting `t` steps and exchanging beats never
/// exchanging; the table stores `t + 1`, the time of the exchange.
pub fn comm_policy_table(params: &MeetingTableParams) -> Result<CommPolicy> {
    let vals = MeetingValues::new(*params)?;
    let mut times = alloc::vec![None; params.max_distance + 1];
    let t_max = params.horizon.saturating_sub(1);
    for (d, slot) in times.iter_mut().enumerate().skip(1) {
        let base = vals.no_comm(d);
        *slot = vals
            .curve(d, t_max)
            .iter()
            .position(|&v| v > base + 1e-12)
            .map(|i| i + 2);
    }
    Ok(CommPolicy { times })
}
