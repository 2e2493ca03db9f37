//! Small random models and brute-force oracles shared by the integration
//! tests. Nothing here calls into the planners.

#![allow(dead_code)]

use std::collections::BTreeMap;

use decomm_core::options::{Act, PolicyTree};
use decomm_core::{AgentModel, DecMdpCom, FactoredState, GoalPredicate, JointKey, Rewards};
use proptest::prelude::*;

pub fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(0.5), 0.05f64..0.95]
}

/// Agent with `n <= 2` states and `na` actions; every action goes to state
/// 0 with the drawn probability, otherwise to the last state.
pub fn agent(n: usize, na: usize) -> impl Strategy<Value = AgentModel> {
    proptest::collection::vec(prob(), n * na).prop_map(move |ps| {
        let transition = (0..n)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let p = ps[s * na + a];
                        if n == 1 {
                            vec![(0, 1.0)]
                        } else {
                            vec![(0, p), (1, 1.0 - p)].into_iter().filter(|&(_, q)| q > 0.0).collect()
                        }
                    })
                    .collect()
            })
            .collect();
        AgentModel {
            name: "a".to_string(),
            states: (0..n).map(|i| format!("s{i}")).collect(),
            actions: (0..na).map(|i| format!("a{i}")).collect(),
            transition,
            goal_candidates: (0..n).collect(),
            noop: Some(0),
        }
    })
}

fn cost() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(-1.0), -2.0f64..0.0]
}

/// Models with `|S_i| <= 2`, `|A_i| <= 2` and `T <= max_horizon`, with
/// terminal rewards, joint step rewards and an exchange cost.
pub fn small_model(max_horizon: usize) -> impl Strategy<Value = DecMdpCom> {
    (1..=2usize, 1..=2usize, 1..=2usize, 1..=2usize, 1..=max_horizon).prop_flat_map(|(n1, na1, n2, na2, h)| {
        (
            agent(n1, na1),
            agent(n2, na2),
            proptest::collection::vec(cost(), na1),
            proptest::collection::vec(cost(), na2),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], n1 * n2),
            proptest::collection::vec(prop_oneof![3 => Just(0.0), 1 => -1.0f64..1.0], n1 * n2 * na1 * na2),
            cost(),
            Just(h),
        )
            .prop_map(move |(a1, a2, c1, c2, term, joint, comm, h)| {
                let mut table = BTreeMap::new();
                for s1 in 0..n1 {
                    for s2 in 0..n2 {
                        for x in 0..na1 {
                            for y in 0..na2 {
                                let v = joint[((s1 * n2 + s2) * na1 + x) * na2 + y];
                                if v != 0.0 {
                                    table.insert(JointKey { s1, s2, a1: Some(x), a2: Some(y) }, v);
                                }
                            }
                        }
                    }
                }
                DecMdpCom {
                    agents: [a1, a2],
                    rewards: Rewards { action_cost: [c1, c2], joint: table, terminal: Some(term) },
                    comm_cost: comm,
                    horizon: h,
                    initial: FactoredState::new(0, 0),
                    goal: GoalPredicate::None,
                }
            })
    })
}

/// Oracle-side option tree. `Leaf` is a domain action with nothing below it:
/// the horizon inside an option, free sensing inside a partial tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Opt {
    Comm,
    Leaf(usize),
    Do(usize, Vec<(usize, Opt)>),
}

impl Opt {
    fn act(&self) -> Option<usize> {
        match self {
            Opt::Comm => None,
            Opt::Leaf(a) | Opt::Do(a, _) => Some(*a),
        }
    }

    fn child(&self, s: usize) -> Option<&Opt> {
        match self {
            Opt::Do(_, kids) => kids.iter().find(|(x, _)| *x == s).map(|(_, o)| o),
            _ => None,
        }
    }
}

pub fn support(agent: &AgentModel, s: usize, a: usize) -> Vec<usize> {
    let mut v: Vec<usize> = agent.transition[s][a].iter().filter(|(_, p)| *p > 0.0).map(|(x, _)| *x).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn prob_of(agent: &AgentModel, s: usize, a: usize, x: usize) -> f64 {
    agent.transition[s][a].iter().filter(|(y, _)| *y == x).map(|(_, p)| p).sum()
}

/// Every option rooted at `s` with `remaining` steps to the horizon and at
/// most `cap` action levels.
pub fn enumerate_options(agent: &AgentModel, s: usize, remaining: usize, cap: usize) -> Vec<Opt> {
    let mut out = vec![Opt::Comm];
    for a in 0..agent.actions.len() {
        if remaining == 1 {
            out.push(Opt::Leaf(a));
            continue;
        }
        if cap < 2 {
            continue;
        }
        let succ = support(agent, s, a);
        let subs: Vec<Vec<Opt>> = succ.iter().map(|&x| enumerate_options(agent, x, remaining - 1, cap - 1)).collect();
        let mut idx = vec![0usize; succ.len()];
        loop {
            out.push(Opt::Do(a, succ.iter().enumerate().map(|(k, &x)| (x, subs[k][idx[k]].clone())).collect()));
            // odometer over the children's choices
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < subs[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

pub fn to_tree(o: &Opt, root: usize) -> PolicyTree {
    fn act(o: &Opt) -> Act {
        match o {
            Opt::Comm => Act::Communicate,
            Opt::Leaf(a) | Opt::Do(a, _) => Act::Do(*a),
        }
    }
    fn add(tree: &mut PolicyTree, id: usize, o: &Opt) {
        if let Opt::Do(_, kids) = o {
            for (x, k) in kids {
                let c = tree.add_child(id, *x, act(k));
                add(tree, c, k);
            }
        }
    }
    let mut t = PolicyTree::leaf(root, act(o));
    add(&mut t, 0, o);
    t
}

/// One complete joint sequence of a pair of trees.
#[derive(Debug, Clone)]
pub struct Sequence {
    /// Global states visited, start included.
    pub states: Vec<(usize, usize)>,
    pub prob: f64,
    /// Sum of the step rewards along the sequence.
    pub reward: f64,
    pub comm: bool,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> (usize, usize) {
        *self.states.last().unwrap()
    }
}

/// Lists every joint sequence the two trees can produce from `(x, y)`.
pub fn sequences(m: &DecMdpCom, o1: &Opt, o2: &Opt, x: usize, y: usize) -> Vec<Sequence> {
    let mut out = Vec::new();
    let start = Sequence { states: vec![(x, y)], prob: 1.0, reward: 0.0, comm: false };
    walk(m, o1, o2, start, &mut out);
    out
}

fn walk(m: &DecMdpCom, o1: &Opt, o2: &Opt, seq: Sequence, out: &mut Vec<Sequence>) {
    let (x, y) = seq.last();
    let (a1, a2) = (o1.act(), o2.act());
    let r = m.step_reward(x, y, a1, a2);
    let comm = a1.is_none() || a2.is_none();
    let next = |ag: &AgentModel, s: usize, a: Option<usize>| -> Vec<(usize, f64)> {
        match a {
            None => vec![(s, 1.0)],
            Some(a) => support(ag, s, a).into_iter().map(|z| (z, prob_of(ag, s, a, z))).collect(),
        }
    };
    for (x2, p1) in next(&m.agents[0], x, a1) {
        for (y2, p2) in next(&m.agents[1], y, a2) {
            let mut s = seq.clone();
            s.states.push((x2, y2));
            s.prob *= p1 * p2;
            s.reward += r;
            match (o1.child(x2), o2.child(y2)) {
                (Some(c1), Some(c2)) if !comm => walk(m, c1, c2, s, out),
                _ => {
                    s.comm = comm;
                    out.push(s);
                }
            }
        }
    }
}

/// Expected value of running the pair at `(x, y, t)` and continuing with `v`
/// at the stop. The exchange is charged unless the stop is at the horizon.
pub fn pair_value(m: &DecMdpCom, o1: &Opt, o2: &Opt, x: usize, y: usize, t: usize, v: &dyn Fn(usize, usize, usize) -> f64) -> f64 {
    sequences(m, o1, o2, x, y)
        .iter()
        .map(|s| {
            let n = s.len();
            let c = if s.comm && t + n < m.horizon { m.comm_cost } else { 0.0 };
            let (a, b) = s.last();
            s.prob * (s.reward + c + v(a, b, t + n))
        })
        .sum()
}

/// `V*(x, y, t)` over option pairs with at most `cap` levels, by backward
/// induction and exhaustive enumeration. Indexed `[t][x][y]`.
pub fn exhaustive_values(m: &DecMdpCom, cap: usize) -> Vec<Vec<Vec<f64>>> {
    let (n1, n2, h) = (m.agents[0].states.len(), m.agents[1].states.len(), m.horizon);
    let mut v = vec![vec![vec![0.0; n2]; n1]; h + 1];
    for x in 0..n1 {
        for y in 0..n2 {
            v[h][x][y] = m.terminal_reward(x, y);
        }
    }
    for t in (0..h).rev() {
        for x in 0..n1 {
            let opts1 = enumerate_options(&m.agents[0], x, h - t, cap);
            for y in 0..n2 {
                let opts2 = enumerate_options(&m.agents[1], y, h - t, cap);
                let mut best = f64::NEG_INFINITY;
                let look = |a: usize, b: usize, tt: usize| v[tt][a][b];
                for o1 in &opts1 {
                    for o2 in &opts2 {
                        best = best.max(pair_value(m, o1, o2, x, y, t, &look));
                    }
                }
                v[t][x][y] = best;
            }
        }
    }
    v
}

/// Flat backward induction over joint macro steps in which each agent either
/// exchanges at once or takes one primitive action and then exchanges. One
/// step before the horizon the second level may act instead, since nothing
/// follows it. Indexed `[t][x][y]`.
pub fn macro_mmdp_values(m: &DecMdpCom) -> Vec<Vec<Vec<f64>>> {
    let (n1, n2, h) = (m.agents[0].states.len(), m.agents[1].states.len(), m.horizon);
    let (na1, na2) = (m.agents[0].actions.len(), m.agents[1].actions.len());
    let step = |x: usize, a: Option<usize>, ag: &AgentModel| -> Vec<(usize, f64)> {
        match a {
            None => vec![(x, 1.0)],
            Some(a) => ag.transition[x][a].clone(),
        }
    };
    let choices = |na: usize| -> Vec<Option<usize>> { std::iter::once(None).chain((0..na).map(Some)).collect() };
    let mut v = vec![vec![vec![0.0; n2]; n1]; h + 1];
    for x in 0..n1 {
        for y in 0..n2 {
            v[h][x][y] = m.terminal_reward(x, y);
        }
    }
    for t in (0..h).rev() {
        let r = h - t;
        for x in 0..n1 {
            for y in 0..n2 {
                let mut best = f64::NEG_INFINITY;
                for &a1 in &choices(na1) {
                    for &a2 in &choices(na2) {
                        let rew = m.step_reward(x, y, a1, a2);
                        let both_act = a1.is_some() && a2.is_some();
                        if r == 1 || !both_act {
                            let c = if r == 1 { 0.0 } else { m.comm_cost };
                            let mut q = rew + c;
                            for &(x2, p1) in &step(x, a1, &m.agents[0]) {
                                for &(y2, p2) in &step(y, a2, &m.agents[1]) {
                                    q += p1 * p2 * v[t + 1][x2][y2];
                                }
                            }
                            best = best.max(q);
                            continue;
                        }
                        // second level: a map from own state to a choice
                        let second1: Vec<Option<usize>> = if r == 2 { choices(na1) } else { vec![None] };
                        let second2: Vec<Option<usize>> = if r == 2 { choices(na2) } else { vec![None] };
                        for f1 in maps(n1, &second1) {
                            for f2 in maps(n2, &second2) {
                                let mut q = rew;
                                for &(x2, p1) in &step(x, a1, &m.agents[0]) {
                                    for &(y2, p2) in &step(y, a2, &m.agents[1]) {
                                        let (b1, b2) = (f1[x2], f2[y2]);
                                        let mut inner = m.step_reward(x2, y2, b1, b2);
                                        if t + 2 < h {
                                            inner += m.comm_cost;
                                        }
                                        for &(x3, q1) in &step(x2, b1, &m.agents[0]) {
                                            for &(y3, q2) in &step(y2, b2, &m.agents[1]) {
                                                inner += q1 * q2 * v[t + 2][x3][y3];
                                            }
                                        }
                                        q += p1 * p2 * inner;
                                    }
                                }
                                best = best.max(q);
                            }
                        }
                    }
                }
                v[t][x][y] = best;
            }
        }
    }
    v
}

fn maps(n: usize, choices: &[Option<usize>]) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Option<usize>>| {
                choices.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

fn next(seed: &mut u64) -> u64 {
    // xorshift64*
    *seed ^= *seed >> 12;
    *seed ^= *seed << 25;
    *seed ^= *seed >> 27;
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d)
}

/// A random option (`partial = false`) or partial tree (`partial = true`,
/// domain-action leaves may stop early) rooted at `s`.
pub fn random_option(agent: &AgentModel, s: usize, remaining: usize, seed: &mut u64, partial: bool) -> Opt {
    let na = agent.actions.len() as u64;
    let pick = next(seed) % (na + 1);
    if pick == na {
        return Opt::Comm;
    }
    let a = pick as usize;
    if remaining == 1 || (partial && next(seed) % 3 == 0) {
        return Opt::Leaf(a);
    }
    let kids = support(agent, s, a).into_iter().map(|x| (x, random_option(agent, x, remaining - 1, seed, partial))).collect();
    Opt::Do(a, kids)
}

/// Same tree with every child list reversed.
pub fn reversed(o: &Opt) -> Opt {
    match o {
        Opt::Do(a, kids) => Opt::Do(*a, kids.iter().rev().map(|(x, k)| (*x, reversed(k))).collect()),
        other => other.clone(),
    }
}
