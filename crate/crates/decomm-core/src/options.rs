//! Policy trees, options and the semi-Markov kernels over option pairs.
//!
//! Time convention: a tree started at time `t` has its root acting during the
//! step `t -> t+1`; a node at depth `d` acts during `t+d -> t+d+1`. A
//! communication act takes that step and leaves the sender in place; the other
//! agent's domain action in the same step still executes. Whoever
//! communicates first ends both options. A domain-action leaf ends its option
//! after its step: at the horizon that is the time limit, inside a partial
//! tree it stands for free sensing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::model::{Action, AgentModel, DecMdpCom, FactoredState, Local};
use crate::value::ValueTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Act {
    Do(Action),
    Communicate,
}

impl Act {
    pub fn domain(self) -> Option<Action> {
        match self {
            Act::Do(a) => Some(a),
            Act::Communicate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub state: Local,
    pub depth: usize,
    pub act: Act,
    pub children: Vec<usize>,
}

/// Arena-allocated policy tree; node 0 is the root.
#[derive(Debug, Clone)]
pub struct PolicyTree {
    nodes: Vec<Node>,
}

impl PartialEq for PolicyTree {
    fn eq(&self, other: &Self) -> bool {
        self.canonical().nodes == other.canonical().nodes
    }
}

impl PolicyTree {
    pub fn leaf(state: Local, act: Act) -> Self {
        PolicyTree {
            nodes: alloc::vec![Node { state, depth: 0, act, children: Vec::new() }],
        }
    }

    pub fn root_state(&self) -> Local {
        self.nodes[0].state
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn set_act(&mut self, id: usize, act: Act) {
        self.nodes[id].act = act;
    }

    /// Appends a child under a domain-action node.
    pub fn add_child(&mut self, parent: usize, state: Local, act: Act) -> usize {
        let depth = self.nodes[parent].depth + 1;
        let id = self.nodes.len();
        self.nodes.push(Node { state, depth, act, children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }

    /// Number of action levels; a root with its action has size 1.
    pub fn size(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.children.is_empty())
            .map(|(i, _)| i)
    }

    /// Domain-action leaves that still have time to act below them.
    pub fn open_leaves(&self, remaining: usize) -> Vec<usize> {
        self.leaves()
            .filter(|&i| matches!(self.nodes[i].act, Act::Do(_)) && self.nodes[i].depth + 1 < remaining)
            .collect()
    }

    /// True when every leaf communicates or acts in the last step before the
    /// horizon.
    pub fn is_option(&self, remaining: usize) -> bool {
        self.size() <= remaining && self.open_leaves(remaining).is_empty()
    }

    /// Structural checks against the agent's dynamics.
    pub fn check(&self, agent: &AgentModel) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.state >= agent.num_states() {
                return Err(Error::MalformedTree(format!("node {} has unknown state {}", i, n.state)));
            }
            match n.act {
                Act::Communicate if !n.children.is_empty() => {
                    return Err(Error::MalformedTree(format!("communication at inner node {}", i)));
                }
                Act::Do(a) => {
                    if a >= agent.num_actions() {
                        return Err(Error::MalformedTree(format!("node {} has unknown action {}", i, a)));
                    }
                    if !n.children.is_empty() {
                        let mut want: Vec<Local> =
                            agent.row(n.state, a).iter().filter(|(_, p)| *p > 0.0).map(|(s, _)| *s).collect();
                        want.sort_unstable();
                        want.dedup();
                        let mut have: Vec<Local> = n.children.iter().map(|&c| self.nodes[c].state).collect();
                        have.sort_unstable();
                        if want != have {
                            return Err(Error::MalformedTree(format!(
                                "children of node {} do not match the transition support",
                                i
                            )));
                        }
                    }
                }
                _ => {}
            }
            for &c in &n.children {
                if self.nodes[c].depth != n.depth + 1 {
                    return Err(Error::MalformedTree(format!("bad depth under node {}", i)));
                }
            }
        }
        Ok(())
    }

    /// Expected action cost of the tree for one agent. Exchange costs are
    /// charged per pair, not here.
    pub fn expected_cost_g(&self, agent: &AgentModel, action_cost: &[f64]) -> f64 {
        self.g_from(0, agent, action_cost)
    }

    fn g_from(&self, id: usize, agent: &AgentModel, cost: &[f64]) -> f64 {
        let n = &self.nodes[id];
        match n.act {
            Act::Communicate => 0.0,
            Act::Do(a) => {
                let mut g = cost[a];
                for &c in &n.children {
                    let p = agent.prob(n.state, a, self.nodes[c].state);
                    g += p * self.g_from(c, agent, cost);
                }
                g
            }
        }
    }

    /// Same tree with nodes in breadth-first order, children sorted by state.
    pub fn canonical(&self) -> PolicyTree {
        let mut out = PolicyTree::leaf(self.nodes[0].state, self.nodes[0].act);
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back((0usize, 0usize));
        while let Some((src, dst)) = queue.pop_front() {
            let mut kids = self.nodes[src].children.clone();
            kids.sort_by_key(|&c| self.nodes[c].state);
            for c in kids {
                let id = out.add_child(dst, self.nodes[c].state, self.nodes[c].act);
                queue.push_back((c, id));
            }
        }
        out
    }

    /// Indented text form, one node per line.
    pub fn to_text(&self, agent: &AgentModel) -> String {
        let mut out = String::new();
        let canon = self.canonical();
        canon.write_node(0, agent, &mut out);
        out
    }

    fn write_node(&self, id: usize, agent: &AgentModel, out: &mut String) {
        let n = &self.nodes[id];
        for _ in 0..n.depth {
            out.push_str("  ");
        }
        let act = match n.act {
            Act::Do(a) => agent.actions[a].as_str(),
            Act::Communicate => "communicate",
        };
        let _ = writeln!(out, "{} -> {}", agent.states[n.state], act);
        for &c in &n.children {
            self.write_node(c, agent, out);
        }
    }

    /// Fully expands a tree that follows `policy(state, depth)` until it
    /// communicates or reaches `remaining` levels.
    pub fn from_policy(
        agent: &AgentModel,
        root: Local,
        remaining: usize,
        mut policy: impl FnMut(Local, usize) -> Act,
    ) -> PolicyTree {
        let mut tree = PolicyTree::leaf(root, policy(root, 0));
        let mut stack = alloc::vec![0usize];
        while let Some(id) = stack.pop() {
            let (state, depth, act) = (tree.nodes[id].state, tree.nodes[id].depth, tree.nodes[id].act);
            if let Act::Do(a) = act {
                if depth + 1 < remaining {
                    let mut succ: Vec<Local> =
                        agent.row(state, a).iter().filter(|(_, p)| *p > 0.0).map(|(s, _)| *s).collect();
                    succ.sort_unstable();
                    succ.dedup();
                    for s in succ {
                        let c = tree.add_child(id, s, policy(s, depth + 1));
                        stack.push(c);
                    }
                }
            }
        }
        tree
    }
}

/// A policy tree whose every path ends with a communication act or at the
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionTree {
    tree: PolicyTree,
}

impl OptionTree {
    /// `remaining` is `T - t` for the start time the option will be used at.
    pub fn new(tree: PolicyTree, agent: &AgentModel, remaining: usize) -> Result<Self> {
        tree.check(agent)?;
        if !tree.is_option(remaining) {
            return Err(Error::MalformedTree(String::from(
                "an option must end every path with communication or at the horizon",
            )));
        }
        Ok(OptionTree { tree })
    }

    pub fn communicate(state: Local) -> Self {
        OptionTree { tree: PolicyTree::leaf(state, Act::Communicate) }
    }

    pub fn tree(&self) -> &PolicyTree {
        &self.tree
    }

    pub fn into_tree(self) -> PolicyTree {
        self.tree
    }
}

/// Per-step termination and survival masses of one agent's tree.
struct Profile {
    /// `term[n][s]`: the option ends after exactly `n` steps in `s`.
    term: Vec<Vec<f64>>,
    /// `alive[n][s]`: the option is still running at `t+n`, in `s`.
    alive: Vec<Vec<f64>>,
}

fn profile(tree: &PolicyTree, agent: &AgentModel, steps: usize) -> Profile {
    let ns = agent.num_states();
    let mut term = alloc::vec![alloc::vec![0.0; ns]; steps + 1];
    let mut alive = alloc::vec![alloc::vec![0.0; ns]; steps + 1];
    let mut stack = alloc::vec![(0usize, 1.0f64)];
    while let Some((id, mass)) = stack.pop() {
        let n = tree.node(id);
        if n.depth + 1 > steps {
            continue;
        }
        match n.act {
            Act::Communicate => term[n.depth + 1][n.state] += mass,
            Act::Do(a) if n.children.is_empty() => {
                for &(s, p) in agent.row(n.state, a) {
                    term[n.depth + 1][s] += mass * p;
                }
            }
            Act::Do(a) => {
                for &c in &n.children {
                    let s = tree.node(c).state;
                    let m = mass * agent.prob(n.state, a, s);
                    alive[n.depth + 1][s] += m;
                    stack.push((c, m));
                }
            }
        }
    }
    Profile { term, alive }
}

fn check_window(t: usize, n: usize, horizon: usize) -> Result<()> {
    if n == 0 || t + n > horizon {
        Err(Error::InvalidSteps { t, n, horizon })
    } else {
        Ok(())
    }
}

fn check_root(tree: &PolicyTree, s: Local) -> Result<()> {
    if tree.root_state() != s {
        Err(Error::MalformedTree(format!(
            "tree is rooted at {} but queried at {}",
            tree.root_state(),
            s
        )))
    } else {
        Ok(())
    }
}

/// `P_i^N`: probability that the option ends exactly `n` steps after `t`, per
/// final local state. Paths still running at the horizon end there.
pub fn p_terminate(
    opt: &OptionTree,
    agent: &AgentModel,
    s_i: Local,
    t: usize,
    n: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_window(t, n, horizon)?;
    check_root(&opt.tree, s_i)?;
    Ok(profile(&opt.tree, agent, n).term.swap_remove(n))
}

/// `P̄_i^N`: probability of being in each local state at `t+n` without having
/// ended the option before `t+n`.
pub fn p_reach(
    opt: &OptionTree,
    agent: &AgentModel,
    s_i: Local,
    t: usize,
    n: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_window(t, n, horizon)?;
    check_root(&opt.tree, s_i)?;
    let pr = profile(&opt.tree, agent, n);
    Ok(pr.term[n].iter().zip(&pr.alive[n]).map(|(a, b)| a + b).collect())
}

/// One way a pair of trees can stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub n: usize,
    pub s1: Local,
    pub s2: Local,
    pub prob: f64,
    /// Probability times expected accumulated step reward on the way.
    pub reward_mass: f64,
    /// Ended by a communication act (charged), rather than by a leaf.
    pub comm: bool,
}

/// Forward pass over joint executions of two trees started at `s`, `t`.
pub fn pair_outcomes(
    tree1: &PolicyTree,
    tree2: &PolicyTree,
    m: &DecMdpCom,
    s: &FactoredState,
    t: usize,
) -> Result<Vec<Stop>> {
    check_root(tree1, s.s1)?;
    check_root(tree2, s.s2)?;
    let steps = tree1.size().min(tree2.size());
    check_window(t, steps, m.horizon)?;
    let mut acc: BTreeMap<(usize, Local, Local, bool), (f64, f64)> = BTreeMap::new();
    let mut stack = alloc::vec![(0usize, 0usize, 1.0f64, 0.0f64)];
    let mut succ1: Vec<(Local, f64, Option<usize>)> = Vec::new();
    let mut succ2: Vec<(Local, f64, Option<usize>)> = Vec::new();
    while let Some((u, v, mass, rmass)) = stack.pop() {
        let (nu, nv) = (tree1.node(u), tree2.node(v));
        let r = m.step_reward(nu.state, nv.state, nu.act.domain(), nv.act.domain());
        expand(tree1, &m.agents[0], u, &mut succ1);
        expand(tree2, &m.agents[1], v, &mut succ2);
        let comm = nu.act == Act::Communicate || nv.act == Act::Communicate;
        let depth = nu.depth;
        for &(x, px, cx) in &succ1 {
            for &(y, py, cy) in &succ2 {
                let q = px * py;
                if q == 0.0 {
                    continue;
                }
                let m2 = mass * q;
                let r2 = rmass * q + m2 * r;
                match (cx, cy) {
                    (Some(cx), Some(cy)) if !comm => stack.push((cx, cy, m2, r2)),
                    _ => {
                        let e = acc.entry((depth + 1, x, y, comm)).or_insert((0.0, 0.0));
                        e.0 += m2;
                        e.1 += r2;
                    }
                }
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|((n, s1, s2, comm), (prob, reward_mass))| Stop { n, s1, s2, prob, reward_mass, comm })
        .collect())
}

fn expand(tree: &PolicyTree, agent: &AgentModel, id: usize, out: &mut Vec<(Local, f64, Option<usize>)>) {
    out.clear();
    let n = tree.node(id);
    match n.act {
        Act::Communicate => out.push((n.state, 1.0, None)),
        Act::Do(a) if n.children.is_empty() => {
            out.extend(agent.row(n.state, a).iter().map(|&(s, p)| (s, p, None)));
        }
        Act::Do(a) => {
            for &c in &n.children {
                let s = tree.node(c).state;
                out.push((s, agent.prob(n.state, a, s), Some(c)));
            }
        }
    }
}

/// `P^N` over global state indices, from the inclusion-exclusion of the two
/// agents' termination and reach probabilities.
pub fn joint_pn(
    opt1: &OptionTree,
    opt2: &OptionTree,
    m: &DecMdpCom,
    s: &FactoredState,
    t: usize,
    n: usize,
) -> Result<Vec<f64>> {
    check_window(t, n, m.horizon)?;
    check_root(&opt1.tree, s.s1)?;
    check_root(&opt2.tree, s.s2)?;
    let p1 = profile(&opt1.tree, &m.agents[0], n);
    let p2 = profile(&opt2.tree, &m.agents[1], n);
    Ok(combine(&m.agents[0], &m.agents[1], &p1, &p2, n))
}

fn combine(a1: &AgentModel, a2: &AgentModel, p1: &Profile, p2: &Profile, n: usize) -> Vec<f64> {
    let (n1, n2) = (a1.num_states(), a2.num_states());
    let mut out = alloc::vec![0.0; n1 * n2];
    for x in 0..n1 {
        let (t1, r1) = (p1.term[n][x], p1.term[n][x] + p1.alive[n][x]);
        for y in 0..n2 {
            let (t2, r2) = (p2.term[n][y], p2.term[n][y] + p2.alive[n][y]);
            out[x * n2 + y] = t1 * r2 + t2 * r1 - t1 * t2;
        }
    }
    out
}

/// `R^N`: expected reward accumulated on the way from `s` to `s_next` given
/// the pair stops there after `n` steps, plus the exchange cost unless the
/// horizon was reached. Zero-probability outcomes give just the exchange cost.
pub fn joint_rn(
    opt1: &OptionTree,
    opt2: &OptionTree,
    m: &DecMdpCom,
    s: &FactoredState,
    t: usize,
    s_next: &FactoredState,
    n: usize,
) -> Result<f64> {
    check_window(t, n, m.horizon)?;
    let stops = pair_outcomes(&opt1.tree, &opt2.tree, m, s, t)?;
    Ok(rn_from(&stops, m, t, n, s_next.s1, s_next.s2))
}

fn rn_from(stops: &[Stop], m: &DecMdpCom, t: usize, n: usize, x: Local, y: Local) -> f64 {
    let (mut p, mut r) = (0.0, 0.0);
    for st in stops.iter().filter(|st| st.n == n && st.s1 == x && st.s2 == y) {
        p += st.prob;
        r += st.reward_mass;
    }
    let cbar = if p > 0.0 { r / p } else { 0.0 };
    if t + n == m.horizon {
        cbar
    } else {
        cbar + m.comm_cost
    }
}

/// One kernel entry: `(n, global index, P^N, R^N)`.
pub type KernelEntry = (usize, usize, f64, f64);

/// All nonzero `(N, s')` entries of the kernel for an option pair.
pub fn kernel(
    opt1: &OptionTree,
    opt2: &OptionTree,
    m: &DecMdpCom,
    s: &FactoredState,
    t: usize,
) -> Result<Vec<KernelEntry>> {
    check_root(&opt1.tree, s.s1)?;
    check_root(&opt2.tree, s.s2)?;
    let steps = m.horizon.checked_sub(t).filter(|&r| r > 0).ok_or(Error::InvalidSteps {
        t,
        n: 1,
        horizon: m.horizon,
    })?;
    let p1 = profile(&opt1.tree, &m.agents[0], steps);
    let p2 = profile(&opt2.tree, &m.agents[1], steps);
    let stops = pair_outcomes(&opt1.tree, &opt2.tree, m, s, t)?;
    let mut out = Vec::new();
    for n in 1..=steps {
        let pn = combine(&m.agents[0], &m.agents[1], &p1, &p2, n);
        for (idx, &p) in pn.iter().enumerate() {
            if p > 0.0 {
                let (x, y) = m.unindex(idx);
                out.push((n, idx, p, rn_from(&stops, m, t, n, x, y)));
            }
        }
    }
    Ok(out)
}

/// `f = G + H` for a pair of (possibly partial) trees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FValue {
    /// Expected rewards until the pair stops, exchange cost included.
    pub g: f64,
    /// Expected value of the state the pair stops in.
    pub h: f64,
}

impl FValue {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

/// Evaluates a pair of trees against the value table `v`. Domain-action leaves
/// that are not at the horizon are synchronised for free.
pub fn joint_f_value(
    tree1: &PolicyTree,
    tree2: &PolicyTree,
    m: &DecMdpCom,
    s: &FactoredState,
    t: usize,
    v: &ValueTable,
) -> Result<FValue> {
    let stops = pair_outcomes(tree1, tree2, m, s, t)?;
    Ok(f_from_stops(&stops, m, t, v))
}

pub(crate) fn f_from_stops(stops: &[Stop], m: &DecMdpCom, t: usize, v: &ValueTable) -> FValue {
    let (mut g, mut h) = (0.0, 0.0);
    for st in stops {
        g += st.reward_mass;
        if st.comm && t + st.n < m.horizon {
            g += st.prob * m.comm_cost;
        }
        h += st.prob * v.get(m.index(st.s1, st.s2), t + st.n);
    }
    FValue { g, h }
}
