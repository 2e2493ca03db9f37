//! Multi-step backup policy iteration over pairs of option trees.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{DecMdpCom, FactoredState};
use crate::options::{f_from_stops, kernel, pair_outcomes, Act, OptionTree, PolicyTree};
use crate::value::ValueTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsbpiConfig {
    /// Maximum number of search nodes created while improving one cell.
    pub node_budget: usize,
    /// Restricts options to at most this many action levels.
    pub max_option_len: Option<usize>,
    pub max_iterations: usize,
}

impl Default for MsbpiConfig {
    fn default() -> Self {
        MsbpiConfig { node_budget: 1_000_000, max_option_len: None, max_iterations: 10_000 }
    }
}

/// An option pair for every global state and every `t < T`, with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMechanism {
    options: Vec<(OptionTree, OptionTree)>,
    pub values: ValueTable,
}

impl GeneralMechanism {
    /// Both agents communicate immediately everywhere.
    pub fn communicate_everywhere(m: &DecMdpCom) -> Result<Self> {
        let n = m.num_global();
        let mut options = Vec::with_capacity(n * m.horizon);
        for _t in 0..m.horizon {
            for idx in 0..n {
                let (a, b) = m.unindex(idx);
                options.push((OptionTree::communicate(a), OptionTree::communicate(b)));
            }
        }
        let values = evaluate_options(&options, m)?;
        Ok(GeneralMechanism { options, values })
    }

    pub fn pair(&self, m: &DecMdpCom, s1: usize, s2: usize, t: usize) -> &(OptionTree, OptionTree) {
        &self.options[t * m.num_global() + m.index(s1, s2)]
    }

    pub fn value(&self, m: &DecMdpCom, s1: usize, s2: usize, t: usize) -> f64 {
        self.values.get(m.index(s1, s2), t)
    }
}

/// Backward induction over the semi-Markov kernel of the stored option pairs.
pub fn evaluate_policy(delta: &GeneralMechanism, m: &DecMdpCom) -> Result<ValueTable> {
    evaluate_options(&delta.options, m)
}

fn evaluate_options(options: &[(OptionTree, OptionTree)], m: &DecMdpCom) -> Result<ValueTable> {
    let n = m.num_global();
    let mut v = ValueTable::new(m);
    for t in (0..m.horizon).rev() {
        for idx in 0..n {
            let (a, b) = m.unindex(idx);
            let (o1, o2) = &options[t * n + idx];
            let mut total = 0.0;
            for (k, next, p, r) in kernel(o1, o2, m, &FactoredState::at(a, b, t), t)? {
                total += p * (r + v.get(next, t + k));
            }
            v.set(idx, t, total);
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Improvement {
    None,
    Improved { pair: (OptionTree, OptionTree), value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub created: usize,
    pub popped: usize,
    pub pruned: usize,
}

struct SearchNode {
    t1: PolicyTree,
    t2: PolicyTree,
    f: f64,
}

/// Relative margin a candidate must clear to replace the current pair.
pub const IMPROVE_TOL: f64 = 1e-9;

/// Depth-first branch and bound for a better option pair at `(s, t)`.
/// Only `V(s, t)` itself is read as the bound; successors use `v` as given.
pub fn improve_state(
    s: &FactoredState,
    t: usize,
    v: &ValueTable,
    m: &DecMdpCom,
    cfg: &MsbpiConfig,
) -> Result<(Improvement, SearchStats)> {
    let remaining = m.horizon.checked_sub(t).filter(|&r| r > 0).ok_or(Error::InvalidSteps {
        t,
        n: 1,
        horizon: m.horizon,
    })?;
    let cap = cfg.max_option_len.unwrap_or(remaining).min(remaining).max(1);
    let acts1 = acts(m.agents[0].num_actions());
    let acts2 = acts(m.agents[1].num_actions());
    // a pair must beat the current value by more than rounding noise
    let current = v.get(m.index(s.s1, s.s2), t);
    let mut best = current + IMPROVE_TOL * (1.0 + current.abs());
    let mut found: Option<(PolicyTree, PolicyTree)> = None;
    let mut stats = SearchStats::default();
    let mut stack: Vec<SearchNode> = Vec::new();

    let eval = |t1: &PolicyTree, t2: &PolicyTree| -> Result<f64> {
        let stops = pair_outcomes(t1, t2, m, s, t)?;
        Ok(f_from_stops(&stops, m, t, v).f())
    };

    for &a1 in acts1.iter().rev() {
        for &a2 in acts2.iter().rev() {
            let t1 = PolicyTree::leaf(s.s1, a1);
            let t2 = PolicyTree::leaf(s.s2, a2);
            bump(&mut stats, cfg)?;
            let f = eval(&t1, &t2)?;
            if f > best {
                stack.push(SearchNode { t1, t2, f });
            }
        }
    }

    while let Some(node) = stack.pop() {
        stats.popped += 1;
        if node.f <= best {
            stats.pruned += 1;
            continue;
        }
        let depth = node.t1.size() - 1;
        let done1 = deepest_all_communicate(&node.t1, depth);
        let done2 = deepest_all_communicate(&node.t2, depth);
        if done1 || done2 {
            // The communicating tree ends the pair after this level: the other
            // tree's open leaves still act in that step, then are cut off.
            let mut t1 = node.t1;
            let mut t2 = node.t2;
            if !done1 {
                cap_open_leaves(&mut t1, &m.agents[0], remaining);
            }
            if !done2 {
                cap_open_leaves(&mut t2, &m.agents[1], remaining);
            }
            if t1.size() > cap || t2.size() > cap {
                continue;
            }
            let f = eval(&t1, &t2)?;
            if f > best {
                best = f;
                found = Some((t1, t2));
            }
            continue;
        }
        let open1 = node.t1.open_leaves(remaining);
        let open2 = node.t2.open_leaves(remaining);
        if open1.is_empty() && open2.is_empty() {
            // every path runs into the horizon
            best = node.f;
            found = Some((node.t1, node.t2));
            continue;
        }
        if node.t1.size() >= cap {
            continue;
        }
        let mut t1 = node.t1;
        let mut t2 = node.t2;
        let new1 = grow(&mut t1, &m.agents[0], &open1);
        let new2 = grow(&mut t2, &m.agents[1], &open2);
        let slots: Vec<(bool, usize)> =
            new1.iter().map(|&i| (true, i)).chain(new2.iter().map(|&i| (false, i))).collect();
        let radices: Vec<usize> =
            slots.iter().map(|&(first, _)| if first { acts1.len() } else { acts2.len() }).collect();
        let total = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r)).unwrap_or(usize::MAX);
        let mut children = Vec::new();
        for code in 0..total {
            // mixed radix, first slot varies slowest
            let mut c = code;
            for k in (0..slots.len()).rev() {
                let act_idx = c % radices[k];
                c /= radices[k];
                let (first, id) = slots[k];
                if first {
                    t1.set_act(id, acts1[act_idx]);
                } else {
                    t2.set_act(id, acts2[act_idx]);
                }
            }
            bump(&mut stats, cfg)?;
            let f = eval(&t1, &t2)?;
            if f > best {
                children.push(SearchNode { t1: t1.clone(), t2: t2.clone(), f });
            }
        }
        // pushed in reverse so the lexicographically first child is popped first
        stack.extend(children.into_iter().rev());
    }

    match found {
        None => Ok((Improvement::None, stats)),
        Some((t1, t2)) => {
            let o1 = OptionTree::new(t1, &m.agents[0], remaining)?;
            let o2 = OptionTree::new(t2, &m.agents[1], remaining)?;
            Ok((Improvement::Improved { pair: (o1, o2), value: best }, stats))
        }
    }
}

fn acts(n: usize) -> Vec<Act> {
    (0..n).map(Act::Do).chain(core::iter::once(Act::Communicate)).collect()
}

fn bump(stats: &mut SearchStats, cfg: &MsbpiConfig) -> Result<()> {
    stats.created += 1;
    if stats.created > cfg.node_budget {
        Err(Error::NodeBudget { budget: cfg.node_budget })
    } else {
        Ok(())
    }
}

fn deepest_all_communicate(tree: &PolicyTree, depth: usize) -> bool {
    tree.nodes()
        .iter()
        .filter(|n| n.depth == depth && n.children.is_empty())
        .all(|n| n.act == Act::Communicate)
}

fn successors(agent: &crate::model::AgentModel, s: usize, a: usize) -> Vec<usize> {
    let mut v: Vec<usize> = agent.row(s, a).iter().filter(|(_, p)| *p > 0.0).map(|(x, _)| *x).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn grow(tree: &mut PolicyTree, agent: &crate::model::AgentModel, open: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for &id in open {
        let node = tree.node(id);
        let (s, a) = match node.act {
            Act::Do(a) => (node.state, a),
            Act::Communicate => continue,
        };
        for x in successors(agent, s, a) {
            out.push(tree.add_child(id, x, Act::Communicate));
        }
    }
    out
}

fn cap_open_leaves(tree: &mut PolicyTree, agent: &crate::model::AgentModel, remaining: usize) {
    let open = tree.open_leaves(remaining);
    grow(tree, agent, &open);
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    /// `V(s0, 0)` of the policy evaluated in this iteration.
    pub initial_value: f64,
    /// Sum of `V(s, 0)` over all global states.
    pub total_value: f64,
    pub improved_cells: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct MsbpiResult {
    pub mechanism: GeneralMechanism,
    pub iterations: Vec<IterationStats>,
    /// Value table of every evaluated policy, in order.
    pub history: Vec<ValueTable>,
}

/// Alternates evaluation and improvement until no cell improves.
pub fn msbpi(m: &DecMdpCom, initial: Option<GeneralMechanism>, cfg: &MsbpiConfig) -> Result<MsbpiResult> {
    let mut delta = match initial {
        Some(d) => d,
        None => GeneralMechanism::communicate_everywhere(m)?,
    };
    let n = m.num_global();
    let s0 = m.index(m.initial.s1, m.initial.s2);
    let mut iterations = Vec::new();
    let mut history = Vec::new();
    for iteration in 0..cfg.max_iterations {
        let v = evaluate_policy(&delta, m)?;
        let mut improved = 0;
        let mut nodes = 0;
        let mut next = delta.options.clone();
        for t in 0..m.horizon {
            for idx in 0..n {
                let (a, b) = m.unindex(idx);
                let (imp, st) = improve_state(&FactoredState::at(a, b, t), t, &v, m, cfg)?;
                nodes += st.created;
                if let Improvement::Improved { pair, .. } = imp {
                    next[t * n + idx] = pair;
                    improved += 1;
                }
            }
        }
        iterations.push(IterationStats {
            iteration,
            initial_value: v.get(s0, 0),
            total_value: v.row(0).iter().sum(),
            improved_cells: improved,
            nodes,
        });
        history.push(v.clone());
        delta.values = v;
        if improved == 0 {
            return Ok(MsbpiResult { mechanism: delta, iterations, history });
        }
        delta.options = next;
    }
    delta.values = evaluate_policy(&delta, m)?;
    Ok(MsbpiResult { mechanism: delta, iterations, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentModel, GoalPredicate, Rewards};
    use alloc::string::ToString;
    use alloc::vec;

    fn agent(p: f64) -> AgentModel {
        AgentModel {
            name: "a".to_string(),
            states: vec!["0".to_string(), "1".to_string()],
            actions: vec!["go".to_string(), "stay".to_string()],
            transition: vec![
                vec![vec![(1, p), (0, 1.0 - p)], vec![(0, 1.0)]],
                vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            ],
            goal_candidates: vec![1],
            noop: Some(1),
        }
    }

    fn model(c: f64, horizon: usize) -> DecMdpCom {
        let n = 4;
        let mut terminal = vec![0.0; n];
        terminal[3] = 10.0;
        DecMdpCom {
            agents: [agent(0.7), agent(0.6)],
            rewards: Rewards {
                action_cost: [vec![-1.0, 0.0], vec![-1.0, 0.0]],
                joint: Default::default(),
                terminal: Some(terminal),
            },
            comm_cost: c,
            horizon,
            initial: FactoredState::new(0, 0),
            goal: GoalPredicate::None,
        }
    }

    #[test]
    fn communicate_everywhere_costs_one_exchange_per_step() {
        let mut m = model(-0.5, 4);
        m.rewards.terminal = None;
        let d = GeneralMechanism::communicate_everywhere(&m).unwrap();
        for t in 0..=4 {
            assert!((d.value(&m, 0, 1, t) - (4 - t) as f64 * -0.5 + if t == 4 { 0.0 } else { -0.5 }).abs() < 1e-12);
        }
    }

    #[test]
    fn values_are_monotone_and_options_valid() {
        let m = model(-0.3, 3);
        let r = msbpi(&m, None, &MsbpiConfig::default()).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].dominates(&w[0], 1e-12));
        }
        for t in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    let (o1, o2) = r.mechanism.pair(&m, a, b, t);
                    assert!(o1.tree().is_option(3 - t) && o2.tree().is_option(3 - t));
                }
            }
        }
        let last = r.iterations.last().unwrap();
        assert_eq!(last.improved_cells, 0);
    }

    #[test]
    fn optimal_initial_policy_is_kept() {
        // nothing to gain: no terminal reward, every action costs
        let mut m = model(0.0, 2);
        m.rewards.terminal = None;
        let d = GeneralMechanism::communicate_everywhere(&m).unwrap();
        let (imp, _) = improve_state(&FactoredState::at(0, 0, 0), 0, &d.values, &m, &MsbpiConfig::default()).unwrap();
        assert_eq!(imp, Improvement::None);
    }

    #[test]
    fn budget_is_enforced() {
        let m = model(-0.3, 3);
        let d = GeneralMechanism::communicate_everywhere(&m).unwrap();
        let cfg = MsbpiConfig { node_budget: 3, ..Default::default() };
        let err = improve_state(&FactoredState::at(0, 0, 0), 0, &d.values, &m, &cfg).unwrap_err();
        assert_eq!(err, Error::NodeBudget { budget: 3 });
    }
}
