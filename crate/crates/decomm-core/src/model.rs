//! The two-agent model: local processes with independent transitions, joint
//! rewards, exchange cost and horizon.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type Local = usize;
pub type Action = usize;

/// Tolerance used when checking that rows are stochastic.
pub const ROW_TOL: f64 = 1e-9;

/// One agent's local process. Observations are the local states themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    /// `transition[s][a]` is the sparse row of `P_i(. | s, a)`.
    pub transition: Vec<Vec<Vec<(Local, f64)>>>,
    pub goal_candidates: Vec<Local>,
    /// Zero-cost action used once a local goal has been reached.
    pub noop: Option<Action>,
}

impl AgentModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn row(&self, s: Local, a: Action) -> &[(Local, f64)] {
        &self.transition[s][a]
    }

    pub fn prob(&self, s: Local, a: Action, next: Local) -> f64 {
        self.transition[s][a]
            .iter()
            .filter(|(n, _)| *n == next)
            .map(|(_, p)| *p)
            .sum()
    }

    /// Dense copy of a transition row.
    pub fn dense_row(&self, s: Local, a: Action) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.num_states()];
        for &(n, p) in self.row(s, a) {
            out[n] += p;
        }
        out
    }

    pub fn state_index(&self, name: &str) -> Option<Local> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<Action> {
        self.actions.iter().position(|s| s == name)
    }
}

/// A global state, optionally time stamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactoredState {
    pub s1: Local,
    pub s2: Local,
    pub t: Option<usize>,
}

impl FactoredState {
    pub const fn new(s1: Local, s2: Local) -> Self {
        FactoredState { s1, s2, t: None }
    }

    pub const fn at(s1: Local, s2: Local, t: usize) -> Self {
        FactoredState { s1, s2, t: Some(t) }
    }

    pub fn local(&self, agent: usize) -> Local {
        if agent == 0 {
            self.s1
        } else {
            self.s2
        }
    }
}

/// Key of an entry in the sparse joint reward table. `None` stands for the
/// communication act (no domain action executed that step).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointKey {
    pub s1: Local,
    pub s2: Local,
    pub a1: Option<Action>,
    pub a2: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rewards {
    /// Per-agent cost (a non-positive reward) of each domain action.
    pub action_cost: [Vec<f64>; 2],
    /// Rewards on top of the action costs, default 0.
    pub joint: BTreeMap<JointKey, f64>,
    /// Reward collected at the horizon, indexed by global state index.
    pub terminal: Option<Vec<f64>>,
}

impl Rewards {
    pub fn additive(cost1: Vec<f64>, cost2: Vec<f64>) -> Self {
        Rewards {
            action_cost: [cost1, cost2],
            joint: BTreeMap::new(),
            terminal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum GoalPredicate {
    #[default]
    None,
    /// Both agents occupy the same local state index.
    CoLocated,
    States(Vec<(Local, Local)>),
}

impl GoalPredicate {
    pub fn is_goal(&self, s1: Local, s2: Local) -> bool {
        match self {
            GoalPredicate::None => false,
            GoalPredicate::CoLocated => s1 == s2,
            GoalPredicate::States(v) => v.contains(&(s1, s2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecMdpCom {
    pub agents: [AgentModel; 2],
    pub rewards: Rewards,
    /// Cost of one joint exchange (non-positive).
    pub comm_cost: f64,
    pub horizon: usize,
    pub initial: FactoredState,
    pub goal: GoalPredicate,
}

impl DecMdpCom {
    pub fn agent(&self, i: usize) -> &AgentModel {
        &self.agents[i]
    }

    pub fn num_global(&self) -> usize {
        self.agents[0].num_states() * self.agents[1].num_states()
    }

    pub fn index(&self, s1: Local, s2: Local) -> usize {
        s1 * self.agents[1].num_states() + s2
    }

    pub fn unindex(&self, idx: usize) -> (Local, Local) {
        let n2 = self.agents[1].num_states();
        (idx / n2, idx % n2)
    }

    pub fn is_goal(&self, s1: Local, s2: Local) -> bool {
        self.goal.is_goal(s1, s2)
    }

    /// Reward of one joint step. `None` marks an agent that communicated.
    pub fn step_reward(&self, s1: Local, s2: Local, a1: Option<Action>, a2: Option<Action>) -> f64 {
        let r = &self.rewards;
        let mut v = 0.0;
        if let Some(a) = a1 {
            v += r.action_cost[0].get(a).copied().unwrap_or(0.0);
        }
        if let Some(a) = a2 {
            v += r.action_cost[1].get(a).copied().unwrap_or(0.0);
        }
        if !r.joint.is_empty() {
            v += r.joint.get(&JointKey { s1, s2, a1, a2 }).copied().unwrap_or(0.0);
        }
        v
    }

    pub fn terminal_reward(&self, s1: Local, s2: Local) -> f64 {
        match &self.rewards.terminal {
            Some(t) => t[self.index(s1, s2)],
            None => 0.0,
        }
    }

    fn check_state(&self, agent: usize, s: Local) -> Result<()> {
        if s < self.agents[agent].num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState { agent, index: s })
        }
    }

    fn check_action(&self, agent: usize, a: Action) -> Result<()> {
        if a < self.agents[agent].num_actions() {
            Ok(())
        } else {
            Err(Error::InvalidAction { agent, index: a })
        }
    }

    pub fn check_global(&self, s: &FactoredState) -> Result<()> {
        self.check_state(0, s.s1)?;
        self.check_state(1, s.s2)?;
        match s.t {
            Some(t) if t > self.horizon => Err(Error::InvalidSteps { t, n: 0, horizon: self.horizon }),
            _ => Ok(()),
        }
    }

    /// `P1(s'1 | s1, a1) * P2(s'2 | s2, a2)`.
    pub fn joint_transition_prob(
        &self,
        s: &FactoredState,
        a1: Action,
        a2: Action,
        next: &FactoredState,
    ) -> Result<f64> {
        self.check_global(s)?;
        self.check_global(next)?;
        self.check_action(0, a1)?;
        self.check_action(1, a2)?;
        Ok(self.agents[0].prob(s.s1, a1, next.s1) * self.agents[1].prob(s.s2, a2, next.s2))
    }

    /// Structural checks. Unreachable goals are reported as warnings.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(Violation::ZeroHorizon);
        }
        if !(self.comm_cost <= 0.0) {
            out.push(Violation::PositiveCommCost(self.comm_cost));
        }
        for (i, ag) in self.agents.iter().enumerate() {
            if ag.transition.len() != ag.num_states() {
                out.push(Violation::Shape { agent: i });
                continue;
            }
            for (s, rows) in ag.transition.iter().enumerate() {
                if rows.len() != ag.num_actions() {
                    out.push(Violation::Shape { agent: i });
                    continue;
                }
                for (a, row) in rows.iter().enumerate() {
                    let mut sum = 0.0;
                    for &(n, p) in row {
                        if n >= ag.num_states() {
                            out.push(Violation::SuccessorOutOfRange { agent: i, state: s, action: a, next: n });
                        }
                        if !(0.0..=1.0).contains(&p) {
                            out.push(Violation::BadProbability { agent: i, state: s, action: a, prob: p });
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > ROW_TOL {
                        out.push(Violation::RowSum { agent: i, state: s, action: a, sum });
                    }
                }
            }
            for &g in &ag.goal_candidates {
                if g >= ag.num_states() {
                    out.push(Violation::GoalOutOfRange { agent: i, index: g });
                }
            }
            if let Some(a) = ag.noop {
                if a >= ag.num_actions() {
                    out.push(Violation::NoopOutOfRange { agent: i, index: a });
                }
            }
            if self.rewards.action_cost[i].len() != ag.num_actions() {
                out.push(Violation::CostShape { agent: i });
            }
        }
        if self.check_global(&self.initial).is_err() {
            out.push(Violation::InitialOutOfRange);
        }
        if let Some(t) = &self.rewards.terminal {
            if t.len() != self.num_global() {
                out.push(Violation::TerminalShape);
            }
        }
        if out.is_empty() && self.goal != GoalPredicate::None && !self.goal_reachable() {
            out.push(Violation::GoalUnreachable);
        }
        out
    }

    /// Whether some global goal can be reached from the initial state within
    /// the horizon, ignoring probabilities.
    fn goal_reachable(&self) -> bool {
        let n = self.num_global();
        let mut cur = alloc::vec![false; n];
        cur[self.index(self.initial.s1, self.initial.s2)] = true;
        for step in 0..=self.horizon {
            for (idx, &on) in cur.iter().enumerate() {
                if on {
                    let (a, b) = self.unindex(idx);
                    if self.is_goal(a, b) {
                        return true;
                    }
                }
            }
            if step == self.horizon {
                break;
            }
            let mut nxt = alloc::vec![false; n];
            for (idx, &on) in cur.iter().enumerate() {
                if !on {
                    continue;
                }
                let (a, b) = self.unindex(idx);
                let r1 = support(&self.agents[0], a);
                let r2 = support(&self.agents[1], b);
                for &x in &r1 {
                    for &y in &r2 {
                        nxt[self.index(x, y)] = true;
                    }
                }
            }
            cur = nxt;
        }
        false
    }
}

fn support(agent: &AgentModel, s: Local) -> Vec<Local> {
    let mut v: Vec<Local> = agent.transition[s]
        .iter()
        .flat_map(|row| row.iter().filter(|(_, p)| *p > 0.0).map(|(n, _)| *n))
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroHorizon,
    PositiveCommCost(f64),
    Shape { agent: usize },
    CostShape { agent: usize },
    RowSum { agent: usize, state: Local, action: Action, sum: f64 },
    BadProbability { agent: usize, state: Local, action: Action, prob: f64 },
    SuccessorOutOfRange { agent: usize, state: Local, action: Action, next: Local },
    GoalOutOfRange { agent: usize, index: Local },
    NoopOutOfRange { agent: usize, index: Action },
    InitialOutOfRange,
    TerminalShape,
    /// Warning: no global goal is reachable from the initial state in time.
    GoalUnreachable,
}

impl Violation {
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::GoalUnreachable)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroHorizon => write!(f, "horizon must be at least 1"),
            Violation::PositiveCommCost(c) => write!(f, "communication cost {} is positive", c),
            Violation::Shape { agent } => write!(f, "agent {}: transition table has the wrong shape", agent + 1),
            Violation::CostShape { agent } => write!(f, "agent {}: one action cost per action expected", agent + 1),
            Violation::RowSum { agent, state, action, sum } => write!(
                f,
                "agent {}: row for state {} action {} sums to {}",
                agent + 1, state, action, sum
            ),
            Violation::BadProbability { agent, state, action, prob } => write!(
                f,
                "agent {}: state {} action {} has probability {} outside [0,1]",
                agent + 1, state, action, prob
            ),
            Violation::SuccessorOutOfRange { agent, state, action, next } => write!(
                f,
                "agent {}: state {} action {} leads to unknown state {}",
                agent + 1, state, action, next
            ),
            Violation::GoalOutOfRange { agent, index } => {
                write!(f, "agent {}: goal candidate {} is not a state", agent + 1, index)
            }
            Violation::NoopOutOfRange { agent, index } => {
                write!(f, "agent {}: no-op {} is not an action", agent + 1, index)
            }
            Violation::InitialOutOfRange => write!(f, "initial state is out of range"),
            Violation::TerminalShape => write!(f, "terminal reward table has the wrong length"),
            Violation::GoalUnreachable => write!(f, "warning: no global goal reachable within the horizon"),
        }
    }
}
