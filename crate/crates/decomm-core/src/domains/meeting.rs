//! Two agents on a grid trying to meet as early as possible.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::Strategy;
use crate::error::{Error, Result};
use crate::model::{Action, AgentModel, DecMdpCom, FactoredState, GoalPredicate, Local, Rewards};
use crate::myopic::SyncPolicy;

pub const NORTH: Action = 0;
pub const SOUTH: Action = 1;
pub const EAST: Action = 2;
pub const WEST: Action = 3;
pub const STAY: Action = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub p1: f64,
    pub p2: f64,
    pub start1: (usize, usize),
    pub start2: (usize, usize),
    /// Cost each agent pays per step until the agents meet.
    pub action_cost: f64,
    pub comm_cost: f64,
    pub horizon_cap: usize,
}

impl GridConfig {
    /// 10x10 grid with the agents in opposite corners.
    pub fn corners(p: f64, comm_cost: f64) -> Self {
        GridConfig {
            width: 10,
            height: 10,
            p1: p,
            p2: p,
            start1: (0, 0),
            start2: (9, 9),
            action_cost: -1.0,
            comm_cost,
            horizon_cap: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid(String::from("grid must be non-empty")));
        }
        for (x, y) in [self.start1, self.start2] {
            if x >= self.width || y >= self.height {
                return Err(Error::Invalid(format!("start ({}, {}) is off the grid", x, y)));
            }
        }
        for p in [self.p1, self.p2] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Invalid(format!("success probability {} not in (0, 1]", p)));
            }
        }
        if self.horizon_cap == 0 {
            return Err(Error::Invalid(String::from("horizon cap must be positive")));
        }
        Ok(())
    }

    pub fn cell(&self, x: usize, y: usize) -> Local {
        y * self.width + x
    }

    pub fn coords(&self, c: Local) -> (usize, usize) {
        (c % self.width, c / self.width)
    }

    pub fn distance(&self, a: Local, b: Local) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    /// One step from `from` toward `to` along x first, then y.
    pub fn step_toward(&self, from: Local, to: Local) -> Action {
        let (fx, fy) = self.coords(from);
        let (tx, ty) = self.coords(to);
        if fx < tx {
            EAST
        } else if fx > tx {
            WEST
        } else if fy < ty {
            NORTH
        } else if fy > ty {
            SOUTH
        } else {
            STAY
        }
    }

    /// Cell reached by action `a` when it succeeds; moves off the grid stay.
    pub fn target(&self, c: Local, a: Action) -> Local {
        let (x, y) = self.coords(c);
        match a {
            NORTH if y + 1 < self.height => self.cell(x, y + 1),
            SOUTH if y > 0 => self.cell(x, y - 1),
            EAST if x + 1 < self.width => self.cell(x + 1, y),
            WEST if x > 0 => self.cell(x - 1, y),
            _ => c,
        }
    }

    /// Meeting point on the x-then-y shortest path from `a` to `b`,
    /// `floor(d/2)` steps from `a`.
    pub fn midpoint(&self, a: Local, b: Local) -> Local {
        let half = self.distance(a, b) / 2;
        let mut c = a;
        for _ in 0..half {
            c = self.target(c, self.step_toward(c, b));
        }
        c
    }
}

fn grid_agent(cfg: &GridConfig, name: &str, p: f64) -> AgentModel {
    let n = cfg.width * cfg.height;
    let mut transition = Vec::with_capacity(n);
    for c in 0..n {
        let mut rows = Vec::with_capacity(5);
        for a in 0..5 {
            let to = cfg.target(c, a);
            if to == c || p >= 1.0 {
                rows.push(alloc::vec![(to, 1.0)]);
            } else {
                rows.push(alloc::vec![(to, p), (c, 1.0 - p)]);
            }
        }
        transition.push(rows);
    }
    AgentModel {
        name: String::from(name),
        states: (0..n)
            .map(|c| {
                let (x, y) = cfg.coords(c);
                format!("{}_{}", x, y)
            })
            .collect(),
        actions: ["north", "south", "east", "west", "stay"].iter().map(|s| String::from(*s)).collect(),
        transition,
        goal_candidates: (0..n).collect(),
        noop: Some(STAY),
    }
}

/// The grid as a two-agent model: five actions each, co-location is the goal.
pub fn build_meeting(cfg: &GridConfig) -> Result<DecMdpCom> {
    cfg.validate()?;
    let a1 = grid_agent(cfg, "agent1", cfg.p1);
    let a2 = grid_agent(cfg, "agent2", cfg.p2);
    Ok(DecMdpCom {
        agents: [a1, a2],
        rewards: Rewards::additive(alloc::vec![cfg.action_cost; 5], alloc::vec![cfg.action_cost; 5]),
        comm_cost: cfg.comm_cost,
        horizon: cfg.horizon_cap,
        initial: FactoredState::new(cfg.cell(cfg.start1.0, cfg.start1.1), cfg.cell(cfg.start2.0, cfg.start2.1)),
        goal: GoalPredicate::CoLocated,
    })
}

/// Both agents walk to the meeting point of the last synchronised positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeetingPolicy {
    pub grid: GridConfig,
}

impl MeetingPolicy {
    pub fn goals(&self, sync: &FactoredState) -> (Local, Local) {
        let mid = self.grid.midpoint(sync.s1, sync.s2);
        (mid, mid)
    }
}

impl SyncPolicy for MeetingPolicy {
    fn action(&self, _agent: usize, sync: &FactoredState, local: Local, _t: usize) -> Action {
        let mid = self.grid.midpoint(sync.s1, sync.s2);
        self.grid.step_toward(local, mid)
    }
}

/// Radius of the exchange region for synchronised distance `d`.
pub fn subgoal_radius(d: usize, p: f64) -> usize {
    // the nudge keeps products like 0.6 * 10 / 2 from rounding down
    (p * d as f64 / 2.0 + 1e-9) as usize
}

pub fn subgoal_strategy(cfg: &GridConfig, p: f64) -> Result<Strategy> {
    cfg.validate()?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Invalid(format!("sub-goal fraction {} not in (0, 1]", p)));
    }
    Ok(Strategy::SubGoals(p))
}
