//! Two machines: one makes boxes, the other cereal bags, each of type a or b.
//! A product is a box filled with the matching cereal; only products count
//! at the horizon.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lgo::{BoxedBehavior, LgoProblem, LocalBehavior};
use crate::model::{Action, AgentModel, DecMdpCom, FactoredState, GoalPredicate, Local, Rewards};

pub const MAKE_A: Action = 0;
pub const MAKE_B: Action = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductionState {
    pub ba: usize,
    pub bb: usize,
    pub ca: usize,
    pub cb: usize,
}

impl ProductionState {
    pub const fn new(ba: usize, bb: usize, ca: usize, cb: usize) -> Self {
        ProductionState { ba, bb, ca, cb }
    }

    pub fn products(&self) -> usize {
        self.ba.min(self.ca) + self.bb.min(self.cb)
    }
}

/// Cyclic quota: `xa` items of type a, then `xb` of type b, repeated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductionOption {
    pub xa: usize,
    pub xb: usize,
}

impl ProductionOption {
    pub const fn new(xa: usize, xb: usize) -> Self {
        ProductionOption { xa, xb }
    }

    /// Item type to attempt after `made` successful items.
    pub fn next_item(&self, made: usize) -> Action {
        let cycle = self.xa + self.xb;
        if made % cycle < self.xa {
            MAKE_A
        } else {
            MAKE_B
        }
    }
}

pub const DEFAULT_OPTIONS: [ProductionOption; 7] = [
    ProductionOption::new(0, 1),
    ProductionOption::new(1, 4),
    ProductionOption::new(2, 3),
    ProductionOption::new(1, 1),
    ProductionOption::new(3, 2),
    ProductionOption::new(4, 1),
    ProductionOption::new(1, 0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionConfig {
    pub p1: f64,
    pub p2: f64,
    pub horizon: usize,
    pub comm_cost: f64,
    /// Cost each machine pays per step.
    pub action_cost: f64,
    pub initial: ProductionState,
    pub options: Vec<ProductionOption>,
}

impl ProductionConfig {
    /// Horizon 10, 8 type-b bags in stock, the seven default options.
    pub fn standard(p1: f64, p2: f64, comm_cost: f64) -> Self {
        ProductionConfig {
            p1,
            p2,
            horizon: 10,
            comm_cost,
            action_cost: -1.0,
            initial: ProductionState::new(0, 0, 0, 8),
            options: DEFAULT_OPTIONS.to_vec(),
        }
    }
}

/// The built model plus the bookkeeping to map local states to counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub config: ProductionConfig,
    pub model: DecMdpCom,
    /// Items made since the start, `(a, b)`, per local state of each machine.
    made: [Vec<(usize, usize)>; 2],
}

fn count_states(horizon: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..=horizon {
        for b in 0..=(horizon - a) {
            v.push((a, b));
        }
    }
    v
}

fn machine(name: &str, p: f64, made: &[(usize, usize)], horizon: usize, stock: (usize, usize)) -> AgentModel {
    let index = |a: usize, b: usize| made.iter().position(|&m| m == (a, b)).unwrap();
    let mut transition = Vec::with_capacity(made.len());
    for &(a, b) in made {
        let mut rows = Vec::with_capacity(2);
        for act in [MAKE_A, MAKE_B] {
            let here = index(a, b);
            if a + b == horizon || p <= 0.0 {
                rows.push(alloc::vec![(here, 1.0)]);
                continue;
            }
            let next = if act == MAKE_A { index(a + 1, b) } else { index(a, b + 1) };
            if p >= 1.0 {
                rows.push(alloc::vec![(next, 1.0)]);
            } else {
                rows.push(alloc::vec![(next, p), (here, 1.0 - p)]);
            }
        }
        transition.push(rows);
    }
    AgentModel {
        name: String::from(name),
        states: made.iter().map(|&(a, b)| format!("{}a{}b", a + stock.0, b + stock.1)).collect(),
        actions: alloc::vec![String::from("make_a"), String::from("make_b")],
        transition,
        goal_candidates: Vec::new(),
        noop: None,
    }
}

pub fn build_production(cfg: &ProductionConfig) -> Result<Production> {
    for p in [cfg.p1, cfg.p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Invalid(format!("success probability {} not in [0, 1]", p)));
        }
    }
    if cfg.horizon == 0 {
        return Err(Error::Invalid(String::from("horizon must be positive")));
    }
    if cfg.options.iter().any(|o| o.xa + o.xb == 0) {
        return Err(Error::Invalid(String::from("an option must produce something")));
    }
    let made = count_states(cfg.horizon);
    let init = cfg.initial;
    let m1 = machine("boxes", cfg.p1, &made, cfg.horizon, (init.ba, init.bb));
    let m2 = machine("cereal", cfg.p2, &made, cfg.horizon, (init.ca, init.cb));
    let n = made.len();
    let mut terminal = Vec::with_capacity(n * n);
    for &(ba, bb) in &made {
        for &(ca, cb) in &made {
            let s = ProductionState::new(ba + init.ba, bb + init.bb, ca + init.ca, cb + init.cb);
            terminal.push(s.products() as f64);
        }
    }
    let zero = made.iter().position(|&m| m == (0, 0)).unwrap();
    let model = DecMdpCom {
        agents: [m1, m2],
        rewards: Rewards {
            action_cost: [alloc::vec![cfg.action_cost; 2], alloc::vec![cfg.action_cost; 2]],
            joint: Default::default(),
            terminal: Some(terminal),
        },
        comm_cost: cfg.comm_cost,
        horizon: cfg.horizon,
        initial: FactoredState::new(zero, zero),
        goal: GoalPredicate::None,
    };
    Ok(Production { config: cfg.clone(), model, made: [made.clone(), made] })
}

impl Production {
    pub fn state(&self, s1: Local, s2: Local) -> ProductionState {
        let (ba, bb) = self.made[0][s1];
        let (ca, cb) = self.made[1][s2];
        let i = self.config.initial;
        ProductionState::new(ba + i.ba, bb + i.bb, ca + i.ca, cb + i.cb)
    }

    /// Local state of `machine` after making `a` and `b` items.
    pub fn local(&self, machine: usize, a: usize, b: usize) -> Option<Local> {
        self.made[machine].iter().position(|&m| m == (a, b))
    }

    pub fn made(&self, machine: usize, s: Local) -> (usize, usize) {
        self.made[machine][s]
    }

    /// Each listed option as a behaviour for both machines.
    pub fn lgo_problem(&self) -> LgoProblem<'_> {
        let mut behaviors: [Vec<BoxedBehavior<'_>>; 2] = [Vec::new(), Vec::new()];
        for (i, slot) in behaviors.iter_mut().enumerate() {
            for &o in &self.config.options {
                slot.push(Box::new(Cyclic { option: o, made: &self.made[i] }));
            }
        }
        LgoProblem { model: &self.model, behaviors, charge_final_exchange: false }
    }
}

/// Runs the quota cycle from the count at the last exchange.
struct Cyclic<'a> {
    option: ProductionOption,
    made: &'a [(usize, usize)],
}

impl LocalBehavior for Cyclic<'_> {
    fn action(&self, start: Local, current: Local, _elapsed: usize, _t: usize) -> Action {
        let (a0, b0) = self.made[start];
        let (a, b) = self.made[current];
        self.option.next_item((a + b) - (a0 + b0))
    }

    fn label(&self) -> String {
        format!("({},{})", self.option.xa, self.option.xb)
    }
}
