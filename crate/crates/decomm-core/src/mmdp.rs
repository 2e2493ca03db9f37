//! Centralised control with free per-step synchronisation: backward
//! induction over joint primitive actions.

use alloc::vec::Vec;

use crate::model::{Action, DecMdpCom};
use crate::value::ValueTable;

#[derive(Debug, Clone, PartialEq)]
pub struct MmdpSolution {
    pub values: ValueTable,
    /// `actions[t * |S| + s]`.
    pub actions: Vec<(Action, Action)>,
}

impl MmdpSolution {
    pub fn action(&self, m: &DecMdpCom, s1: usize, s2: usize, t: usize) -> (Action, Action) {
        self.actions[t * m.num_global() + m.index(s1, s2)]
    }
}

/// Ties go to the lowest `(a1, a2)`.
pub fn solve_mmdp(m: &DecMdpCom) -> MmdpSolution {
    let n = m.num_global();
    let mut values = ValueTable::new(m);
    let mut actions = alloc::vec![(0, 0); n * m.horizon];
    let (na1, na2) = (m.agents[0].num_actions(), m.agents[1].num_actions());
    for t in (0..m.horizon).rev() {
        for idx in 0..n {
            let (x, y) = m.unindex(idx);
            let mut best = f64::NEG_INFINITY;
            let mut arg = (0, 0);
            for a1 in 0..na1 {
                for a2 in 0..na2 {
                    let mut q = m.step_reward(x, y, Some(a1), Some(a2));
                    for &(x2, p1) in m.agents[0].row(x, a1) {
                        for &(y2, p2) in m.agents[1].row(y, a2) {
                            q += p1 * p2 * values.get(m.index(x2, y2), t + 1);
                        }
                    }
                    if q > best {
                        best = q;
                        arg = (a1, a2);
                    }
                }
            }
            values.set(idx, t, best);
            actions[t * n + idx] = arg;
        }
    }
    MmdpSolution { values, actions }
}
