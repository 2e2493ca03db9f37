use alloc::vec::Vec;

use crate::model::DecMdpCom;

/// `V(s, t)` for every global state index and `t in 0..=T`. Row `T` holds the
/// terminal rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    n: usize,
    horizon: usize,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn new(m: &DecMdpCom) -> Self {
        let n = m.num_global();
        let mut data = alloc::vec![0.0; n * (m.horizon + 1)];
        for idx in 0..n {
            let (a, b) = m.unindex(idx);
            data[m.horizon * n + idx] = m.terminal_reward(a, b);
        }
        ValueTable { n, horizon: m.horizon, data }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, idx: usize, t: usize) -> f64 {
        self.data[t * self.n + idx]
    }

    pub fn set(&mut self, idx: usize, t: usize, v: f64) {
        self.data[t * self.n + idx] = v;
    }

    /// Values at time `t` for all global states.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    /// Componentwise `self >= other - tol`.
    pub fn dominates(&self, other: &ValueTable, tol: f64) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| *a >= *b - tol)
    }
}
