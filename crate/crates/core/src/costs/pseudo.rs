use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lp::Direction;
use crate::model::Fractional;

fn slot(dir: Direction) -> usize {
    match dir {
        Direction::Up => 0,
        Direction::Down => 1,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoEntry {
    pub sum: [f64; 2],
    pub count: [u32; 2],
}

/// Running averages of unit costs per variable and direction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoCostTable {
    pub entries: BTreeMap<usize, PseudoEntry>,
}

impl PseudoCostTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one branch solve; infeasible solves carry no unit cost.
    pub fn update(&mut self, var: usize, dir: Direction, uc: f64, lp_feasible: bool) {
        if !lp_feasible || !uc.is_finite() {
            return;
        }
        let e = self.entries.entry(var).or_default();
        e.sum[slot(dir)] += uc;
        e.count[slot(dir)] += 1;
    }

    pub fn count(&self, var: usize, dir: Direction) -> u32 {
        self.entries.get(&var).map_or(0, |e| e.count[slot(dir)])
    }

    /// `PseudoC`, zero when nothing has been recorded.
    pub fn cost(&self, var: usize, dir: Direction) -> f64 {
        match self.entries.get(&var) {
            Some(e) if e.count[slot(dir)] > 0 => e.sum[slot(dir)] / f64::from(e.count[slot(dir)]),
            _ => 0.0,
        }
    }

    /// `PseudoEval = PseudoC * f`.
    pub fn eval(&self, var: usize, dir: Direction, f: f64) -> f64 {
        self.cost(var, dir) * f
    }

    /// Both estimates for a fractional variable, once each direction has
    /// at least `min_count` observations.
    pub fn estimate(&self, frac: &Fractional, min_count: u32) -> Option<(f64, f64)> {
        let ready = |d| self.count(frac.var, d) >= min_count.max(1);
        (ready(Direction::Up) && ready(Direction::Down)).then(|| {
            (
                self.eval(frac.var, Direction::Up, frac.f_plus),
                self.eval(frac.var, Direction::Down, frac.f_minus),
            )
        })
    }
}
