use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lp::Direction;
use crate::model::BoundChange;

/// Stands for "no reference solution moves this variable this way".
pub const LARGE: f64 = 1e30;

fn slot(dir: Direction) -> usize {
    match dir {
        Direction::Up => 0,
        Direction::Down => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `x_j^r - x_j` at the root, kept only for `j` in `necessary`.
    pub delta: BTreeMap<usize, f64>,
    pub necessary: BTreeSet<usize>,
    pub avg_cng: f64,
    /// `(GUC+, GUC-)` per variable in `necessary`; everything else is `LARGE`.
    pub guc: BTreeMap<usize, [f64; 2]>,
    /// `|x_j^r - x_j|` at the root for `j` in `necessary`.
    pub bd: BTreeMap<usize, f64>,
}

impl RefSolution {
    pub fn delta_of(&self, j: usize) -> f64 {
        self.delta.get(&j).copied().unwrap_or(0.0)
    }

    pub fn guc_of(&self, j: usize, dir: Direction) -> f64 {
        self.guc.get(&j).map_or(LARGE, |g| g[slot(dir)])
    }

    /// Total branching distance over the necessary variables.
    pub fn total_bd(&self) -> f64 {
        self.bd.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// High-quality solutions with the global costs derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub capacity: usize,
    /// Exponent in `GC = GUC / n^p`.
    pub p: f64,
    /// Normalize by `|x_o^r - x_o|` instead of `|x_o^r - x_o| / n(r)`.
    pub alt_normalization: bool,
    /// Weight of `MinBD` in the gate limit.
    pub theta: f64,
    pub root_x: Vec<f64>,
    pub root_objective: f64,
    pub solutions: Vec<RefSolution>,
}

impl ReferenceSet {
    pub fn new(root_x: Vec<f64>, root_objective: f64) -> Self {
        ReferenceSet {
            capacity: 10,
            p: 0.5,
            alt_normalization: false,
            theta: 0.5,
            root_x,
            root_objective,
            solutions: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Add a feasible solution reached through `path`. Returns `false` for
    /// a duplicate or when the set is full of better solutions.
    pub fn add(&mut self, x: &[f64], objective: f64, path: &[BoundChange]) -> bool {
        if self.solutions.iter().any(|s| s.x == x) {
            return false;
        }
        if self.solutions.len() >= self.capacity
            && self.solutions.iter().all(|s| s.objective <= objective)
        {
            return false;
        }
        let delta_at = |j: usize| x[j] - self.root_x[j];
        let necessary: BTreeSet<usize> = path
            .iter()
            .filter(|b| !b.compulsory)
            .map(|b| b.var)
            .filter(|&j| delta_at(j) != 0.0)
            .collect();
        let n = necessary.len();
        let change = (self.root_objective - objective).abs();
        let avg_cng = if self.alt_normalization || n == 0 {
            change
        } else {
            change / n as f64
        };
        let mut delta = BTreeMap::new();
        let mut guc = BTreeMap::new();
        let mut bd = BTreeMap::new();
        for &j in &necessary {
            let d = delta_at(j);
            delta.insert(j, d);
            bd.insert(j, d.abs());
            let g = avg_cng / d.abs();
            guc.insert(j, if d > 0.0 { [g, LARGE] } else { [LARGE, g] });
        }
        self.solutions.push(RefSolution {
            x: x.to_vec(),
            objective,
            delta,
            necessary,
            avg_cng,
            guc,
            bd,
        });
        self.solutions
            .sort_by(|a, b| a.objective.total_cmp(&b.objective));
        self.solutions.truncate(self.capacity);
        true
    }

    fn moving(&self, j: usize, dir: Direction) -> impl Iterator<Item = &RefSolution> {
        self.solutions.iter().filter(move |s| {
            let d = s.delta_of(j);
            match dir {
                Direction::Up => d > 0.0,
                Direction::Down => d < 0.0,
            }
        })
    }

    /// `n_j+` / `n_j-`
    pub fn count(&self, j: usize, dir: Direction) -> usize {
        self.moving(j, dir).count()
    }

    /// Composite `GUC`, the minimum over the set.
    pub fn guc(&self, j: usize, dir: Direction) -> f64 {
        self.solutions
            .iter()
            .map(|s| s.guc_of(j, dir))
            .fold(LARGE, f64::min)
    }

    /// `GC = GUC / n^p`; `LARGE` when no solution moves `j` this way.
    pub fn gc(&self, j: usize, dir: Direction) -> f64 {
        match self.count(j, dir) {
            0 => LARGE,
            n => self.guc(j, dir) / (n as f64).powf(self.p),
        }
    }

    pub fn bd_stats(&self, j: usize, dir: Direction) -> Option<BdStats> {
        let v: Vec<f64> = self
            .moving(j, dir)
            .filter_map(|s| s.bd.get(&j).copied())
            .collect();
        if v.is_empty() {
            return None;
        }
        Some(BdStats {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }

    /// Whether branching `j` in `dir` to `bound` stays within the rationed
    /// distance. Binary variables and unseen moves are always allowed.
    pub fn gate(&self, j: usize, dir: Direction, bound: f64, binary: bool) -> bool {
        if binary {
            return true;
        }
        let Some(st) = self.bd_stats(j, dir) else {
            return true;
        };
        let limit = self.theta * st.min + (1.0 - self.theta) * st.max;
        (bound - self.root_x[j]).abs() <= limit + 1e-9
    }
}
