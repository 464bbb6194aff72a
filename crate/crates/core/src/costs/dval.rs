use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DvalApproach {
    /// `w_o = 1`, `w_1` absorbs the variation.
    FixedWo,
    /// Both weights from consecutive path nodes.
    Paired,
}

/// One branch on the path to an incumbent: the node at `depth` with
/// objective `node_obj`, branched to a child with objective `child_obj`
/// whose fractional set carries `min_cost` in total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub depth: usize,
    pub node_obj: f64,
    pub child_obj: f64,
    pub min_cost: f64,
}

impl PathStep {
    pub fn delta(&self) -> f64 {
        self.child_obj - self.node_obj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvalWeights {
    pub wo: f64,
    pub w1: f64,
}

impl DvalWeights {
    pub const DEFAULT: DvalWeights = DvalWeights { wo: 1.0, w1: 1.0 };

    pub fn apply(&self, delta: f64, min_cost: f64) -> f64 {
        self.wo * delta + self.w1 * min_cost
    }
}

/// `w(d) = (x_o* - x_o) / Eval`, the single-weight form.
pub fn single_weight(x_star: f64, node_obj: f64, eval: f64) -> f64 {
    (x_star - node_obj) / eval
}

/// `w_1 = (x_o* - x_oj) / sum MinCost`, zero when the child already
/// reaches the incumbent value.
pub fn fixed_wo_w1(x_star: f64, child_obj: f64, min_cost: f64) -> f64 {
    let num = x_star - child_obj;
    if num == 0.0 || min_cost == 0.0 {
        0.0
    } else {
        num / min_cost
    }
}

/// Solve `[a1 b1; a2 b2] w = c`; `None` when singular.
pub fn solve_2x2(a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, c2: f64) -> Option<(f64, f64)> {
    let det = a1 * b2 - a2 * b1;
    let scale = a1.abs().max(b1.abs()).max(a2.abs()).max(b2.abs()).max(1.0);
    if det.abs() <= 1e-12 * scale * scale {
        return None;
    }
    Some(((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det))
}

/// Weights for depths `1..=d*-2` of one incumbent path. `path[d]` is the
/// step leaving depth `d`; the incumbent sits at depth `path.len()`.
pub fn calibrate(
    path: &[PathStep],
    x_star: f64,
    approach: DvalApproach,
) -> BTreeMap<usize, DvalWeights> {
    let d_star = path.len();
    let mut out = BTreeMap::new();
    if d_star <= 2 {
        return out;
    }
    for d in 1..=d_star - 2 {
        let s = path[d];
        let one = DvalWeights {
            wo: 1.0,
            w1: fixed_wo_w1(x_star, s.child_obj, s.min_cost),
        };
        let w = match approach {
            DvalApproach::FixedWo => one,
            DvalApproach::Paired => {
                let t = path[d + 1];
                solve_2x2(
                    s.delta(),
                    s.min_cost,
                    x_star - s.node_obj,
                    t.delta(),
                    t.min_cost,
                    x_star - t.node_obj,
                )
                .map_or(one, |(wo, w1)| DvalWeights { wo, w1 })
            }
        };
        out.insert(d, w);
    }
    out
}

/// Working weights averaged over every incumbent seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvalTables {
    pub approach: DvalApproach,
    /// One calibration per incumbent; empty maps stand for the default.
    pub runs: Vec<BTreeMap<usize, DvalWeights>>,
}

impl DvalTables {
    pub fn new(approach: DvalApproach) -> Self {
        DvalTables {
            approach,
            runs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &[PathStep], x_star: f64) -> BTreeMap<usize, DvalWeights> {
        let w = calibrate(path, x_star, self.approach);
        self.runs.push(w.clone());
        w
    }

    /// Weights at `depth` for one calibration, extended past its range
    /// with the deepest entry and clamped below with the shallowest.
    fn at(run: &BTreeMap<usize, DvalWeights>, depth: usize) -> DvalWeights {
        if run.is_empty() {
            return DvalWeights::DEFAULT;
        }
        run.range(..=depth)
            .next_back()
            .or_else(|| run.iter().next())
            .map_or(DvalWeights::DEFAULT, |(_, w)| *w)
    }

    pub fn weights(&self, depth: usize) -> DvalWeights {
        if self.runs.is_empty() {
            return DvalWeights::DEFAULT;
        }
        let n = self.runs.len() as f64;
        let (wo, w1) = self
            .runs
            .iter()
            .map(|r| Self::at(r, depth))
            .fold((0.0, 0.0), |(a, b), w| (a + w.wo, b + w.w1));
        DvalWeights {
            wo: wo / n,
            w1: w1 / n,
        }
    }

    /// Score of an open node created by a branch taken at depth `depth`.
    pub fn dval(&self, depth: usize, delta: f64, min_cost: f64) -> f64 {
        self.weights(depth).apply(delta, min_cost)
    }
}
