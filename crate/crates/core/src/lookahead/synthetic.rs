//! An always-feasible oracle with pseudo-random objectives, and the
//! idealized path-correctness simulation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Candidate, Expansion, TreeOracle};
use crate::criteria::{BranchEval, CriterionId, CriterionSpec};
use crate::error::SolveError;
use crate::lp::Direction;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNode {
    pub path: Vec<(usize, Direction)>,
    pub objective: f64,
}

impl SyntheticNode {
    pub fn root() -> Self {
        SyntheticNode {
            path: Vec::new(),
            objective: 0.0,
        }
    }
}

/// Every node offers `width` candidates whose children are all feasible,
/// so tree sizes depend on the configuration alone.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    pub seed: u64,
    pub width: usize,
    pub num_vars: usize,
    pub spec: CriterionSpec,
    pub expansions: usize,
}

impl SyntheticOracle {
    pub fn new(seed: u64) -> Self {
        SyntheticOracle {
            seed,
            width: 3,
            num_vars: 64,
            spec: CriterionSpec::new(CriterionId::C2a),
            expansions: 0,
        }
    }

    fn rng_for(&self, path: &[(usize, Direction)]) -> ChaCha8Rng {
        let mut h = splitmix(self.seed);
        for &(v, d) in path {
            h = splitmix(h ^ (v as u64 * 2 + u64::from(d == Direction::Up)));
        }
        ChaCha8Rng::seed_from_u64(h)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl TreeOracle for SyntheticOracle {
    type Node = SyntheticNode;

    fn objective(&self, node: &SyntheticNode) -> f64 {
        node.objective
    }

    fn incumbent_objective(&self) -> f64 {
        f64::INFINITY
    }

    fn prunes(&self, _objective: f64) -> bool {
        false
    }

    fn expand(
        &mut self,
        node: &SyntheticNode,
        _depth: usize,
        excluded: &[usize],
    ) -> Result<Expansion<SyntheticNode>, SolveError> {
        self.expansions += 1;
        let mut rng = self.rng_for(&node.path);
        let mut pool: Vec<usize> = (0..self.num_vars)
            .filter(|v| !excluded.contains(v) && !node.path.iter().any(|(p, _)| p == v))
            .collect();
        if pool.is_empty() {
            return Ok(Expansion::Leaf);
        }
        pool.shuffle(&mut rng);
        pool.truncate(self.width.max(1));
        pool.sort_unstable();
        let mut evals = Vec::new();
        let mut kids = Vec::new();
        for &j in &pool {
            let up = rng.gen_range(0.1..1.0);
            let down = rng.gen_range(0.1..1.0);
            evals.push(BranchEval::from_values(j, up, down));
            let child = |dir, inc| {
                let mut path = node.path.clone();
                path.push((j, dir));
                SyntheticNode {
                    path,
                    objective: node.objective + inc,
                }
            };
            kids.push((child(Direction::Up, up), child(Direction::Down, down)));
        }
        let candidates = self
            .spec
            .rank(&evals)
            .into_iter()
            .map(|i| Candidate {
                var: evals[i].var,
                eval: evals[i].clone(),
                up: Some(kids[i].0.clone()),
                down: Some(kids[i].1.clone()),
            })
            .collect();
        Ok(Expansion::Branch {
            candidates,
            others: Vec::new(),
        })
    }
}

/// Fraction of simulated root-to-depth paths on which at least one node's
/// evaluation favours its correct branch, when each node does so
/// independently with probability `p`.
pub fn idealized_path_correctness(p: f64, depth: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        // walk one path, drawing each node's verdict as it is reached
        if (0..depth).any(|_| rng.gen_bool(p)) {
            hits += 1;
        }
    }
    hits as f64 / trials.max(1) as f64
}
