//! MIP problems, node bound state and incumbent bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{LpError, SolveError};
use crate::lp::{fractional_parts, Direction, LpModel, LpSolution, INT_TOL};

/// Immutable mixed-integer problem: an LP plus integrality flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipProblem {
    pub name: String,
    pub lp: LpModel,
    pub integer: Vec<bool>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    pub objective_name: String,
    /// Constant added to every reported objective value.
    pub objective_offset: f64,
}

impl MipProblem {
    /// Build a problem with generated names. Bounds of integer columns are
    /// tightened to the nearest integers inside them.
    pub fn new(lp: LpModel, integer: Vec<bool>) -> Result<Self, LpError> {
        let n = lp.num_cols();
        let m = lp.num_rows();
        Self::with_names(
            "PROBLEM".into(),
            lp,
            integer,
            (0..n).map(|k| format!("x{k}")).collect(),
            (0..m).map(|i| format!("r{i}")).collect(),
            "obj".into(),
            0.0,
        )
    }

    pub fn with_names(
        name: String,
        mut lp: LpModel,
        integer: Vec<bool>,
        col_names: Vec<String>,
        row_names: Vec<String>,
        objective_name: String,
        objective_offset: f64,
    ) -> Result<Self, LpError> {
        if integer.len() != lp.num_cols() || col_names.len() != lp.num_cols() {
            return Err(LpError::Dimension(
                "integrality flags or names do not match column count".into(),
            ));
        }
        if row_names.len() != lp.num_rows() {
            return Err(LpError::Dimension(
                "row names do not match row count".into(),
            ));
        }
        for k in 0..lp.num_cols() {
            if integer[k] {
                let lo = tighten_lower(lp.lower()[k]);
                let hi = tighten_upper(lp.upper()[k]);
                lp.set_bounds(k, lo, hi)?;
            }
        }
        Ok(MipProblem {
            name,
            lp,
            integer,
            col_names,
            row_names,
            objective_name,
            objective_offset,
        })
    }

    pub fn num_cols(&self) -> usize {
        self.lp.num_cols()
    }

    pub fn integer_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_cols()).filter(|&k| self.integer[k])
    }

    pub fn is_binary(&self, k: usize) -> bool {
        self.integer[k] && self.lp.lower()[k] >= 0.0 && self.lp.upper()[k] <= 1.0
    }

    /// Whether `x` satisfies rows, bounds and integrality within tolerance.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        let lp = &self.lp;
        if x.len() != lp.num_cols() {
            return false;
        }
        let bounds_ok = (0..lp.num_cols())
            .all(|k| x[k] >= lp.lower()[k] - 1e-7 && x[k] <= lp.upper()[k] + 1e-7);
        let ints_ok = self
            .integer_columns()
            .all(|k| (x[k] - x[k].round()).abs() <= INT_TOL);
        let rows_ok = (0..lp.num_rows())
            .all(|i| lp.activity(i, x) >= lp.rhs()[i] - 1e-7 * (1.0 + lp.rhs()[i].abs()));
        bounds_ok && ints_ok && rows_ok
    }
}

fn tighten_lower(v: f64) -> f64 {
    if v.is_finite() {
        (v - INT_TOL).ceil()
    } else {
        v
    }
}

fn tighten_upper(v: f64) -> f64 {
    if v.is_finite() {
        (v + INT_TOL).floor()
    } else {
        v
    }
}

/// One fractional integer variable at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractional {
    pub var: usize,
    pub value: f64,
    /// `ceil(x) - x`
    pub f_plus: f64,
    /// `x - floor(x)`
    pub f_minus: f64,
}

impl Fractional {
    pub fn part(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Up => self.f_plus,
            Direction::Down => self.f_minus,
        }
    }

    /// `min(f_plus, f_minus)`
    pub fn min_part(&self) -> f64 {
        self.f_plus.min(self.f_minus)
    }
}

/// Integer variables of `problem` whose values in `sol` are fractional.
pub fn detect_fractional(sol: &LpSolution, problem: &MipProblem) -> Vec<Fractional> {
    fractional_of(&sol.x, problem)
}

pub fn fractional_of(x: &[f64], problem: &MipProblem) -> Vec<Fractional> {
    problem
        .integer_columns()
        .filter_map(|j| {
            fractional_parts(x[j]).map(|(f_plus, f_minus)| Fractional {
                var: j,
                value: x[j],
                f_plus,
                f_minus,
            })
        })
        .collect()
}

/// A bound imposed on one variable, by an explicit branch or as an implied
/// (compulsory) restriction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChange {
    pub var: usize,
    pub dir: Direction,
    /// New lower bound for `Up`, new upper bound for `Down`.
    pub bound: f64,
    pub compulsory: bool,
    /// Branch on the derivative variable of `var`; `bound` then holds the
    /// right-hand side of the appended row and `apply` is a no-op.
    #[serde(default)]
    pub straddle: bool,
}

impl BoundChange {
    pub fn branch(var: usize, dir: Direction, value: f64) -> Self {
        let bound = match dir {
            Direction::Up => value.ceil(),
            Direction::Down => value.floor(),
        };
        BoundChange {
            var,
            dir,
            bound,
            compulsory: false,
            straddle: false,
        }
    }

    pub fn apply(&self, lower: &mut [f64], upper: &mut [f64]) {
        if self.straddle {
            return;
        }
        match self.dir {
            Direction::Up => lower[self.var] = lower[self.var].max(self.bound),
            Direction::Down => upper[self.var] = upper[self.var].min(self.bound),
        }
    }
}

/// One branch-and-bound or look-ahead node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: Option<BoundChange>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Compulsory branches absorbed into this node.
    pub implied: Vec<BoundChange>,
    pub solution: Option<LpSolution>,
    pub fractional: Vec<Fractional>,
}

impl NodeState {
    pub fn root(problem: &MipProblem) -> Self {
        NodeState {
            id: 0,
            parent: None,
            depth: 0,
            branch: None,
            lower: problem.lp.lower().to_vec(),
            upper: problem.lp.upper().to_vec(),
            implied: Vec::new(),
            solution: None,
            fractional: Vec::new(),
        }
    }

    /// Child created by `change`, without an LP solution yet.
    pub fn child(&self, id: usize, change: BoundChange) -> Self {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        change.apply(&mut lower, &mut upper);
        NodeState {
            id,
            parent: Some(self.id),
            depth: self.depth + 1,
            branch: Some(change),
            lower,
            upper,
            implied: Vec::new(),
            solution: None,
            fractional: Vec::new(),
        }
    }

    pub fn bounds_consistent(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u)
    }

    /// The problem's LP with this node's bounds.
    pub fn lp_model(&self, problem: &MipProblem) -> Result<LpModel, LpError> {
        let mut lp = problem.lp.clone();
        for k in 0..lp.num_cols() {
            lp.set_bounds(k, self.lower[k], self.upper[k])?;
        }
        Ok(lp)
    }

    pub fn objective(&self) -> f64 {
        self.solution
            .as_ref()
            .map_or(f64::INFINITY, |s| s.objective)
    }
}

/// Best MIP-feasible solution found so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub x: Option<Vec<f64>>,
    /// `x_o*`, `+inf` before the first solution.
    pub objective: f64,
    pub epsilon: f64,
    /// Depth of the node that produced the incumbent.
    pub depth: Option<usize>,
}

/// Nodes whose bound is at least `threshold` must be pruned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSignal {
    pub threshold: f64,
}

impl Incumbent {
    pub fn new(epsilon: f64) -> Self {
        Incumbent {
            x: None,
            objective: f64::INFINITY,
            epsilon,
            depth: None,
        }
    }

    pub fn exists(&self) -> bool {
        self.x.is_some()
    }

    /// LP objective cutoff `x_o* - eps`, if an incumbent exists.
    pub fn cutoff(&self) -> Option<f64> {
        self.x.as_ref().map(|_| self.objective - self.epsilon)
    }

    /// Whether a node bound can no longer improve on the incumbent.
    pub fn prunes(&self, bound: f64) -> bool {
        self.cutoff().is_some_and(|c| bound >= c)
    }
}

/// Offer `x` (objective `objective`, found at `depth`) to the incumbent.
/// Integer columns are rounded and the objective recomputed before the
/// comparison.
pub fn update_incumbent(
    incumbent: &mut Incumbent,
    problem: &MipProblem,
    x: &[f64],
    objective: f64,
    depth: usize,
) -> Result<Option<PruneSignal>, SolveError> {
    if !problem.is_feasible(x) {
        return Err(SolveError::Config(
            "candidate incumbent is not MIP feasible".into(),
        ));
    }
    // integer columns are stored exactly so the objective carries no LP noise
    let mut snapped = x.to_vec();
    for k in problem.integer_columns() {
        snapped[k] = snapped[k].round();
    }
    let objective = if problem.is_feasible(&snapped) {
        problem.lp.evaluate(&snapped)
    } else {
        snapped = x.to_vec();
        objective
    };
    if objective >= incumbent.objective {
        return Ok(None);
    }
    incumbent.x = Some(snapped);
    incumbent.objective = objective;
    incumbent.depth = Some(depth);
    Ok(Some(PruneSignal {
        threshold: objective - incumbent.epsilon,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve, PivotBudget};

    fn two_var() -> MipProblem {
        let lp = LpModel::new(
            vec![0.0, 0.0],
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            vec![2.0, -2.0, 3.4, -3.4],
            vec![0.0, 0.0],
            vec![10.0, 10.0],
        )
        .unwrap();
        MipProblem::new(lp, vec![true, true]).unwrap()
    }

    #[test]
    fn fractional_set() {
        let p = two_var();
        let sol = solve(&p.lp, None, &PivotBudget::default()).unwrap();
        let f = detect_fractional(&sol, &p);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].var, 1);
        assert!((f[0].f_plus - 0.6).abs() < 1e-9);
        assert!((f[0].f_minus - 0.4).abs() < 1e-9);
        assert!((f[0].f_plus + f[0].f_minus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrality_tolerance() {
        let p = two_var();
        assert!(fractional_of(&[2.0, 3.0], &p).is_empty());
        assert!(fractional_of(&[2.000_000_4, 3.0], &p).is_empty());
    }

    #[test]
    fn integer_bounds_tightened() {
        let lp = LpModel::new(vec![1.0], vec![], vec![], vec![0.5], vec![3.7]).unwrap();
        let p = MipProblem::new(lp, vec![true]).unwrap();
        assert_eq!(p.lp.lower()[0], 1.0);
        assert_eq!(p.lp.upper()[0], 3.0);
    }

    #[test]
    fn incumbent_updates() {
        let lp = LpModel::new(vec![1.0], vec![], vec![], vec![0.0], vec![20.0]).unwrap();
        let p = MipProblem::new(lp, vec![true]).unwrap();
        let mut inc = Incumbent::new(1e-6);
        inc.x = Some(vec![10.0]);
        inc.objective = 10.0;
        let sig = update_incumbent(&mut inc, &p, &[7.0], 7.0, 3)
            .unwrap()
            .unwrap();
        assert_eq!(inc.objective, 7.0);
        assert!((sig.threshold - (7.0 - 1e-6)).abs() < 1e-12);
        assert_eq!(inc.depth, Some(3));
        assert!(update_incumbent(&mut inc, &p, &[7.0], 7.0, 4)
            .unwrap()
            .is_none());
        assert!(update_incumbent(&mut inc, &p, &[6.5], 6.5, 4).is_err());
    }

    #[test]
    fn child_is_tighter() {
        let p = two_var();
        let root = NodeState::root(&p);
        let c = root.child(1, BoundChange::branch(1, Direction::Up, 3.4));
        assert_eq!(c.lower[1], 4.0);
        assert!(c.lower.iter().zip(&root.lower).all(|(a, b)| a >= b));
        let d = root.child(2, BoundChange::branch(0, Direction::Down, -0.6));
        assert_eq!(d.upper[0], -1.0);
    }
}
