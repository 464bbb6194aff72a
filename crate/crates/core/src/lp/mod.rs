//! Bounded-variable LP models and a dense dual simplex engine.
//!
//! Constraints are stored as `A x >= b`. Each row receives a surplus column
//! `s_i = a_i x - b_i >= 0`, so the initial slack basis is always available.

mod tableau;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::LpError;
pub(crate) use tableau::Tableau;
pub use tableau::{ARTIFICIAL_BOUND, FEAS_TOL};

/// Integrality tolerance used throughout the crate.
pub const INT_TOL: f64 = 1e-6;

/// Branch direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// `min c x  s.t.  A x >= b,  lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpModel {
    pub fn new(
        objective: Vec<f64>,
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} objective entries but {} lower / {} upper bounds",
                n,
                lower.len(),
                upper.len()
            )));
        }
        if rows.len() != rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(LpError::Dimension(format!(
                "row {} has {} entries, expected {}",
                i,
                r.len(),
                n
            )));
        }
        if objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("constraint matrix"));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        let model = LpModel {
            objective,
            rows,
            rhs,
            lower,
            upper,
        };
        for k in 0..n {
            model.check_bounds(k)?;
        }
        Ok(model)
    }

    fn check_bounds(&self, col: usize) -> Result<(), LpError> {
        let (lower, upper) = (self.lower[col], self.upper[col]);
        if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY
        {
            return Err(LpError::NonFinite("bounds"));
        }
        if lower > upper {
            return Err(LpError::Bounds { col, lower, upper });
        }
        Ok(())
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Replace the bounds of column `col`.
    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if col >= self.num_cols() {
            return Err(LpError::Dimension(format!("column {col} out of range")));
        }
        let old = (self.lower[col], self.upper[col]);
        self.lower[col] = lower;
        self.upper[col] = upper;
        if let Err(e) = self.check_bounds(col) {
            self.lower[col] = old.0;
            self.upper[col] = old.1;
            return Err(e);
        }
        Ok(())
    }

    /// Append a row `coeffs . x >= rhs`, returning its index.
    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<usize, LpError> {
        if coeffs.len() != self.num_cols() {
            return Err(LpError::Dimension(format!(
                "new row has {} entries, expected {}",
                coeffs.len(),
                self.num_cols()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(LpError::NonFinite("appended row"));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(self.rows.len() - 1)
    }

    /// Activity `a_i x` of row `i`.
    pub fn activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// Termination of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    CutoffInfeasible,
    PivotLimitHit,
}

/// Limits applied to one dual simplex run. `None` disables a limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotBudget {
    pub max_pivots: Option<usize>,
    /// Pivots in a row that leave the objective unchanged.
    pub max_stall: Option<usize>,
    /// Stop with `CutoffInfeasible` once the objective reaches this value.
    pub cutoff: Option<f64>,
    /// Stop with `PivotLimitHit` once every violation is below this value.
    pub vlim: Option<f64>,
}

impl Default for PivotBudget {
    fn default() -> Self {
        PivotBudget {
            max_pivots: Some(10_000),
            max_stall: Some(2_000),
            cutoff: None,
            vlim: None,
        }
    }
}

impl PivotBudget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_max_pivots(mut self, k: usize) -> Self {
        self.max_pivots = Some(k);
        self
    }

    pub fn with_cutoff(mut self, cutoff: Option<f64>) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_vlim(mut self, vlim: Option<f64>) -> Self {
        self.vlim = vlim;
        self
    }
}

/// Basic columns by row plus the bound side of every column.
///
/// Column indices `0..n` are structural, `n..n+m` are row surpluses.
/// `complemented[k]` means column `k` is measured from its upper bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub complemented: Vec<bool>,
}

impl Basis {
    pub fn is_basic(&self, k: usize) -> bool {
        self.basic.contains(&k)
    }

    /// Extend with one more row whose surplus becomes basic.
    pub fn with_extra_row(&self) -> Basis {
        let mut complemented = self.complemented.clone();
        complemented.push(false);
        let mut basic = self.basic.clone();
        basic.push(complemented.len() - 1);
        Basis {
            basic,
            complemented,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `x_o`; `+inf` when infeasible.
    pub objective: f64,
    pub x: Vec<f64>,
    /// Reduced costs in translated form (nonnegative at dual-feasible iterates).
    pub reduced_costs: Vec<f64>,
    /// Reduced costs with respect to the original column orientation.
    pub signed_reduced_costs: Vec<f64>,
    pub infeasibility: f64,
    pub pivots: usize,
    pub basis: Basis,
    pub(crate) tableau: Arc<Tableau>,
}

impl LpSolution {
    fn from_tableau(tab: Tableau, status: LpStatus, pivots: usize) -> Self {
        let n = tab.model.num_cols();
        let x: Vec<f64> = (0..n).map(|k| tab.value(k)).collect();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|k| {
                if tab.pos[k] == usize::MAX {
                    tab.d[k]
                } else {
                    0.0
                }
            })
            .collect();
        let signed_reduced_costs = (0..n).map(|k| tab.sign(k) * reduced_costs[k]).collect();
        let infeasibility = match status {
            LpStatus::Optimal => 0.0,
            _ => tab.infeasibility_sum(),
        };
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            _ => tab.z,
        };
        LpSolution {
            status,
            objective,
            x,
            reduced_costs,
            signed_reduced_costs,
            infeasibility,
            pivots,
            basis: tab.basis(),
            tableau: Arc::new(tab),
        }
    }

    pub fn model(&self) -> &LpModel {
        &self.tableau.model
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Objective of the last dual iterate, finite even when infeasible.
    pub fn dual_bound(&self) -> f64 {
        self.tableau.z
    }

    pub fn is_basic(&self, k: usize) -> bool {
        self.tableau.pos[k] != usize::MAX
    }

    /// Whether nonbasic column `k` rests on its upper bound.
    pub fn at_upper(&self, k: usize) -> bool {
        self.tableau.flip[k]
    }

    /// Tableau row of basic column `k` in translated space: the coefficient
    /// of every column and the basic value `t_k`.
    pub fn tableau_row(&self, k: usize) -> Option<(Vec<f64>, f64)> {
        let r = self.tableau.pos[k];
        if r == usize::MAX {
            return None;
        }
        let t = &self.tableau;
        Some(((0..t.ncols).map(|c| t.at(r, c)).collect(), t.beta[r]))
    }

    /// Orientation `x_c = base_c + sign_c * t_c` of column `c` (including surpluses).
    pub fn column_translation(&self, c: usize) -> (f64, f64) {
        (self.tableau.base(c), self.tableau.sign(c))
    }

    /// Translated reduced cost of any column, including surpluses.
    pub fn column_reduced_cost(&self, c: usize) -> f64 {
        if self.tableau.pos[c] == usize::MAX {
            self.tableau.d[c]
        } else {
            0.0
        }
    }

    /// Continue a solve stopped by a pivot limit.
    pub fn resume(&self, budget: &PivotBudget) -> Result<LpSolution, LpError> {
        let mut sol = run_to_solution((*self.tableau).clone(), budget)?;
        sol.pivots += self.pivots;
        Ok(sol)
    }

    pub fn num_columns_with_surplus(&self) -> usize {
        self.tableau.ncols
    }
}

/// A prepared dual-feasible starting tableau for a modified model.
#[derive(Debug, Clone)]
pub struct WarmStart {
    tab: Tableau,
}

impl WarmStart {
    pub fn model(&self) -> &LpModel {
        &self.tab.model
    }

    pub fn solve(&self, budget: &PivotBudget) -> Result<LpSolution, LpError> {
        run_to_solution(self.tab.clone(), budget)
    }
}

fn run_to_solution(mut tab: Tableau, budget: &PivotBudget) -> Result<LpSolution, LpError> {
    tab.restore_dual_feasibility();
    let mut out = tab.run(budget)?;
    if out.status == LpStatus::Optimal && tab.since_refactor > 0 {
        // clean accumulated round-off, then make sure nothing changed
        tab.refactor()?;
        tab.restore_dual_feasibility();
        let again = tab.run(budget)?;
        out.status = again.status;
        out.pivots += again.pivots;
    }
    if out.status == LpStatus::Optimal {
        if let Some(k) = tab.artificial_blocker() {
            return Err(LpError::Unbounded(k));
        }
    }
    Ok(LpSolution::from_tableau(tab, out.status, out.pivots))
}

/// Solve `model` with the dual simplex, optionally from `warm_basis`.
pub fn solve(
    model: &LpModel,
    warm_basis: Option<&Basis>,
    budget: &PivotBudget,
) -> Result<LpSolution, LpError> {
    let model = Arc::new(model.clone());
    let tab = match warm_basis {
        Some(b) => match Tableau::from_basis(Arc::clone(&model), b) {
            Ok(t) => t,
            Err(LpError::Singular) => Tableau::cold(Arc::clone(&model))?,
            Err(e) => return Err(e),
        },
        None => Tableau::cold(model)?,
    };
    run_to_solution(tab, budget)
}

/// Warm start for the same model with new bounds (row set unchanged).
pub fn rebound(sol: &LpSolution, model: LpModel) -> Result<WarmStart, LpError> {
    if model.num_cols() != sol.model().num_cols() || model.num_rows() != sol.model().num_rows() {
        return Err(LpError::Dimension(
            "rebound requires an identically shaped model".into(),
        ));
    }
    let mut tab = (*sol.tableau).clone();
    tab.rebound(Arc::new(model));
    Ok(WarmStart { tab })
}

/// Warm start for a model built from the solved one by appending rows.
/// The surplus of every new row starts basic.
pub fn extend_rows(sol: &LpSolution, model: LpModel) -> Result<WarmStart, LpError> {
    let old = sol.model();
    if model.num_cols() != old.num_cols() || model.num_rows() < old.num_rows() {
        return Err(LpError::Dimension(
            "extend_rows requires the same columns and at least as many rows".into(),
        ));
    }
    let mut basis = sol.basis.clone();
    for _ in old.num_rows()..model.num_rows() {
        basis = basis.with_extra_row();
    }
    let tab = Tableau::from_basis(Arc::new(model), &basis)?;
    Ok(WarmStart { tab })
}

/// Fractional parts `(f_plus, f_minus)` of `v`, or `None` when integral.
pub fn fractional_parts(v: f64) -> Option<(f64, f64)> {
    let fl = v.floor();
    let down = v - fl;
    if down <= INT_TOL || 1.0 - down <= INT_TOL {
        None
    } else {
        Some((1.0 - down, down))
    }
}

fn require_fractional(sol: &LpSolution, j: usize) -> Result<(f64, f64), LpError> {
    if j >= sol.model().num_cols() {
        return Err(LpError::Dimension(format!("column {j} out of range")));
    }
    fractional_parts(sol.x[j])
        .ok_or_else(|| LpError::Precondition(format!("x_{} = {} is integral", j, sol.x[j])))
}

/// Child model for the branch on `j` in `direction`.
pub fn branch_model(sol: &LpSolution, j: usize, direction: Direction) -> Result<LpModel, LpError> {
    require_fractional(sol, j)?;
    let mut model = sol.model().clone();
    let (lo, hi) = (model.lower()[j], model.upper()[j]);
    match direction {
        Direction::Up => model.set_bounds(j, sol.x[j].ceil(), hi)?,
        Direction::Down => model.set_bounds(j, lo, sol.x[j].floor())?,
    }
    Ok(model)
}

/// Warm-started child of a branch on fractional `x_j`.
pub fn apply_branch(
    sol: &LpSolution,
    j: usize,
    direction: Direction,
) -> Result<WarmStart, LpError> {
    let model = branch_model(sol, j, direction)?;
    rebound(sol, model)
}

/// Objective increase predicted by a single dual pivot on the row of `x_j`
/// after branching in `direction`. `+inf` when no pivot is eligible.
pub fn probe_single_pivot(
    sol: &LpSolution,
    j: usize,
    direction: Direction,
) -> Result<f64, LpError> {
    let (f_plus, f_minus) = require_fractional(sol, j)?;
    let tab = &sol.tableau;
    let r = tab.pos[j];
    if r == usize::MAX {
        return Err(LpError::Precondition(format!("x_{j} is nonbasic")));
    }
    // In translated space the basic value must rise (Up with sign +1) or fall.
    let rising = (direction == Direction::Up) == (tab.sign(j) > 0.0);
    let mut best = f64::INFINITY;
    for k in 0..tab.ncols {
        if tab.pos[k] != usize::MAX || tab.range(k) <= 0.0 {
            continue;
        }
        let a = tab.at(r, k);
        let eligible = if rising {
            a < -tableau::PIVOT_TOL
        } else {
            a > tableau::PIVOT_TOL
        };
        if eligible {
            best = best.min(tab.d[k].max(0.0) / a.abs());
        }
    }
    if best.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let f = match direction {
        Direction::Up => f_plus,
        Direction::Down => f_minus,
    };
    Ok(best * f)
}

/// Reverse the branch that put nonbasic `x_j` on its current bound.
///
/// A column at its lower bound `L` receives the new upper bound `L - 1`
/// (and lower bound `antecedent`); a column at its upper bound `U` receives
/// the new lower bound `U + 1` (and upper bound `antecedent`).
pub fn apply_reversal_update(
    sol: &LpSolution,
    j: usize,
    antecedent: f64,
) -> Result<WarmStart, LpError> {
    if j >= sol.model().num_cols() {
        return Err(LpError::Dimension(format!("column {j} out of range")));
    }
    if sol.is_basic(j) {
        return Err(LpError::Precondition(format!("x_{j} is basic")));
    }
    let mut tab = (*sol.tableau).clone();
    let mut model = sol.model().clone();
    let at_upper = tab.flip[j];
    let current = if at_upper { tab.hi[j] } else { tab.lo[j] };
    if !current.is_finite() {
        return Err(LpError::Precondition(format!(
            "x_{j} rests on an infinite bound"
        )));
    }
    let (lo, hi) = if at_upper {
        (current + 1.0, antecedent)
    } else {
        (antecedent, current - 1.0)
    };
    model.set_bounds(j, lo, hi)?;
    let model = Arc::new(model);
    // Move x_j by one unit beyond its old bound: the column of x_j is added
    // to (or subtracted from) the constants, the column is negated and the
    // reduced cost changes sign.
    let ncols = tab.ncols;
    for i in 0..tab.m {
        let a = tab.t[i * ncols + j];
        if a != 0.0 {
            tab.beta[i] += a;
            tab.t[i * ncols + j] = -a;
        }
    }
    tab.z -= tab.d[j];
    tab.d[j] = -tab.d[j];
    tab.flip[j] = !at_upper;
    tab.lo[j] = lo;
    tab.hi[j] = hi;
    tab.model = Arc::clone(&model);
    // other columns keep their bounds; the objective is recomputed exactly
    tab.recompute_objective();
    Ok(WarmStart { tab })
}
