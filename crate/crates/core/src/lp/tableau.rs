//! Dense bounded-variable dual simplex tableau.
//!
//! Every column `k` (structural columns first, then one surplus column per
//! row) is carried in translated form `x_k = base_k + sign_k * t_k`, where
//! `t_k >= 0` ranges over `[0, range_k]`. Nonbasic columns always sit at
//! `t_k = 0`; a column resting on its upper bound is complemented
//! (`sign_k = -1`, `base_k = upper_k`). With this convention every reduced
//! cost of a dual-feasible iterate is nonnegative.

use std::sync::Arc;

use super::{Basis, LpModel, LpStatus, PivotBudget};
use crate::error::LpError;

pub const FEAS_TOL: f64 = 1e-7;
pub(crate) const PIVOT_TOL: f64 = 1e-9;
pub(crate) const DUAL_TOL: f64 = 1e-9;
/// Stand-in magnitude for infinite bounds that a nonbasic column must rest on.
pub const ARTIFICIAL_BOUND: f64 = 1e6;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    pub(crate) model: Arc<LpModel>,
    pub(crate) m: usize,
    pub(crate) ncols: usize,
    /// `B^-1 * A~`, row-major `m x ncols`.
    pub(crate) t: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) d: Vec<f64>,
    pub(crate) basic: Vec<usize>,
    /// Row holding each basic column, `usize::MAX` for nonbasic columns.
    pub(crate) pos: Vec<usize>,
    pub(crate) flip: Vec<bool>,
    pub(crate) lo: Vec<f64>,
    pub(crate) hi: Vec<f64>,
    pub(crate) z: f64,
    pub(crate) since_refactor: usize,
}

/// Outcome of a dual simplex run, before translation into an `LpSolution`.
pub(crate) struct RunOutcome {
    pub status: LpStatus,
    pub pivots: usize,
}

fn effective_bounds(model: &LpModel) -> (Vec<f64>, Vec<f64>) {
    let n = model.num_cols();
    let m = model.num_rows();
    let mut lo = Vec::with_capacity(n + m);
    let mut hi = Vec::with_capacity(n + m);
    for k in 0..n {
        lo.push(model.lower()[k]);
        hi.push(model.upper()[k]);
    }
    for _ in 0..m {
        lo.push(0.0);
        hi.push(f64::INFINITY);
    }
    (lo, hi)
}

impl Tableau {
    #[inline]
    pub(crate) fn at(&self, i: usize, k: usize) -> f64 {
        self.t[i * self.ncols + k]
    }

    #[inline]
    pub(crate) fn sign(&self, k: usize) -> f64 {
        if self.flip[k] {
            -1.0
        } else {
            1.0
        }
    }

    /// Value of the bound column `k` is measured from, substituting the
    /// artificial bound when the real one is infinite.
    pub(crate) fn base(&self, k: usize) -> f64 {
        if self.flip[k] {
            let h = self.hi[k];
            if h.is_finite() {
                h
            } else {
                ARTIFICIAL_BOUND.max(self.lo[k] + ARTIFICIAL_BOUND)
            }
        } else {
            let l = self.lo[k];
            if l.is_finite() {
                l
            } else {
                (-ARTIFICIAL_BOUND).min(self.hi[k] - ARTIFICIAL_BOUND)
            }
        }
    }

    pub(crate) fn range(&self, k: usize) -> f64 {
        let (l, h) = (self.lo[k], self.hi[k]);
        if l.is_finite() && h.is_finite() {
            h - l
        } else if l.is_finite() || h.is_finite() {
            // one side artificial: the column may travel to it and back
            if self.flip[k] {
                if l.is_finite() {
                    self.base(k) - l
                } else {
                    f64::INFINITY
                }
            } else if h.is_finite() {
                h - self.base(k)
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        }
    }

    fn column_coeff(model: &LpModel, i: usize, k: usize) -> f64 {
        let n = model.num_cols();
        if k < n {
            model.row(i)[k]
        } else if k - n == i {
            -1.0
        } else {
            0.0
        }
    }

    fn cost(model: &LpModel, k: usize) -> f64 {
        if k < model.num_cols() {
            model.objective()[k]
        } else {
            0.0
        }
    }

    /// Slack basis with every structural column placed on the bound that
    /// makes its reduced cost nonnegative.
    pub(crate) fn cold(model: Arc<LpModel>) -> Result<Self, LpError> {
        let n = model.num_cols();
        let m = model.num_rows();
        let mut flip = vec![false; n + m];
        for k in 0..n {
            let c = model.objective()[k];
            flip[k] = c < 0.0;
        }
        let basis = Basis {
            basic: (n..n + m).collect(),
            complemented: flip,
        };
        Self::from_basis(model, &basis)
    }

    /// Factor the tableau for `basis` by Gauss-Jordan elimination with
    /// partial pivoting over the basic columns.
    pub(crate) fn from_basis(model: Arc<LpModel>, basis: &Basis) -> Result<Self, LpError> {
        let n = model.num_cols();
        let m = model.num_rows();
        let ncols = n + m;
        if basis.basic.len() != m || basis.complemented.len() != ncols {
            return Err(LpError::Dimension(format!(
                "basis has {} basic / {} columns, model needs {} / {}",
                basis.basic.len(),
                basis.complemented.len(),
                m,
                ncols
            )));
        }
        let (lo, hi) = effective_bounds(&model);
        let mut tab = Tableau {
            model,
            m,
            ncols,
            t: vec![0.0; m * ncols],
            beta: vec![0.0; m],
            d: vec![0.0; ncols],
            basic: basis.basic.clone(),
            pos: vec![usize::MAX; ncols],
            flip: basis.complemented.clone(),
            lo,
            hi,
            z: 0.0,
            since_refactor: 0,
        };
        tab.refactor()?;
        Ok(tab)
    }

    /// Rebuild `B^-1 A~`, the basic values and reduced costs from scratch.
    pub(crate) fn refactor(&mut self) -> Result<(), LpError> {
        let model = Arc::clone(&self.model);
        let (m, ncols) = (self.m, self.ncols);
        // nonbasic columns must rest on a bound that exists (possibly artificial)
        let mut a = vec![0.0; m * ncols];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let mut r = model.rhs()[i];
            for k in 0..ncols {
                let coeff = Self::column_coeff(&model, i, k);
                if coeff != 0.0 {
                    a[i * ncols + k] = self.sign(k) * coeff;
                    r -= coeff * self.base(k);
                }
            }
            rhs[i] = r;
        }
        let mut seen = vec![false; ncols];
        for &b in &self.basic {
            if b >= ncols || seen[b] {
                return Err(LpError::Singular);
            }
            seen[b] = true;
        }
        // Gauss-Jordan on the basic columns, assigning rows as we go.
        let cols: Vec<usize> = self.basic.clone();
        let mut row_of = vec![usize::MAX; m];
        let mut assigned = vec![false; m];
        for &col in &cols {
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            for i in 0..m {
                if !assigned[i] {
                    let v = a[i * ncols + col].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = i;
                    }
                }
            }
            if best == usize::MAX || best_abs < 1e-11 {
                return Err(LpError::Singular);
            }
            assigned[best] = true;
            row_of[best] = col;
            let piv = a[best * ncols + col];
            for k in 0..ncols {
                a[best * ncols + k] /= piv;
            }
            rhs[best] /= piv;
            for i in 0..m {
                if i != best {
                    let f = a[i * ncols + col];
                    if f != 0.0 {
                        for k in 0..ncols {
                            a[i * ncols + k] -= f * a[best * ncols + k];
                        }
                        rhs[i] -= f * rhs[best];
                    }
                }
            }
        }
        self.t = a;
        self.beta = rhs;
        self.basic = row_of;
        self.pos = vec![usize::MAX; ncols];
        for (i, &b) in self.basic.iter().enumerate() {
            self.pos[b] = i;
            // clean the basic column
            for r in 0..m {
                self.t[r * ncols + b] = if r == i { 1.0 } else { 0.0 };
            }
        }
        self.recompute_duals();
        self.since_refactor = 0;
        Ok(())
    }

    pub(crate) fn recompute_duals(&mut self) {
        let model = Arc::clone(&self.model);
        let ncols = self.ncols;
        let cb: Vec<f64> = self
            .basic
            .iter()
            .map(|&b| self.sign(b) * Self::cost(&model, b))
            .collect();
        for k in 0..ncols {
            if self.pos[k] != usize::MAX {
                self.d[k] = 0.0;
                continue;
            }
            let mut v = self.sign(k) * Self::cost(&model, k);
            for (i, &c) in cb.iter().enumerate() {
                if c != 0.0 {
                    v -= c * self.t[i * ncols + k];
                }
            }
            self.d[k] = v;
        }
        self.recompute_objective();
    }

    pub(crate) fn recompute_objective(&mut self) {
        let model = Arc::clone(&self.model);
        let n = model.num_cols();
        let mut z = 0.0;
        for k in 0..n {
            let c = model.objective()[k];
            if c != 0.0 {
                z += c * self.value(k);
            }
        }
        self.z = z;
    }

    /// External value of column `k` at the current basic solution.
    pub(crate) fn value(&self, k: usize) -> f64 {
        let t = match self.pos[k] {
            usize::MAX => 0.0,
            r => self.beta[r],
        };
        self.base(k) + self.sign(k) * t
    }

    /// Violation of basic row `r`: negative when below its lower bound,
    /// positive amount above its upper bound, as `(below, above)`.
    fn violation(&self, r: usize) -> (f64, f64) {
        let b = self.basic[r];
        let v = self.beta[r];
        let rho = self.range(b);
        ((-v).max(0.0), (v - rho).max(0.0))
    }

    pub(crate) fn infeasibility_sum(&self) -> f64 {
        (0..self.m)
            .map(|r| {
                let (a, b) = self.violation(r);
                let s = a + b;
                if s > FEAS_TOL {
                    s
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub(crate) fn max_violation(&self) -> f64 {
        (0..self.m)
            .map(|r| {
                let (a, b) = self.violation(r);
                a.max(b)
            })
            .fold(0.0, f64::max)
    }

    /// Complement column `k`: it is now measured from its opposite bound.
    /// For a nonbasic column this moves it to that bound.
    pub(crate) fn complement(&mut self, k: usize) {
        let ncols = self.ncols;
        let old_base = self.base(k);
        let old_sign = self.sign(k);
        self.flip[k] = !self.flip[k];
        let new_base = self.base(k);
        match self.pos[k] {
            usize::MAX => {
                // x_k moves from old_base to new_base: t_k(old) = (new - old)/old_sign
                let dt = (new_base - old_base) * old_sign;
                for i in 0..self.m {
                    let a = self.t[i * ncols + k];
                    if a != 0.0 {
                        self.beta[i] -= a * dt;
                        self.t[i * ncols + k] = -a;
                    }
                }
                self.z += self.d[k] * dt;
                self.d[k] = -self.d[k];
            }
            r => {
                // basic: t' = (new_base - old_base)*old_sign... with the
                // column negated the row is negated except the unit entry
                let row = r * ncols;
                for j in 0..ncols {
                    if j != k {
                        self.t[row + j] = -self.t[row + j];
                    }
                }
                // x = old_base + old_sign*t = new_base - old_sign*t'
                // => t' = (new_base - old_base)*old_sign... - t
                self.beta[r] = (new_base - old_base) * old_sign - self.beta[r];
                if old_sign < 0.0 {
                    // (new_base - old_base) * (-1) = old_base - new_base
                }
            }
        }
    }

    /// Make every nonbasic reduced cost nonnegative by moving offending
    /// columns to their opposite bound.
    pub(crate) fn restore_dual_feasibility(&mut self) {
        for k in 0..self.ncols {
            if self.pos[k] == usize::MAX && self.d[k] < -DUAL_TOL && self.range(k) > 0.0 {
                self.complement(k);
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let piv = self.t[r * ncols + q];
        let row = r * ncols;
        for k in 0..ncols {
            self.t[row + k] /= piv;
        }
        self.beta[r] /= piv;
        let pivot_row: Vec<f64> = self.t[row..row + ncols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncols + q];
            if f != 0.0 {
                let base = i * ncols;
                for (k, &p) in pivot_row.iter().enumerate() {
                    if p != 0.0 {
                        self.t[base + k] -= f * p;
                    }
                }
                self.t[base + q] = 0.0;
                self.beta[i] -= f * self.beta[r];
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (k, &p) in pivot_row.iter().enumerate() {
                if p != 0.0 {
                    self.d[k] -= f * p;
                }
            }
        }
        self.d[q] = 0.0;
        self.z += f * self.beta[r];
        let leaving = self.basic[r];
        self.pos[leaving] = usize::MAX;
        self.basic[r] = q;
        self.pos[q] = r;
        self.t[row + q] = 1.0;
        self.since_refactor += 1;
    }

    /// Choose the leaving row: largest violation, ties to the lowest column.
    fn choose_leaving(&self) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool, f64)> = None;
        for r in 0..self.m {
            let (below, above) = self.violation(r);
            let (v, up) = if above > below {
                (above, true)
            } else {
                (below, false)
            };
            if v <= FEAS_TOL {
                continue;
            }
            best = match best {
                None => Some((r, up, v)),
                Some((br, bup, bv)) => {
                    if v > bv + 1e-12 || ((v - bv).abs() <= 1e-12 && self.basic[r] < self.basic[br])
                    {
                        Some((r, up, v))
                    } else {
                        Some((br, bup, bv))
                    }
                }
            };
        }
        best.map(|(r, up, _)| (r, up))
    }

    /// Dual ratio test on row `r` whose basic column must increase.
    pub(crate) fn ratio_test(&self, r: usize) -> Option<usize> {
        let ncols = self.ncols;
        let mut best: Option<(usize, f64)> = None;
        for k in 0..ncols {
            if self.pos[k] != usize::MAX || self.range(k) <= 0.0 {
                continue;
            }
            let a = self.t[r * ncols + k];
            if a < -PIVOT_TOL {
                let ratio = self.d[k].max(0.0) / -a;
                best = match best {
                    None => Some((k, ratio)),
                    Some((bk, br)) => {
                        if ratio < br - 1e-15 {
                            Some((k, ratio))
                        } else {
                            Some((bk, br))
                        }
                    }
                };
            }
        }
        best.map(|(k, _)| k)
    }

    /// Run the dual simplex from the current (dual feasible) iterate.
    pub(crate) fn run(&mut self, budget: &PivotBudget) -> Result<RunOutcome, LpError> {
        let mut pivots = 0usize;
        let mut stalled = 0usize;
        loop {
            if let Some(cut) = budget.cutoff {
                if self.z >= cut {
                    return Ok(RunOutcome {
                        status: LpStatus::CutoffInfeasible,
                        pivots,
                    });
                }
            }
            let Some((r, above)) = self.choose_leaving() else {
                return Ok(RunOutcome {
                    status: LpStatus::Optimal,
                    pivots,
                });
            };
            if let Some(vlim) = budget.vlim {
                if self.max_violation() < vlim {
                    return Ok(RunOutcome {
                        status: LpStatus::PivotLimitHit,
                        pivots,
                    });
                }
            }
            if budget.max_pivots.is_some_and(|cap| pivots >= cap) {
                return Ok(RunOutcome {
                    status: LpStatus::PivotLimitHit,
                    pivots,
                });
            }
            if above {
                let b = self.basic[r];
                self.complement(b);
            }
            let Some(q) = self.ratio_test(r) else {
                return Ok(RunOutcome {
                    status: LpStatus::Infeasible,
                    pivots,
                });
            };
            let before = self.z;
            self.pivot(r, q);
            pivots += 1;
            if self.z - before <= 1e-12 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if budget.max_stall.is_some_and(|cap| stalled > cap) {
                return Ok(RunOutcome {
                    status: LpStatus::PivotLimitHit,
                    pivots,
                });
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.restore_dual_feasibility();
            }
        }
    }

    /// Replace the working bounds with those of `model` (same shape), moving
    /// basic values accordingly.
    pub(crate) fn rebound(&mut self, model: Arc<LpModel>) {
        let n = model.num_cols();
        let ncols = self.ncols;
        for k in 0..n {
            let (nl, nh) = (model.lower()[k], model.upper()[k]);
            if nl == self.lo[k] && nh == self.hi[k] {
                continue;
            }
            let old_base = self.base(k);
            self.lo[k] = nl;
            self.hi[k] = nh;
            let new_base = self.base(k);
            let delta = new_base - old_base;
            if delta != 0.0 {
                // b~ -= M_k * delta, B^-1 M_k = sign_k * T_k
                let s = self.sign(k);
                for i in 0..self.m {
                    let a = self.t[i * ncols + k];
                    if a != 0.0 {
                        self.beta[i] -= s * a * delta;
                    }
                }
            }
        }
        self.model = model;
        self.recompute_objective();
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis {
            basic: self.basic.clone(),
            complemented: self.flip.clone(),
        }
    }

    /// Column index of a nonbasic column sitting on an artificial bound with a
    /// nonzero reduced cost, which certifies an unbounded relaxation.
    pub(crate) fn artificial_blocker(&self) -> Option<usize> {
        (0..self.ncols).find(|&k| {
            let real = if self.flip[k] { self.hi[k] } else { self.lo[k] };
            let at_artificial = !real.is_finite();
            match self.pos[k] {
                usize::MAX => at_artificial && self.d[k] > DUAL_TOL,
                r => {
                    let v = self.value(k);
                    let _ = r;
                    v.abs() >= ARTIFICIAL_BOUND * 0.999
                }
            }
        })
    }
}
