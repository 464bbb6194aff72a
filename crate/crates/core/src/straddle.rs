//! Straddle branches on a derivative integer variable `z`.
//!
//! For a basic fractional `x_j` with tableau row
//! `x_j + sum a_i t_i = x_j°` over the nonbasic columns (translated so that
//! every nonbasic column sits at zero), the integer combination
//! `z = x_j + sum k_i t_i` rounds each integer coefficient `a_i` down
//! (`NB1`) or up (`NB2`). Branching on `z` instead of `x_j` yields the rows
//!
//! ```text
//! up:    z+ + sum_NB1 r_i t_i - sum_NB2 s_i t_i + sum d_i y_i = -s_o
//! down:  z- - sum_NB1 r_i t_i + sum_NB2 s_i t_i - sum d_i y_i = -r_o
//! ```
//!
//! where `y` are the continuous nonbasic columns (including row surpluses).

use serde::{Deserialize, Serialize};

use crate::criteria::{child_budget, BranchEval};
use crate::error::LpError;
use crate::lp::{extend_rows, fractional_parts, Direction, LpModel, LpSolution, PivotBudget};
use crate::model::{Incumbent, MipProblem};

const COEFF_TOL: f64 = 1e-9;

/// One straddle row, before and after translation back to structural columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraddleRow {
    pub var: usize,
    pub direction: Direction,
    /// Tableau columns (structural or surplus) in each partition.
    pub nb1: Vec<usize>,
    pub nb2: Vec<usize>,
    /// `(column, r_i)` for NB1 and `(column, s_i)` for NB2.
    pub r: Vec<(usize, f64)>,
    pub s: Vec<(usize, f64)>,
    /// `(column, d_i)` for continuous nonbasic columns.
    pub d: Vec<(usize, f64)>,
    /// `(column, q_i)` with `z = x_j - sum q_i t_i`.
    pub q: Vec<(usize, f64)>,
    pub r_o: f64,
    pub s_o: f64,
    /// The row as `coeffs . x >= rhs` over structural columns.
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl StraddleRow {
    /// Value of `z` at a structural point `x`.
    pub fn z_value(&self, sol: &LpSolution, x: &[f64]) -> f64 {
        let model = sol.model();
        let n = model.num_cols();
        let mut z = x[self.var];
        for &(c, q) in &self.q {
            let (base, sign) = sol.column_translation(c);
            let val = if c < n {
                x[c]
            } else {
                let i = c - n;
                model.activity(i, x) - model.rhs()[i]
            };
            z -= q * sign * (val - base);
        }
        z
    }
}

/// Build the straddle row for branching `x_j` in `direction`.
pub fn make_straddle(
    sol: &LpSolution,
    problem: &MipProblem,
    j: usize,
    direction: Direction,
) -> Result<StraddleRow, LpError> {
    let (s_o, r_o) = fractional_parts(sol.x[j])
        .ok_or_else(|| LpError::Precondition(format!("x_{j} is integral")))?;
    let (row, _) = sol
        .tableau_row(j)
        .ok_or_else(|| LpError::Precondition(format!("x_{j} is nonbasic")))?;
    let model = sol.model();
    let n = model.num_cols();
    let (_, sign_j) = sol.column_translation(j);
    let mut out = StraddleRow {
        var: j,
        direction,
        nb1: Vec::new(),
        nb2: Vec::new(),
        r: Vec::new(),
        s: Vec::new(),
        d: Vec::new(),
        q: Vec::new(),
        r_o,
        s_o,
        coeffs: vec![0.0; n],
        rhs: 0.0,
    };
    // L(t) = sum_NB1 r t - sum_NB2 s t + sum d y
    let mut lin: Vec<(usize, f64)> = Vec::new();
    for (c, &t) in row.iter().enumerate() {
        if c == j || sol.is_basic(c) {
            continue;
        }
        let a = sign_j * t;
        if a.abs() <= COEFF_TOL {
            continue;
        }
        let integer_col = c < n && problem.integer[c];
        if !integer_col {
            out.d.push((c, a));
            lin.push((c, a));
            continue;
        }
        let fl = a.floor();
        let r = a - fl;
        if r <= COEFF_TOL || 1.0 - r <= COEFF_TOL {
            // integral coefficient: absorbed into z
            out.q.push((c, -a.round()));
            continue;
        }
        let s = 1.0 - r;
        if r <= r_o + COEFF_TOL {
            out.nb1.push(c);
            out.r.push((c, r));
            out.q.push((c, -fl));
            lin.push((c, r));
        } else {
            out.nb2.push(c);
            out.s.push((c, s));
            out.q.push((c, -a.ceil()));
            lin.push((c, -s));
        }
    }
    // express L in structural columns: t_c = sign_c (v_c - base_c)
    let mut h = vec![0.0; n];
    let mut h0 = 0.0;
    for &(c, coef) in &lin {
        let (base, sign) = sol.column_translation(c);
        if c < n {
            h[c] += coef * sign;
        } else {
            let i = c - n;
            for (k, a) in model.row(i).iter().enumerate() {
                h[k] += coef * sign * a;
            }
            h0 -= coef * sign * model.rhs()[i];
        }
        h0 -= coef * sign * base;
    }
    match direction {
        // L <= -s_o  <=>  -h x >= s_o + h0
        Direction::Up => {
            out.coeffs = h.iter().map(|v| -v).collect();
            out.rhs = s_o + h0;
        }
        // L >= r_o  <=>  h x >= r_o - h0
        Direction::Down => {
            out.coeffs = h;
            out.rhs = r_o - h0;
        }
    }
    Ok(out)
}

/// Single dual pivot estimate of the objective increase of the straddle
/// child, the analogue of `probe_single_pivot`.
pub fn straddle_single_pivot(
    sol: &LpSolution,
    problem: &MipProblem,
    j: usize,
    direction: Direction,
) -> Result<f64, LpError> {
    let row = make_straddle(sol, problem, j, direction)?;
    // coefficients of L(t); the up row needs L to fall, the down row to rise
    let terms = row
        .r
        .iter()
        .copied()
        .chain(row.s.iter().map(|&(c, s)| (c, -s)))
        .chain(row.d.iter().copied());
    let mut best = f64::INFINITY;
    for (c, coef) in terms {
        let eligible = match direction {
            Direction::Up => coef < -COEFF_TOL,
            Direction::Down => coef > COEFF_TOL,
        };
        if eligible {
            best = best.min(sol.column_reduced_cost(c).max(0.0) / coef.abs());
        }
    }
    if best.is_infinite() {
        return Ok(best);
    }
    Ok(best
        * match direction {
            Direction::Up => row.s_o,
            Direction::Down => row.r_o,
        })
}

/// The child model of `sol` with the straddle row appended.
pub fn straddle_model(sol: &LpSolution, row: &StraddleRow) -> Result<LpModel, LpError> {
    let mut model = sol.model().clone();
    model.push_row(row.coeffs.clone(), row.rhs)?;
    Ok(model)
}

/// Solve the straddle child of `x_j` in `direction`, warm-started.
pub fn straddle_child(
    sol: &LpSolution,
    problem: &MipProblem,
    j: usize,
    direction: Direction,
    budget: &PivotBudget,
) -> Result<LpSolution, LpError> {
    let row = make_straddle(sol, problem, j, direction)?;
    let model = straddle_model(sol, &row)?;
    extend_rows(sol, model)?.solve(budget)
}

/// Evaluate `x_j` through its two straddle children.
pub fn straddle_probe(
    sol: &LpSolution,
    problem: &MipProblem,
    j: usize,
    budget: &PivotBudget,
    incumbent: &Incumbent,
) -> Result<(BranchEval, LpSolution, LpSolution), LpError> {
    let budget = child_budget(budget, incumbent);
    let up = straddle_child(sol, problem, j, Direction::Up, &budget)?;
    let down = straddle_child(sol, problem, j, Direction::Down, &budget)?;
    let be = BranchEval::from_children(j, sol, &up, &down, problem, incumbent.objective);
    Ok((be, up, down))
}
