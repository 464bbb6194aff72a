//! Progressive winnowing of branching candidates: `F ⊇ F0 ⊇ F1 ⊇ F2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::{eval_plain, BranchEval, CriterionSpec, UnitCosts};
use crate::error::LpError;
use crate::lp::{probe_single_pivot, Direction, LpSolution, PivotBudget};
use crate::model::{Fractional, Incumbent, MipProblem};
use crate::straddle::{straddle_probe, straddle_single_pivot};
use crate::trace::Counters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnowParams {
    /// Stage-1 pool size; `None` admits all of `F`.
    pub n0: Option<usize>,
    /// Survivors of stage 1; `None` means `max(1, ceil(|F| / 4))`.
    pub n1: Option<usize>,
    /// Survivors of stage 2 by look-ahead depth; the last entry repeats.
    pub n2: Vec<usize>,
    /// Stage-2 pivot budget; `None` derives it from the average solve length.
    pub k2: Option<usize>,
    /// Fixed candidate list.
    pub clist: Option<Vec<usize>>,
    /// `v_lim` multiplier; `None` disables the early stop.
    pub vlim_m: Option<f64>,
    /// Evaluate through straddle children instead of plain bound changes.
    pub straddle: bool,
}

impl Default for WinnowParams {
    fn default() -> Self {
        WinnowParams {
            n0: None,
            n1: None,
            n2: vec![4, 2, 1],
            k2: None,
            clist: None,
            vlim_m: None,
            straddle: false,
        }
    }
}

impl WinnowParams {
    pub fn n2_at(&self, depth: usize) -> usize {
        self.n2
            .get(depth)
            .or(self.n2.last())
            .copied()
            .unwrap_or(1)
            .max(1)
    }

    pub fn n1_for(&self, f_len: usize) -> usize {
        self.n1.unwrap_or_else(|| f_len.div_ceil(4)).max(1)
    }

    pub fn k2_for(&self, avg_pivots: f64) -> usize {
        self.k2
            .unwrap_or_else(|| (avg_pivots / 6.0).ceil() as usize)
            .max(1)
    }

    /// `v_lim = m * max_j min(f+, f-)` when enabled.
    pub fn vlim(&self, fractional: &[Fractional]) -> Option<f64> {
        self.vlim_m.map(|m| {
            m * fractional
                .iter()
                .map(Fractional::min_part)
                .fold(0.0, f64::max)
        })
    }
}

/// Stage 0: the `n0` candidates whose fractional part is closest to 0.5.
/// Returns `None` when a candidate list is active and excludes all of `F`.
pub fn stage0(fractional: &[Fractional], params: &WinnowParams) -> Option<Vec<Fractional>> {
    let mut pool: Vec<Fractional> = match &params.clist {
        Some(list) => fractional
            .iter()
            .filter(|f| list.contains(&f.var))
            .copied()
            .collect(),
        None => fractional.to_vec(),
    };
    if pool.is_empty() {
        return None;
    }
    let n0 = params.n0.unwrap_or(pool.len()).max(1);
    pool.sort_by(|a, b| {
        (a.f_minus - 0.5)
            .abs()
            .total_cmp(&(b.f_minus - 0.5).abs())
            .then(a.var.cmp(&b.var))
    });
    pool.truncate(n0);
    pool.sort_by_key(|f| f.var);
    Some(pool)
}

/// Result of stage 1.
#[derive(Debug, Clone)]
pub enum Stage1 {
    /// The candidate list excludes every fractional variable.
    Leaf,
    Candidates {
        f0: Vec<usize>,
        /// Survivors, best first.
        f1: Vec<usize>,
        /// Probe evaluations for every member of `F0`.
        probes: Vec<BranchEval>,
    },
}

/// Probe-based evaluation of one candidate.
pub fn probe_eval(
    sol: &LpSolution,
    problem: &MipProblem,
    f: &Fractional,
    straddle: bool,
    incumbent: &Incumbent,
) -> Result<BranchEval, LpError> {
    let mut vals = [0.0; 2];
    for (i, dir) in [Direction::Up, Direction::Down].into_iter().enumerate() {
        vals[i] = if straddle {
            straddle_single_pivot(sol, problem, f.var, dir)?
        } else {
            probe_single_pivot(sol, f.var, dir)?
        };
    }
    let mut e = BranchEval::from_values(f.var, vals[0], vals[1]);
    e.f_plus = f.f_plus;
    e.f_minus = f.f_minus;
    let gap = incumbent.objective - sol.objective;
    for (i, infeasible) in [&mut e.up_infeasible, &mut e.down_infeasible]
        .into_iter()
        .enumerate()
    {
        if vals[i].is_infinite() {
            *infeasible = true;
            vals[i] = gap;
        }
    }
    e.eval_up = vals[0];
    e.eval_down = vals[1];
    e.plain_up = vals[0];
    e.plain_down = vals[1];
    e.uc_up = crate::criteria::unit_cost(vals[0], f.f_plus);
    e.uc_down = crate::criteria::unit_cost(vals[1], f.f_minus);
    Ok(e)
}

/// Estimated `(Eval+, Eval-)` of a candidate, replacing its probes.
pub type Estimate<'a> = &'a dyn Fn(&Fractional) -> Option<(f64, f64)>;

/// Stage 1: rank `F0` by single-pivot probes and keep `n1`.
pub fn stage1(
    sol: &LpSolution,
    problem: &MipProblem,
    fractional: &[Fractional],
    params: &WinnowParams,
    spec: &CriterionSpec,
    incumbent: &Incumbent,
    counters: &mut Counters,
) -> Result<Stage1, LpError> {
    stage1_with(
        sol, problem, fractional, params, spec, incumbent, counters, None,
    )
}

/// Stage 1 where `estimate` may stand in for the probes of a candidate.
#[allow(clippy::too_many_arguments)]
pub fn stage1_with(
    sol: &LpSolution,
    problem: &MipProblem,
    fractional: &[Fractional],
    params: &WinnowParams,
    spec: &CriterionSpec,
    incumbent: &Incumbent,
    counters: &mut Counters,
    estimate: Option<Estimate>,
) -> Result<Stage1, LpError> {
    let Some(f0) = stage0(fractional, params) else {
        return Ok(Stage1::Leaf);
    };
    let mut probes = Vec::with_capacity(f0.len());
    for f in &f0 {
        if let Some((up, down)) = estimate.and_then(|e| e(f)) {
            let mut e = BranchEval::from_values(f.var, up, down);
            e.f_plus = f.f_plus;
            e.f_minus = f.f_minus;
            e.uc_up = crate::criteria::unit_cost(up, f.f_plus);
            e.uc_down = crate::criteria::unit_cost(down, f.f_minus);
            probes.push(e);
            counters.pseudo_estimates += 1;
            continue;
        }
        probes.push(probe_eval(sol, problem, f, params.straddle, incumbent)?);
        counters.probes += 2;
    }
    let n1 = params.n1_for(fractional.len()).min(f0.len());
    let order = spec.degraded().rank(&probes);
    let f1 = order.iter().take(n1).map(|&i| probes[i].var).collect();
    Ok(Stage1::Candidates {
        f0: f0.iter().map(|f| f.var).collect(),
        f1,
        probes,
    })
}

/// Result of stage 2.
#[derive(Debug, Clone)]
pub struct Stage2 {
    /// Evaluations of every member of `F1`, in `F1` order, under the
    /// criterion's flavor.
    pub evals: Vec<BranchEval>,
    /// Survivors, best first.
    pub f2: Vec<usize>,
    /// Budgeted child solutions `(up, down)` for each member of `F1`.
    pub children: BTreeMap<usize, (LpSolution, LpSolution)>,
}

impl Stage2 {
    pub fn eval_of(&self, var: usize) -> Option<&BranchEval> {
        self.evals.iter().find(|e| e.var == var)
    }
}

/// Stage 2: evaluate `F1` with `k2`-pivot child solves and keep `n2`.
#[allow(clippy::too_many_arguments)]
pub fn stage2(
    sol: &LpSolution,
    problem: &MipProblem,
    f1: &[usize],
    fractional: &[Fractional],
    n2: usize,
    k2: usize,
    params: &WinnowParams,
    spec: &CriterionSpec,
    incumbent: &Incumbent,
    counters: &mut Counters,
) -> Result<Stage2, LpError> {
    let budget = PivotBudget::default()
        .with_max_pivots(k2)
        .with_vlim(params.vlim(fractional));
    let mut evals = Vec::with_capacity(f1.len());
    let mut children = BTreeMap::new();
    for &j in f1 {
        let (e, up, down) = if params.straddle {
            straddle_probe(sol, problem, j, &budget, incumbent)?
        } else {
            eval_plain(sol, problem, j, &budget, incumbent)?
        };
        counters.add_solve(up.pivots);
        counters.add_solve(down.pivots);
        evals.push(e);
        children.insert(j, (up, down));
    }
    let uc = UnitCosts::new(&evals, Some(sol));
    for e in &mut evals {
        e.apply_flavor(&spec.weights, spec.required_flavor(), &uc);
    }
    let order = spec.rank(&evals);
    let f2 = order
        .iter()
        .take(n2.max(1))
        .map(|&i| evals[i].var)
        .collect();
    Ok(Stage2 {
        evals,
        f2,
        children,
    })
}
