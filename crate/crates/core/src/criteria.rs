//! Branch evaluations and the variable selection criteria built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LpError, SolveError};
use crate::lp::{apply_branch, fractional_parts, Direction, LpSolution, LpStatus, PivotBudget};
use crate::model::{fractional_of, Fractional, Incumbent, MipProblem};

/// Substitute for a zero (or near-zero) factor in product criteria.
pub const ZERO_SUBSTITUTE: f64 = 1e-6;
/// Numerator used for a unit cost whose objective change is zero.
pub const UC_EPSILON: f64 = 1e-9;

/// Evaluation of branching up and down on one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEval {
    pub var: usize,
    /// `Eval+` and `Eval-` under the flavor last applied.
    pub eval_up: f64,
    pub eval_down: f64,
    /// Objective changes `x_oj - x_o` with infeasible children replaced by the incumbent.
    pub plain_up: f64,
    pub plain_down: f64,
    pub infeas_up: f64,
    pub infeas_down: f64,
    pub frac_up: Vec<Fractional>,
    pub frac_down: Vec<Fractional>,
    pub uc_up: f64,
    pub uc_down: f64,
    pub up_infeasible: bool,
    pub down_infeasible: bool,
    pub f_plus: f64,
    pub f_minus: f64,
}

/// What an evaluation implies for the node it was taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSignal {
    None,
    /// One child is infeasible; the other branch must be taken.
    Compulsory(Direction),
    NodeInfeasible,
}

impl BranchEval {
    /// Evaluation built directly from objective changes (no LP data).
    pub fn from_values(var: usize, eval_up: f64, eval_down: f64) -> Self {
        BranchEval {
            var,
            eval_up,
            eval_down,
            plain_up: eval_up,
            plain_down: eval_down,
            infeas_up: 0.0,
            infeas_down: 0.0,
            frac_up: Vec::new(),
            frac_down: Vec::new(),
            uc_up: unit_cost(eval_up, 0.5),
            uc_down: unit_cost(eval_down, 0.5),
            up_infeasible: false,
            down_infeasible: false,
            f_plus: 0.5,
            f_minus: 0.5,
        }
    }

    /// Evaluation from the two child solves of fractional `x_j`.
    ///
    /// `incumbent_objective` replaces the objective of an infeasible child.
    pub fn from_children(
        var: usize,
        parent: &LpSolution,
        up: &LpSolution,
        down: &LpSolution,
        problem: &MipProblem,
        incumbent_objective: f64,
    ) -> Self {
        let (f_plus, f_minus) = fractional_parts(parent.x[var]).unwrap_or((0.5, 0.5));
        let side = |s: &LpSolution| -> (f64, bool, f64, Vec<Fractional>) {
            match s.status {
                LpStatus::Infeasible | LpStatus::CutoffInfeasible => (
                    incumbent_objective - parent.objective,
                    true,
                    0.0,
                    Vec::new(),
                ),
                LpStatus::Optimal | LpStatus::PivotLimitHit => (
                    (s.dual_bound() - parent.objective).max(0.0),
                    false,
                    s.infeasibility,
                    fractional_of(&s.x, problem),
                ),
            }
        };
        let (eu, iu, inu, fu) = side(up);
        let (ed, id, ind, fd) = side(down);
        BranchEval {
            var,
            eval_up: eu,
            eval_down: ed,
            plain_up: eu,
            plain_down: ed,
            infeas_up: inu,
            infeas_down: ind,
            frac_up: fu,
            frac_down: fd,
            uc_up: unit_cost(eu, f_plus),
            uc_down: unit_cost(ed, f_minus),
            up_infeasible: iu,
            down_infeasible: id,
            f_plus,
            f_minus,
        }
    }

    pub fn max(&self) -> f64 {
        self.eval_up.max(self.eval_down)
    }

    pub fn min(&self) -> f64 {
        self.eval_up.min(self.eval_down)
    }

    pub fn diff(&self) -> f64 {
        let d = (self.eval_up - self.eval_down).abs();
        if d.is_nan() {
            0.0
        } else {
            d
        }
    }

    pub fn eval(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Up => self.eval_up,
            Direction::Down => self.eval_down,
        }
    }

    /// Preferred direction: up iff `Eval+ < Eval-`.
    pub fn direction(&self) -> Direction {
        if self.eval_up < self.eval_down {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    pub fn signal(&self) -> EvalSignal {
        match (self.up_infeasible, self.down_infeasible) {
            (true, true) => EvalSignal::NodeInfeasible,
            (true, false) => EvalSignal::Compulsory(Direction::Down),
            (false, true) => EvalSignal::Compulsory(Direction::Up),
            (false, false) => EvalSignal::None,
        }
    }

    /// Recompute `Eval+`/`Eval-` from the stored plain values.
    pub fn apply_flavor(&mut self, weights: &Weights, flavor: EvalFlavor, uc: &UnitCosts) {
        let (up, down) = match flavor {
            EvalFlavor::Plain => (self.plain_up, self.plain_down),
            EvalFlavor::D1D2 => (
                self.plain_up
                    + weights.w1 * self.frac_up.iter().map(Fractional::min_part).sum::<f64>()
                    + weights.w2 * self.infeas_up,
                self.plain_down
                    + weights.w1 * self.frac_down.iter().map(Fractional::min_part).sum::<f64>()
                    + weights.w2 * self.infeas_down,
            ),
            EvalFlavor::D3D4 => (
                self.plain_up
                    + weights.w1 * capped_sum(uc.min_costs(&self.frac_up), weights.top_k)
                    + weights.w2 * self.infeas_up,
                self.plain_down
                    + weights.w1 * capped_sum(uc.min_costs(&self.frac_down), weights.top_k)
                    + weights.w2 * self.infeas_down,
            ),
        };
        self.eval_up = up;
        self.eval_down = down;
    }
}

/// `(x_oj - x_o) / f` with the epsilon convention for a zero numerator.
pub fn unit_cost(delta: f64, f: f64) -> f64 {
    let num = if delta <= 0.0 { UC_EPSILON } else { delta };
    num / f
}

fn capped_sum(mut terms: Vec<f64>, top_k: Option<usize>) -> f64 {
    match top_k {
        None => terms.iter().sum(),
        Some(k) => {
            terms.sort_by(|a, b| b.total_cmp(a));
            terms.iter().take(k).sum()
        }
    }
}

/// Unit costs available at a node: measured ones for probed candidates and
/// `|RC|` otherwise.
#[derive(Debug, Clone, Default)]
pub struct UnitCosts {
    pub measured: BTreeMap<usize, (f64, f64)>,
    /// Consulted after `measured`, before reduced costs.
    pub fallback: BTreeMap<usize, (f64, f64)>,
    pub reduced_costs: Vec<f64>,
}

impl UnitCosts {
    pub fn new(evals: &[BranchEval], parent: Option<&LpSolution>) -> Self {
        UnitCosts {
            measured: evals
                .iter()
                .map(|e| (e.var, (e.uc_up, e.uc_down)))
                .collect(),
            fallback: BTreeMap::new(),
            reduced_costs: parent.map(|p| p.reduced_costs.clone()).unwrap_or_default(),
        }
    }

    /// `(UC+, UC-)` for variable `i`.
    pub fn get(&self, i: usize) -> (f64, f64) {
        if let Some(&v) = self.measured.get(&i).or_else(|| self.fallback.get(&i)) {
            return v;
        }
        let rc = self
            .reduced_costs
            .get(i)
            .map_or(0.0, |v| v.abs())
            .max(UC_EPSILON);
        (rc, rc)
    }

    /// `MinCost_i = min(UC+ f+, UC- f-)` for each fractional entry.
    pub fn min_costs(&self, fracs: &[Fractional]) -> Vec<f64> {
        fracs
            .iter()
            .map(|f| {
                let (up, down) = self.get(f.var);
                (up * f.f_plus).min(down * f.f_minus)
            })
            .collect()
    }
}

/// Solve both children of fractional `x_j` and evaluate them.
pub fn eval_plain(
    parent: &LpSolution,
    problem: &MipProblem,
    j: usize,
    budget: &PivotBudget,
    incumbent: &Incumbent,
) -> Result<(BranchEval, LpSolution, LpSolution), LpError> {
    let budget = child_budget(budget, incumbent);
    let up = apply_branch(parent, j, Direction::Up)?.solve(&budget)?;
    let down = apply_branch(parent, j, Direction::Down)?.solve(&budget)?;
    let be = BranchEval::from_children(j, parent, &up, &down, problem, incumbent.objective);
    Ok((be, up, down))
}

/// Budget for a child solve with the incumbent cutoff folded in.
pub fn child_budget(budget: &PivotBudget, incumbent: &Incumbent) -> PivotBudget {
    let cutoff = match (budget.cutoff, incumbent.cutoff()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    budget.with_cutoff(cutoff)
}

/// Which definition of `Eval+`/`Eval-` a criterion works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalFlavor {
    Plain,
    D1D2,
    D3D4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    /// Keep only the largest `MinCost` terms.
    pub top_k: Option<usize>,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w1: 100.0,
            w2: 10.0,
            top_k: None,
        }
    }
}

/// Evaluate `x_j` with the weighted (D1/D2 or D3/D4) definitions.
#[allow(clippy::too_many_arguments)]
pub fn eval_weighted(
    parent: &LpSolution,
    problem: &MipProblem,
    j: usize,
    budget: &PivotBudget,
    incumbent: &Incumbent,
    flavor: EvalFlavor,
    weights: &Weights,
    uc: &UnitCosts,
) -> Result<BranchEval, LpError> {
    let (mut be, _, _) = eval_plain(parent, problem, j, budget, incumbent)?;
    be.apply_flavor(weights, flavor, uc);
    Ok(be)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    C0,
    C1,
    C2a,
    C2b,
    C3,
    C4,
    C5,
    C6,
    C7,
    Vote,
}

impl std::str::FromStr for CriterionId {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "c0" => CriterionId::C0,
            "c1" => CriterionId::C1,
            "c2a" | "c2" => CriterionId::C2a,
            "c2b" => CriterionId::C2b,
            "c3" => CriterionId::C3,
            "c4" => CriterionId::C4,
            "c5" => CriterionId::C5,
            "c6" => CriterionId::C6,
            "c7" => CriterionId::C7,
            "vote" => CriterionId::Vote,
            _ => return Err(SolveError::Config(format!("unknown criterion `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: CriterionId,
    /// Exponent for C2 (default 1) and C5 (default 0.3).
    pub p: f64,
    pub lambda: f64,
    pub mu: f64,
    pub weights: Weights,
    /// Replace `|Eval+ - Eval-|^p` by `Max^p` in C2.
    pub max_power: bool,
    /// Flavor used by C0..C5; C6 always uses D1/D2 and C7 D3/D4.
    pub flavor: EvalFlavor,
    pub voters: Vec<CriterionSpec>,
}

impl CriterionSpec {
    pub fn new(id: CriterionId) -> Self {
        let mut spec = CriterionSpec {
            id,
            p: 1.0,
            lambda: 0.75,
            mu: 1.0 / 6.0,
            weights: Weights::default(),
            max_power: false,
            flavor: EvalFlavor::Plain,
            voters: Vec::new(),
        };
        match id {
            CriterionId::C5 => spec.p = 0.3,
            CriterionId::Vote => {
                spec.voters = vec![
                    CriterionSpec::new(CriterionId::C1),
                    CriterionSpec::new(CriterionId::C4),
                    CriterionSpec::new(CriterionId::C5),
                ]
            }
            _ => {}
        }
        spec
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if !(self.p >= 0.0) {
            return bad("p must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad("mu must lie in [0, 1]");
        }
        if !(self.weights.w1 >= 0.0 && self.weights.w2 >= 0.0) {
            return bad("weights must be nonnegative");
        }
        if self.id == CriterionId::Vote && self.voters.len() < 2 {
            return bad("a vote needs at least two criteria");
        }
        for v in &self.voters {
            v.validate()?;
        }
        Ok(())
    }

    /// Flavor the criterion's evaluations must be computed with.
    pub fn required_flavor(&self) -> EvalFlavor {
        match self.id {
            CriterionId::C6 => EvalFlavor::D1D2,
            CriterionId::C7 => EvalFlavor::D3D4,
            _ => self.flavor,
        }
    }

    /// Same criterion without the weighted terms, for probes that cannot
    /// supply fractional sets or infeasibility sums.
    pub fn degraded(&self) -> CriterionSpec {
        let mut s = self.clone();
        if matches!(self.id, CriterionId::C6 | CriterionId::C7) {
            s.weights.w2 = 0.0;
            s.weights.w1 = 0.0;
        }
        s.flavor = EvalFlavor::Plain;
        s.voters = s.voters.iter().map(|v| v.degraded()).collect();
        s
    }

    fn minimizes(&self) -> bool {
        matches!(self.id, CriterionId::C6 | CriterionId::C7)
    }

    /// Score of one evaluation (larger is better, except for C6/C7).
    /// C3 scores by `|Eval+ - Eval-|`; its threshold is applied in `rank`.
    pub fn score(&self, e: &BranchEval) -> f64 {
        let z = |v: f64| v.max(ZERO_SUBSTITUTE);
        let (up, down, max, min, diff) = (e.eval_up, e.eval_down, e.max(), e.min(), e.diff());
        let s = match self.id {
            CriterionId::C0 => self.mu * max + (1.0 - self.mu) * min,
            CriterionId::C1 => z(up) * z(down),
            CriterionId::C2a => {
                let t = if self.max_power {
                    max.powf(self.p)
                } else {
                    diff.powf(self.p)
                };
                z(up) * z(down) * z(t)
            }
            CriterionId::C2b => {
                let t = if self.max_power {
                    max.powf(self.p)
                } else {
                    diff.powf(self.p)
                };
                z(min) * z(t)
            }
            CriterionId::C3 => diff,
            CriterionId::C4 => z(max) * z(diff),
            CriterionId::C5 => z(z(min).powf(self.p)) * z(up + down),
            CriterionId::C6 | CriterionId::C7 => min,
            CriterionId::Vote => 0.0,
        };
        if s.is_nan() {
            if self.minimizes() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            s
        }
    }

    /// Positions of `evals` ordered from best to worst.
    pub fn rank(&self, evals: &[BranchEval]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..evals.len()).collect();
        match self.id {
            CriterionId::C3 => {
                let threshold = c3_threshold(evals, self.lambda);
                let eligible = |e: &BranchEval| e.min() >= threshold;
                idx.sort_by(|&a, &b| {
                    let (ea, eb) = (&evals[a], &evals[b]);
                    let key = match (eligible(ea), eligible(eb)) {
                        (true, false) => std::cmp::Ordering::Less,
                        (false, true) => std::cmp::Ordering::Greater,
                        (true, true) => eb.diff().total_cmp(&ea.diff()),
                        (false, false) => eb.min().total_cmp(&ea.min()),
                    };
                    key.then(ea.var.cmp(&eb.var))
                });
            }
            CriterionId::Vote => {
                let (winner, _) = vote(evals, &self.voters);
                idx.sort_by_key(|&a| (evals[a].var != winner, evals[a].var));
                // remaining order by the first voter
                let first = self.voters.first().cloned();
                if let Some(first) = first {
                    let order = first.rank(evals);
                    let mut rest: Vec<usize> = order
                        .into_iter()
                        .filter(|&a| evals[a].var != winner)
                        .collect();
                    let mut out: Vec<usize> = idx
                        .iter()
                        .copied()
                        .filter(|&a| evals[a].var == winner)
                        .collect();
                    out.append(&mut rest);
                    idx = out;
                }
            }
            _ => {
                let scores: Vec<f64> = evals.iter().map(|e| self.score(e)).collect();
                let minimize = self.minimizes();
                idx.sort_by(|&a, &b| {
                    let o = if minimize {
                        scores[a].total_cmp(&scores[b])
                    } else {
                        scores[b].total_cmp(&scores[a])
                    };
                    o.then(evals[a].var.cmp(&evals[b].var))
                });
            }
        }
        idx
    }
}

/// `T(lambda) = MinMin + lambda (MaxMin - MinMin)`.
pub fn c3_threshold(evals: &[BranchEval], lambda: f64) -> f64 {
    let mins = evals.iter().map(BranchEval::min);
    let min_min = mins.clone().fold(f64::INFINITY, f64::min);
    let max_min = mins.fold(f64::NEG_INFINITY, f64::max);
    let t = min_min + lambda * (max_min - min_min);
    if t.is_nan() {
        max_min
    } else {
        t
    }
}

/// Outcome of a selection: winner, direction, and the score of each candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub var: usize,
    pub direction: Direction,
    pub scores: Vec<(usize, f64)>,
}

/// Pick a winning variable and direction from a nonempty evaluation list.
pub fn select(evals: &[BranchEval], spec: &CriterionSpec) -> Option<Selection> {
    if evals.is_empty() {
        return None;
    }
    if spec.id == CriterionId::Vote {
        let (var, direction) = vote(evals, &spec.voters);
        return Some(Selection {
            var,
            direction,
            scores: Vec::new(),
        });
    }
    let order = spec.rank(evals);
    let best = &evals[order[0]];
    Some(Selection {
        var: best.var,
        direction: best.direction(),
        scores: evals.iter().map(|e| (e.var, spec.score(e))).collect(),
    })
}

/// Plurality vote over the winners of several criteria.
pub fn vote(evals: &[BranchEval], specs: &[CriterionSpec]) -> (usize, Direction) {
    let picks: Vec<(usize, Direction)> = specs
        .iter()
        .filter_map(|s| select(evals, s).map(|sel| (sel.var, sel.direction)))
        .collect();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (v, _) in &picks {
        *counts.entry(*v).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let winner = counts
        .iter()
        .find(|(_, &c)| c == top)
        .map(|(&v, _)| v)
        .unwrap_or(evals[0].var);
    let ups = picks
        .iter()
        .filter(|(v, d)| *v == winner && *d == Direction::Up)
        .count();
    let downs = picks
        .iter()
        .filter(|(v, d)| *v == winner && *d == Direction::Down)
        .count();
    let direction = if ups > downs {
        Direction::Up
    } else if downs > ups {
        Direction::Down
    } else {
        evals
            .iter()
            .find(|e| e.var == winner)
            .map_or(Direction::Down, BranchEval::direction)
    };
    (winner, direction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(var: usize, up: f64, down: f64) -> BranchEval {
        BranchEval::from_values(var, up, down)
    }

    #[test]
    fn c1_and_c2a_diverge() {
        let evals = [ev(0, 2.0, 3.0), ev(1, 1.0, 5.0)];
        let c1 = select(&evals, &CriterionSpec::new(CriterionId::C1)).unwrap();
        assert_eq!((c1.var, c1.direction), (0, Direction::Up));
        let c2 = select(&evals, &CriterionSpec::new(CriterionId::C2a)).unwrap();
        assert_eq!(c2.var, 1);
        assert_eq!(c2.scores, vec![(0, 6.0), (1, 20.0)]);
    }

    #[test]
    fn c3_threshold_example() {
        let evals = [ev(0, 1.0, 9.0), ev(1, 2.0, 2.5), ev(2, 5.0, 5.5)];
        assert_eq!(c3_threshold(&evals, 0.75), 4.0);
        let s = select(&evals, &CriterionSpec::new(CriterionId::C3)).unwrap();
        assert_eq!(s.var, 2);
    }

    #[test]
    fn degenerate_product_uses_substitute() {
        let s = CriterionSpec::new(CriterionId::C1);
        assert_eq!(s.score(&ev(0, 0.0, 4.0)), ZERO_SUBSTITUTE * 4.0);
    }

    #[test]
    fn d1_example() {
        let mut e = ev(0, 2.0, 1.0);
        e.frac_up = vec![
            Fractional {
                var: 1,
                value: 0.4,
                f_plus: 0.6,
                f_minus: 0.4,
            },
            Fractional {
                var: 2,
                value: 0.9,
                f_plus: 0.1,
                f_minus: 0.9,
            },
        ];
        e.apply_flavor(&Weights::default(), EvalFlavor::D1D2, &UnitCosts::default());
        assert!((e.eval_up - 52.0).abs() < 1e-12);
        let zero = Weights {
            w1: 0.0,
            w2: 0.0,
            top_k: None,
        };
        e.apply_flavor(&zero, EvalFlavor::D3D4, &UnitCosts::default());
        assert_eq!((e.eval_up, e.eval_down), (2.0, 1.0));
    }

    #[test]
    fn d3_min_cost() {
        let mut uc = UnitCosts::default();
        uc.measured.insert(4, (4.0, 10.0));
        let f = Fractional {
            var: 4,
            value: 0.75,
            f_plus: 0.25,
            f_minus: 0.75,
        };
        assert_eq!(uc.min_costs(&[f]), vec![1.0]);
    }

    #[test]
    fn vote_rules() {
        let evals = [ev(0, 1.0, 1.0), ev(3, 4.0, 6.0), ev(5, 0.5, 9.0)];
        let specs = vec![
            CriterionSpec::new(CriterionId::C1),
            CriterionSpec::new(CriterionId::C4),
            CriterionSpec::new(CriterionId::C5),
        ];
        let winners: Vec<usize> = specs
            .iter()
            .map(|s| select(&evals, s).unwrap().var)
            .collect();
        let (w, _) = vote(&evals, &specs);
        let mut counts = BTreeMap::new();
        for v in &winners {
            *counts.entry(*v).or_insert(0) += 1;
        }
        let top = *counts.values().max().unwrap();
        assert_eq!(w, *counts.iter().find(|(_, &c)| c == top).unwrap().0);
    }

    #[test]
    fn unit_cost_epsilon() {
        assert_eq!(unit_cost(0.0, 0.5), UC_EPSILON / 0.5);
        assert_eq!(unit_cost(2.0, 0.5), 4.0);
    }
}
