//! Tree expansion backed by LP solves and winnowing.

use std::collections::BTreeMap;

use super::{
    build_tree, Candidate, Expansion, LookaheadConfig, PostWinnow, TreeOracle, TreeResult,
};
use crate::criteria::{unit_cost, BranchEval, CriterionSpec, EvalFlavor, UnitCosts};
use crate::error::{LpError, SolveError};
use crate::lp::{
    apply_branch, apply_reversal_update, rebound, Direction, LpSolution, LpStatus, PivotBudget,
};
use crate::model::{
    detect_fractional, update_incumbent, BoundChange, Fractional, Incumbent, MipProblem,
};
use crate::straddle::straddle_child;
use crate::trace::{finite, Counters, ReversalRecord, TreeNodeStatus};
use crate::winnow::{stage1_with, stage2, Estimate, Stage1, WinnowParams};

/// A solved node together with the branches that lead to it.
#[derive(Debug, Clone)]
pub struct LpNode {
    pub sol: LpSolution,
    /// Every restriction from the branch-and-bound root, in order.
    pub path: Vec<BoundChange>,
    pub fractional: Vec<Fractional>,
}

impl LpNode {
    pub fn new(sol: LpSolution, path: Vec<BoundChange>, problem: &MipProblem) -> Self {
        let fractional = detect_fractional(&sol, problem);
        LpNode {
            sol,
            path,
            fractional,
        }
    }

    pub fn objective(&self) -> f64 {
        self.sol.objective
    }
}

/// A completed child solve, kept for cost memories.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub depth: usize,
    /// Path of the node that was branched.
    pub parent_path: Vec<BoundChange>,
    pub var: usize,
    pub dir: Direction,
    /// `(x_oj - x_o) / f`; meaningful only when `feasible`.
    pub unit_cost: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncumbentFound {
    pub x: Vec<f64>,
    pub objective: f64,
    pub path: Vec<BoundChange>,
}

/// Expands tree nodes with winnowing and full child solves.
pub struct LpOracle<'a> {
    pub problem: &'a MipProblem,
    pub params: WinnowParams,
    pub spec: CriterionSpec,
    pub incumbent: &'a mut Incumbent,
    pub counters: &'a mut Counters,
    /// Budget of the full child solves.
    pub budget: PivotBudget,
    /// Stands in for stage-1 probes at depth 0.
    pub estimate: Option<Estimate<'a>>,
    /// Simplified mode: D3/D4 evaluations below depth 0, with unit costs
    /// measured at depth 0 as the fallback.
    pub d2_flavor: bool,
    root_uc: BTreeMap<usize, (f64, f64)>,
    pub found: Vec<IncumbentFound>,
    pub solves: Vec<SolveRecord>,
}

impl<'a> LpOracle<'a> {
    pub fn new(
        problem: &'a MipProblem,
        params: WinnowParams,
        spec: CriterionSpec,
        incumbent: &'a mut Incumbent,
        counters: &'a mut Counters,
    ) -> Self {
        LpOracle {
            problem,
            params,
            spec,
            incumbent,
            counters,
            budget: PivotBudget::default(),
            estimate: None,
            d2_flavor: false,
            root_uc: BTreeMap::new(),
            found: Vec::new(),
            solves: Vec::new(),
        }
    }

    fn avg_pivots(&self) -> f64 {
        if self.counters.lp_solves == 0 {
            0.0
        } else {
            self.counters.pivots as f64 / self.counters.lp_solves as f64
        }
    }

    fn full_budget(&self) -> PivotBudget {
        crate::criteria::child_budget(&self.budget, self.incumbent)
    }

    fn step(&self, node: &LpNode, j: usize, dir: Direction) -> BoundChange {
        let mut b = BoundChange::branch(j, dir, node.sol.x[j]);
        b.straddle = self.params.straddle;
        b
    }

    /// Solve one child of `node` to completion.
    pub fn solve_child(
        &mut self,
        node: &LpNode,
        j: usize,
        dir: Direction,
    ) -> Result<LpSolution, LpError> {
        let budget = self.full_budget();
        let sol = if self.params.straddle {
            straddle_child(&node.sol, self.problem, j, dir, &budget)?
        } else {
            apply_branch(&node.sol, j, dir)?.solve(&budget)?
        };
        self.counters.add_solve(sol.pivots);
        Ok(sol)
    }

    /// Finish a budgeted child solve.
    fn complete(&mut self, sol: &LpSolution) -> Result<LpSolution, LpError> {
        if sol.status != LpStatus::PivotLimitHit {
            return Ok(sol.clone());
        }
        let done = sol.resume(&self.full_budget())?;
        self.counters.add_solve(done.pivots - sol.pivots);
        Ok(done)
    }

    /// Turn a child solution into a tree node, or `None` when it is
    /// infeasible, cannot beat the incumbent, or is itself a new incumbent.
    pub fn admit(
        &mut self,
        sol: LpSolution,
        parent: &LpNode,
        step: BoundChange,
    ) -> Result<Option<LpNode>, SolveError> {
        if matches!(
            sol.status,
            LpStatus::Infeasible | LpStatus::CutoffInfeasible
        ) || self.incumbent.prunes(sol.objective)
        {
            return Ok(None);
        }
        let mut path = parent.path.clone();
        path.push(step);
        let node = LpNode::new(sol, path, self.problem);
        if node.fractional.is_empty() && node.sol.status == LpStatus::Optimal {
            let depth = node.path.len();
            if update_incumbent(
                self.incumbent,
                self.problem,
                &node.sol.x,
                node.sol.objective,
                depth,
            )?
            .is_some()
            {
                self.found.push(IncumbentFound {
                    x: self
                        .incumbent
                        .x
                        .clone()
                        .unwrap_or_else(|| node.sol.x.clone()),
                    objective: self.incumbent.objective,
                    path: node.path.clone(),
                });
            }
            return Ok(None);
        }
        Ok(Some(node))
    }

    /// Whether a budgeted child already shows its branch is closed.
    fn closed(
        &mut self,
        sol: &LpSolution,
        parent: &LpNode,
        step: BoundChange,
    ) -> Result<bool, SolveError> {
        match sol.status {
            LpStatus::Infeasible | LpStatus::CutoffInfeasible => Ok(true),
            LpStatus::PivotLimitHit => Ok(false),
            LpStatus::Optimal => Ok(self.admit(sol.clone(), parent, step)?.is_none()),
        }
    }

    fn compulsory(
        &mut self,
        node: &LpNode,
        j: usize,
        dir: Direction,
        solved: Option<LpSolution>,
    ) -> Result<Expansion<LpNode>, SolveError> {
        self.counters.compulsory += 1;
        let sol = match solved {
            Some(s) => self.complete(&s)?,
            None => self.solve_child(node, j, dir)?,
        };
        let mut step = self.step(node, j, dir);
        step.compulsory = true;
        Ok(match self.admit(sol, node, step)? {
            Some(child) => Expansion::Compulsory { var: j, dir, child },
            None => Expansion::Infeasible,
        })
    }

    fn mark_missing(&self, e: &mut BranchEval, dir: Direction, parent: f64) {
        let gap = self.incumbent.objective - parent;
        match dir {
            Direction::Up => {
                e.up_infeasible = true;
                e.plain_up = gap;
                e.eval_up = gap;
                e.uc_up = unit_cost(gap, e.f_plus);
            }
            Direction::Down => {
                e.down_infeasible = true;
                e.plain_down = gap;
                e.eval_down = gap;
                e.uc_down = unit_cost(gap, e.f_minus);
            }
        }
    }
}

impl TreeOracle for LpOracle<'_> {
    type Node = LpNode;

    fn objective(&self, node: &LpNode) -> f64 {
        node.sol.objective
    }

    fn fractionality(&self, node: &LpNode) -> f64 {
        node.fractional.iter().map(Fractional::min_part).sum()
    }

    fn incumbent_objective(&self) -> f64 {
        self.incumbent.objective
    }

    fn prunes(&self, objective: f64) -> bool {
        self.incumbent.prunes(objective)
    }

    fn expand(
        &mut self,
        node: &LpNode,
        depth: usize,
        excluded: &[usize],
    ) -> Result<Expansion<LpNode>, SolveError> {
        let fracs: Vec<Fractional> = node
            .fractional
            .iter()
            .filter(|f| !excluded.contains(&f.var))
            .copied()
            .collect();
        if fracs.is_empty() {
            return Ok(Expansion::Leaf);
        }
        let estimate = if depth == 0 { self.estimate } else { None };
        let st1 = stage1_with(
            &node.sol,
            self.problem,
            &fracs,
            &self.params,
            &self.spec,
            self.incumbent,
            self.counters,
            estimate,
        )?;
        let Stage1::Candidates { f1, probes, .. } = st1 else {
            return Ok(Expansion::Leaf);
        };
        // a probe with no eligible pivot proves its child infeasible
        for e in &probes {
            match (e.up_infeasible, e.down_infeasible) {
                (true, true) => return Ok(Expansion::Infeasible),
                (true, false) => return self.compulsory(node, e.var, Direction::Down, None),
                (false, true) => return self.compulsory(node, e.var, Direction::Up, None),
                _ => {}
            }
        }
        let n2 = self.params.n2_at(depth);
        let k2 = self.params.k2_for(self.avg_pivots());
        let st2 = stage2(
            &node.sol,
            self.problem,
            &f1,
            &fracs,
            n2,
            k2,
            &self.params,
            &self.spec,
            self.incumbent,
            self.counters,
        )?;
        for &j in &f1 {
            let (up, down) = &st2.children[&j];
            let up_closed = self.closed(up, node, self.step(node, j, Direction::Up))?;
            let down_closed = self.closed(down, node, self.step(node, j, Direction::Down))?;
            match (up_closed, down_closed) {
                (true, true) => return Ok(Expansion::Infeasible),
                (true, false) => {
                    return self.compulsory(node, j, Direction::Down, Some(down.clone()))
                }
                (false, true) => return self.compulsory(node, j, Direction::Up, Some(up.clone())),
                _ => {}
            }
        }
        let mut finals = Vec::with_capacity(st2.f2.len());
        let mut kids = Vec::with_capacity(st2.f2.len());
        for &j in &st2.f2 {
            let (up_b, down_b) = &st2.children[&j];
            let up = self.complete(up_b)?;
            let down = self.complete(down_b)?;
            let mut e = BranchEval::from_children(
                j,
                &node.sol,
                &up,
                &down,
                self.problem,
                self.incumbent.objective,
            );
            let up_node = self.admit(up, node, self.step(node, j, Direction::Up))?;
            let down_node = self.admit(down, node, self.step(node, j, Direction::Down))?;
            for (dir, child) in [(Direction::Up, &up_node), (Direction::Down, &down_node)] {
                if child.is_none() {
                    self.mark_missing(&mut e, dir, node.sol.objective);
                }
                let uc = match dir {
                    Direction::Up => e.uc_up,
                    Direction::Down => e.uc_down,
                };
                self.solves.push(SolveRecord {
                    depth,
                    parent_path: node.path.clone(),
                    var: j,
                    dir,
                    unit_cost: uc,
                    feasible: child.is_some(),
                });
            }
            match (up_node, down_node) {
                (None, None) => return Ok(Expansion::Infeasible),
                (None, Some(child)) => {
                    self.counters.compulsory += 1;
                    return Ok(Expansion::Compulsory {
                        var: j,
                        dir: Direction::Down,
                        child,
                    });
                }
                (Some(child), None) => {
                    self.counters.compulsory += 1;
                    return Ok(Expansion::Compulsory {
                        var: j,
                        dir: Direction::Up,
                        child,
                    });
                }
                (Some(u), Some(d)) => kids.push((u, d)),
            }
            finals.push(e);
        }
        // unit costs: final solves first, then budgeted ones, then the root
        let mut uc = UnitCosts::new(&st2.evals, Some(&node.sol));
        for e in &finals {
            uc.measured.insert(e.var, (e.uc_up, e.uc_down));
        }
        let flavor = if self.d2_flavor && depth >= 1 {
            uc.fallback = self.root_uc.clone();
            EvalFlavor::D3D4
        } else {
            self.spec.required_flavor()
        };
        if depth == 0 {
            self.root_uc = uc.measured.clone();
        }
        for e in &mut finals {
            e.apply_flavor(&self.spec.weights, flavor, &uc);
        }
        let order = self.spec.rank(&finals);
        let mut slots: Vec<Option<(BranchEval, (LpNode, LpNode))>> =
            finals.into_iter().zip(kids).map(Some).collect();
        let candidates = order
            .into_iter()
            .map(|i| {
                let (eval, (u, d)) = slots[i].take().expect("rank is a permutation");
                Candidate {
                    var: eval.var,
                    eval,
                    up: Some(u),
                    down: Some(d),
                }
            })
            .collect();
        let others = probes
            .iter()
            .filter(|e| f1.contains(&e.var) && !st2.f2.contains(&e.var))
            .map(|e| (e.var, e.direction()))
            .collect();
        Ok(Expansion::Branch { candidates, others })
    }
}

/// `(n2(0), n2(1))` for `|F| = f` fractional variables and ratio `v`, so
/// that `n2(0) + 2 n2(1)` is about `f` with `n2(0) = v n2(1)`.
pub fn d2_budget(f: usize, v: f64) -> (usize, usize) {
    let n1 = ((f as f64 / (v + 2.0)).round() as usize).max(1);
    let n0 = ((v * n1 as f64).round() as usize).max(1);
    (n0, n1)
}

/// The simplified shallow tree: winnowing reduced to a pass-through, the
/// stage-2 budgets taken from [`d2_budget`].
pub fn build_d2_tree(
    oracle: &mut LpOracle<'_>,
    root: LpNode,
    cfg: &LookaheadConfig,
) -> Result<TreeResult<LpNode>, SolveError> {
    let v = cfg.d2_ratio.unwrap_or(1.0);
    let (n0, n1) = d2_budget(root.fractional.len(), v);
    let saved = (oracle.params.clone(), oracle.d2_flavor);
    oracle.params.n1 = Some(usize::MAX);
    oracle.params.k2 = Some(1);
    oracle.params.n2 = vec![n0, n1];
    oracle.d2_flavor = true;
    let mut c = cfg.clone();
    c.post_winnow = PostWinnow::Off;
    c.depth = cfg.depth.clamp(2, 3);
    let out = build_tree(oracle, root, &c);
    oracle.params = saved.0;
    oracle.d2_flavor = saved.1;
    out
}

/// `T = beta * avg|RC| + (1 - beta) * max|RC|`.
pub fn reversal_threshold(rcs: &[f64], beta: f64) -> f64 {
    if rcs.is_empty() {
        return f64::INFINITY;
    }
    let avg = rcs.iter().sum::<f64>() / rcs.len() as f64;
    let max = rcs.iter().copied().fold(0.0, f64::max);
    beta * avg + (1.0 - beta) * max
}

/// Reverse the most resistant bound imposed inside a look-ahead tree.
///
/// Candidates are nonbasic variables of the deepest tree nodes resting on a
/// bound created by an explicit branch of the tree. The one with the
/// largest `|RC|` at or above the threshold is reversed and re-solved with
/// the restrictions imposed after it dropped.
pub fn try_reversal(
    tree: &TreeResult<LpNode>,
    problem: &MipProblem,
    beta: f64,
    budget: &PivotBudget,
    bb_node: usize,
) -> Result<Option<(ReversalRecord, LpSolution)>, SolveError> {
    let Some(root) = tree.root.as_ref() else {
        return Ok(None);
    };
    let base = root.path.len();
    let deepest = tree
        .nodes
        .iter()
        .filter(|n| n.status == TreeNodeStatus::Open)
        .map(|n| n.depth)
        .max();
    let Some(deepest) = deepest else {
        return Ok(None);
    };
    // (leaf, step index, |RC|)
    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for n in tree
        .nodes
        .iter()
        .filter(|n| n.status == TreeNodeStatus::Open && n.depth == deepest)
    {
        let sol = &n.state.sol;
        for (s, step) in n.state.path.iter().enumerate().skip(base) {
            if step.compulsory || step.straddle || sol.is_basic(step.var) {
                continue;
            }
            // the branch's bound must still be the active one
            if n.state.path[s + 1..]
                .iter()
                .any(|b| b.var == step.var && !b.straddle)
            {
                continue;
            }
            let at_bound = match step.dir {
                Direction::Up => {
                    !sol.at_upper(step.var) && sol.model().lower()[step.var] == step.bound
                }
                Direction::Down => {
                    sol.at_upper(step.var) && sol.model().upper()[step.var] == step.bound
                }
            };
            let rc = sol.reduced_costs[step.var].abs();
            if at_bound && rc > 0.0 {
                cands.push((n.id, s, rc));
            }
        }
    }
    let rcs: Vec<f64> = cands.iter().map(|c| c.2).collect();
    let threshold = reversal_threshold(&rcs, beta);
    let Some(&(leaf, s, rc)) = cands
        .iter()
        .filter(|c| c.2 >= threshold)
        .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
    else {
        return Ok(None);
    };
    let node = &tree.nodes[leaf].state;
    let step = node.path[s];
    let j = step.var;
    // bounds in force just before the reversed branch
    let mut lower = problem.lp.lower().to_vec();
    let mut upper = problem.lp.upper().to_vec();
    for b in &node.path[..s] {
        b.apply(&mut lower, &mut upper);
    }
    let antecedent = match step.dir {
        Direction::Up => lower[j],
        Direction::Down => upper[j],
    };
    let mut sol = apply_reversal_update(&node.sol, j, antecedent)?.solve(budget)?;
    if s + 1 < node.path.len() {
        let mut model = sol.model().clone();
        for k in 0..model.num_cols() {
            let (lo, hi) = if k == j {
                (model.lower()[k], model.upper()[k])
            } else {
                (lower[k], upper[k])
            };
            model.set_bounds(k, lo, hi)?;
        }
        sol = rebound(&sol, model)?.solve(budget)?;
    }
    let record = ReversalRecord {
        node: bb_node,
        var: j,
        reduced_cost: rc,
        threshold,
        span: (step.bound - antecedent).abs(),
        dropped: node.path.len() - s - 1,
        before: finite(node.sol.objective),
        after: match sol.status {
            LpStatus::Optimal => finite(sol.objective),
            _ => None,
        },
    };
    Ok(Some((record, sol)))
}
