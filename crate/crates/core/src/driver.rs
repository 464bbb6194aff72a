//! Depth-first and Dval-guided branch and bound over the winnowing and
//! look-ahead machinery.

use std::cell::RefCell;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::costs::{
    Analytical, AnalyticalThresholds, DvalApproach, DvalTables, ExtNodeId, ExtendedTree, PathStep,
    PseudoCostTable, ReferenceSet,
};
use crate::criteria::{select, BranchEval, CriterionId, CriterionSpec, UnitCosts};
use crate::error::{LpError, SolveError};
use crate::lookahead::{
    build_d2_tree, build_tree, try_reversal, Candidate, Expansion, IncumbentFound, LookaheadConfig,
    LpNode, LpOracle, SolveRecord, TreeOracle, TreeOutcome, TreeResult,
};
use crate::lp::{self, Direction, LpStatus, PivotBudget};
use crate::model::{update_incumbent, BoundChange, Fractional, Incumbent, MipProblem};
use crate::trace::{
    finite, BranchRecord, CalibrationTrace, Counters, FinalStatus, IncumbentEvent, NodeRecord,
    NodeStatus, PruneReason, RunTrace, TRACE_SCHEMA_VERSION,
};
use crate::winnow::{stage0, WinnowParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoMode {
    #[default]
    Off,
    Classic,
    Analytical,
}

impl FromStr for PseudoMode {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "off" | "none" => PseudoMode::Off,
            "classic" => PseudoMode::Classic,
            "analytical" => PseudoMode::Analytical,
            _ => {
                return Err(SolveError::Config(format!(
                    "unknown pseudo-cost mode `{s}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelect {
    #[default]
    DepthFirst,
    Dval,
}

impl FromStr for NodeSelect {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "dfs" | "depth-first" => NodeSelect::DepthFirst,
            "dval" => NodeSelect::Dval,
            _ => return Err(SolveError::Config(format!("unknown node selection `{s}`"))),
        })
    }
}

/// Everything that shapes one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub name: String,
    pub criterion: CriterionSpec,
    pub winnow: WinnowParams,
    /// `None` branches on the winnowed candidates directly.
    pub lookahead: Option<LookaheadConfig>,
    pub pseudo: PseudoMode,
    pub analytical: AnalyticalThresholds,
    pub refset: bool,
    pub refset_theta: f64,
    pub refset_p: f64,
    pub refset_alt_normalization: bool,
    pub reversals: bool,
    pub beta: f64,
    pub node_select: NodeSelect,
    pub dval_approach: DvalApproach,
    /// Size of the fixed candidate list chosen at the root.
    pub clist: Option<usize>,
    pub max_nodes: Option<u64>,
    pub max_time: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            name: "default".into(),
            criterion: CriterionSpec::new(CriterionId::C2a),
            winnow: WinnowParams::default(),
            lookahead: Some(LookaheadConfig::default()),
            pseudo: PseudoMode::Off,
            analytical: AnalyticalThresholds::default(),
            refset: false,
            refset_theta: 0.5,
            refset_p: 0.5,
            refset_alt_normalization: false,
            reversals: false,
            beta: 0.5,
            node_select: NodeSelect::DepthFirst,
            dval_approach: DvalApproach::FixedWo,
            clist: None,
            max_nodes: None,
            max_time: None,
            epsilon: 1e-6,
            seed: 0,
        }
    }
}

impl SolveConfig {
    /// Plain winnowing without trees.
    pub fn plain() -> Self {
        SolveConfig {
            name: "plain".into(),
            lookahead: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.criterion.validate()?;
        if let Some(la) = &self.lookahead {
            la.validate(self.winnow.n2_at(0))?;
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(SolveError::Config("beta must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.refset_theta) {
            return Err(SolveError::Config("theta must lie in [0, 1]".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SolveError::Config("epsilon must be nonnegative".into()));
        }
        if self.clist == Some(0) {
            return Err(SolveError::Config(
                "the candidate list needs at least one entry".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: FinalStatus,
    /// Best objective found, with the model's constant included.
    pub objective: Option<f64>,
    /// Proven lower bound, with the constant included.
    pub bound: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub elapsed: Duration,
    pub trace: RunTrace,
}

/// What node selection sees of an open node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenView {
    pub depth: usize,
    /// Objective change from the parent's relaxation.
    pub delta: f64,
    pub min_cost: f64,
    /// Creation order.
    pub seq: u64,
}

/// Index of the node to explore next: the deepest, or the smallest Dval
/// when tables are given. Ties go to the most recently created node.
pub fn pick_next(open: &[OpenView], dval: Option<&DvalTables>) -> Option<usize> {
    let key = |o: &OpenView| {
        let k = match dval {
            Some(t) => t.dval(o.depth.saturating_sub(1), o.delta, o.min_cost),
            None => -(o.depth as f64),
        };
        if k.is_nan() {
            f64::INFINITY
        } else {
            k
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in open.iter().enumerate() {
        let k = key(o);
        best = match best {
            Some((b, bk)) if bk < k || (bk == k && open[b].seq > o.seq) => Some((b, bk)),
            _ => Some((i, k)),
        };
    }
    best.map(|b| b.0)
}

struct OpenNode {
    id: usize,
    node: LpNode,
    depth: usize,
    /// Objective change from the parent's final relaxation.
    delta: f64,
    min_cost: f64,
    ext: Option<ExtNodeId>,
    seq: u64,
}

/// Per-node facts kept for calibration.
#[derive(Debug, Clone, Copy)]
struct BbInfo {
    parent: Option<usize>,
    depth: usize,
    created_obj: f64,
    /// Objective after compulsory branches.
    final_obj: f64,
    min_cost: f64,
}

/// A node created by one branching decision. Spawns come in push order;
/// later ones are explored first among equals.
struct Spawn {
    node: LpNode,
    /// Earlier spawn this one branches from; `None` for the expanded node.
    parent: Option<usize>,
    /// Unit cost of the branch, when measured.
    uc: Option<f64>,
    min_cost: f64,
    /// Intermediate nodes of an accepted path are branched on at once.
    open: bool,
}

struct Solver<'p> {
    problem: &'p MipProblem,
    cfg: SolveConfig,
    params: WinnowParams,
    incumbent: Incumbent,
    counters: Counters,
    trace: RunTrace,
    open: Vec<OpenNode>,
    info: Vec<BbInfo>,
    seq: u64,
    popped: u64,
    pseudo: PseudoCostTable,
    ext: Option<RefCell<ExtendedTree>>,
    refset: Option<ReferenceSet>,
    dval: DvalTables,
    start: Instant,
}

/// Solve `problem` under `cfg`.
pub fn solve_mip(problem: &MipProblem, cfg: &SolveConfig) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut counters = Counters::default();
    let root_sol = solve_root(problem, &mut counters)?;
    let mut s = Solver {
        problem,
        cfg: cfg.clone(),
        params: cfg.winnow.clone(),
        incumbent: Incumbent::new(cfg.epsilon),
        counters,
        trace: RunTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            instance: problem.name.clone(),
            strategy: cfg.name.clone(),
            seed: cfg.seed,
            status: FinalStatus::Infeasible,
            objective: None,
            bound: None,
            solution: None,
            counters: Counters::default(),
            nodes: Vec::new(),
            incumbents: Vec::new(),
            reversals: Vec::new(),
            trees: Vec::new(),
            calibrations: Vec::new(),
            extended: None,
        },
        open: Vec::new(),
        info: Vec::new(),
        seq: 0,
        popped: 0,
        pseudo: PseudoCostTable::new(),
        ext: (cfg.pseudo == PseudoMode::Analytical)
            .then(|| RefCell::new(ExtendedTree::new(cfg.seed))),
        refset: None,
        dval: DvalTables::new(cfg.dval_approach),
        start,
    };
    s.params.straddle = cfg.winnow.straddle;
    s.run(root_sol)?;
    let elapsed = start.elapsed();
    let offset = problem.objective_offset;
    let trace = &mut s.trace;
    trace.counters = s.counters.clone();
    trace.objective = finite(s.incumbent.objective).map(|v| v + offset);
    trace.solution = s.incumbent.x.clone();
    trace.extended = s.ext.map(RefCell::into_inner);
    Ok(SolveResult {
        status: trace.status,
        objective: trace.objective,
        bound: trace.bound,
        x: s.incumbent.x,
        elapsed,
        trace: s.trace,
    })
}

fn solve_root(problem: &MipProblem, counters: &mut Counters) -> Result<lp::LpSolution, SolveError> {
    let mut sol = lp::solve(&problem.lp, None, &PivotBudget::default())?;
    counters.add_solve(sol.pivots);
    // a stalled root gets a few more rounds before giving up
    for _ in 0..4 {
        if sol.status != LpStatus::PivotLimitHit {
            break;
        }
        let more = sol.resume(&PivotBudget::default())?;
        counters.add_solve(more.pivots - sol.pivots);
        sol = more;
    }
    if sol.status == LpStatus::PivotLimitHit {
        return Err(LpError::Precondition("root relaxation did not converge".into()).into());
    }
    Ok(sol)
}

/// What happened when a node was worked on.
enum Worked {
    Fathomed(PruneReason),
    Branched {
        implied: Vec<BoundChange>,
        final_obj: f64,
        scores: Vec<(usize, f64)>,
        children: Vec<Spawn>,
    },
}

impl Solver<'_> {
    fn run(&mut self, root_sol: lp::LpSolution) -> Result<(), SolveError> {
        let offset = self.problem.objective_offset;
        if root_sol.status != LpStatus::Optimal {
            self.record_root(None, NodeStatus::Infeasible, Some(PruneReason::Infeasible));
            self.trace.status = FinalStatus::Infeasible;
            return Ok(());
        }
        let root = LpNode::new(root_sol, Vec::new(), self.problem);
        if let Some(n) = self.cfg.clist {
            let pool = stage0(
                &root.fractional,
                &WinnowParams {
                    n0: Some(n),
                    clist: None,
                    ..self.params.clone()
                },
            );
            self.params.clist =
                Some(pool.map_or(Vec::new(), |p| p.iter().map(|f| f.var).collect()));
        }
        if self.cfg.refset {
            let mut r = ReferenceSet::new(root.sol.x.clone(), root.objective());
            r.theta = self.cfg.refset_theta;
            r.p = self.cfg.refset_p;
            r.alt_normalization = self.cfg.refset_alt_normalization;
            self.refset = Some(r);
        }
        let root_obj = root.objective();
        self.counters.nodes += 1;
        if root.fractional.is_empty() {
            self.record_root(Some(root_obj), NodeStatus::Integral, None);
            update_incumbent(&mut self.incumbent, self.problem, &root.sol.x, root_obj, 0)?;
            self.incumbent_event(0, self.incumbent.objective, 0);
            self.trace.status = FinalStatus::Optimal;
            self.trace.bound = Some(root_obj + offset);
            return Ok(());
        }
        self.record_root(Some(root_obj), NodeStatus::Open, None);
        self.info.push(BbInfo {
            parent: None,
            depth: 0,
            created_obj: root_obj,
            final_obj: root_obj,
            min_cost: 0.0,
        });
        let ext = self.ext.as_ref().map(|e| e.borrow().root());
        self.push_open(OpenNode {
            id: 0,
            node: root,
            depth: 0,
            delta: 0.0,
            min_cost: 0.0,
            ext,
            seq: 0,
        });
        let mut limit_hit = false;
        while let Some(next) = self.pop() {
            if self.incumbent.prunes(next.node.objective()) {
                self.close(next.id, NodeStatus::Pruned, Some(PruneReason::Bound));
                continue;
            }
            if self.over_limits() {
                self.open.push(next);
                limit_hit = true;
                break;
            }
            self.work(next)?;
        }
        let best_open = self
            .open
            .iter()
            .map(|o| o.node.objective())
            .fold(f64::INFINITY, f64::min);
        for o in std::mem::take(&mut self.open) {
            self.close(o.id, NodeStatus::Open, Some(PruneReason::Limit));
        }
        let bound = best_open.min(self.incumbent.objective);
        self.trace.bound = finite(bound).map(|b| b + offset);
        self.trace.status = match (limit_hit, self.incumbent.exists()) {
            (false, true) => FinalStatus::Optimal,
            (false, false) => FinalStatus::Infeasible,
            (true, _) => FinalStatus::LimitHit,
        };
        Ok(())
    }

    fn over_limits(&self) -> bool {
        self.cfg.max_nodes.is_some_and(|m| self.counters.nodes >= m)
            || self
                .cfg
                .max_time
                .is_some_and(|t| self.start.elapsed().as_secs_f64() > t)
    }

    fn record_root(
        &mut self,
        objective: Option<f64>,
        status: NodeStatus,
        reason: Option<PruneReason>,
    ) {
        self.trace.nodes.push(NodeRecord {
            id: 0,
            parent: None,
            depth: 0,
            branch: None,
            objective: objective.map(|o| o + self.problem.objective_offset),
            status,
            implied: Vec::new(),
            scores: Vec::new(),
            prune_reason: reason,
            popped: None,
        });
    }

    fn close(&mut self, id: usize, status: NodeStatus, reason: Option<PruneReason>) {
        let r = &mut self.trace.nodes[id];
        r.status = status;
        r.prune_reason = reason;
    }

    fn push_open(&mut self, mut o: OpenNode) {
        self.seq += 1;
        o.seq = self.seq;
        self.open.push(o);
    }

    /// Before the first incumbent Dval runs on the default weights.
    fn pop(&mut self) -> Option<OpenNode> {
        let views: Vec<OpenView> = self
            .open
            .iter()
            .map(|o| OpenView {
                depth: o.depth,
                delta: o.delta,
                min_cost: o.min_cost,
                seq: o.seq,
            })
            .collect();
        let dval = (self.cfg.node_select == NodeSelect::Dval).then_some(&self.dval);
        let best = pick_next(&views, dval)?;
        let o = self.open.swap_remove(best);
        self.trace.nodes[o.id].popped = Some(self.popped);
        self.popped += 1;
        Some(o)
    }

    fn incumbent_event(&mut self, node: usize, objective: f64, depth: usize) {
        self.trace.incumbents.push(IncumbentEvent {
            node,
            nodes_so_far: self.counters.nodes,
            objective: objective + self.problem.objective_offset,
            depth,
        });
    }

    fn work(&mut self, o: OpenNode) -> Result<(), SolveError> {
        let id = o.id;
        let (worked, found, solves, tree_states) = self.expand(&o)?;
        for s in &solves {
            self.pseudo.update(s.var, s.dir, s.unit_cost, s.feasible);
        }
        let (final_obj, root_len) = match &worked {
            Worked::Branched {
                final_obj, implied, ..
            } => (*final_obj, o.node.path.len() + implied.len()),
            Worked::Fathomed(_) => (o.node.objective(), o.node.path.len()),
        };
        self.info[id].final_obj = final_obj;
        for f in &found {
            self.on_incumbent(id, f, root_len, &tree_states)?;
        }
        match worked {
            Worked::Fathomed(reason) => {
                let status = match reason {
                    PruneReason::Infeasible => NodeStatus::Infeasible,
                    _ => NodeStatus::Pruned,
                };
                self.close(id, status, Some(reason));
            }
            Worked::Branched {
                implied,
                scores,
                children,
                ..
            } => {
                let r = &mut self.trace.nodes[id];
                r.status = NodeStatus::Branched;
                r.prune_reason = None;
                r.implied = implied.iter().map(BranchRecord::from).collect();
                r.scores = scores;
                let base_len = o.node.path.len() + implied.len();
                if let (Some(ext), Some(v)) = (&self.ext, o.ext) {
                    let mut ext = ext.borrow_mut();
                    for b in &implied {
                        ext.add_compulsory(v, b.var, b.dir)?;
                    }
                }
                self.record_tentative(&o, &solves, base_len, &children)?;
                self.spawn(&o, final_obj, base_len, children)?;
            }
        }
        Ok(())
    }

    /// Evaluations solved at this node but not taken become tentative
    /// records of the extended tree.
    fn record_tentative(
        &mut self,
        o: &OpenNode,
        solves: &[SolveRecord],
        base_len: usize,
        children: &[Spawn],
    ) -> Result<(), SolveError> {
        let (Some(ext), Some(v)) = (&self.ext, o.ext) else {
            return Ok(());
        };
        let taken: Vec<(usize, Direction)> = children
            .iter()
            .filter(|s| s.parent.is_none())
            .filter_map(|s| s.node.path.get(base_len))
            .map(|b| (b.var, b.dir))
            .collect();
        let mut ext = ext.borrow_mut();
        for s in solves.iter().filter(|s| s.depth == 0) {
            if s.parent_path.len() == base_len && taken.contains(&(s.var, s.dir)) {
                continue;
            }
            let bound = BoundChange::branch(s.var, s.dir, o.node.sol.x[s.var]).bound;
            ext.add_tentative(v, (s.var, s.dir, bound), s.feasible.then_some(s.unit_cost))?;
        }
        Ok(())
    }

    /// Create the nodes of one decision. Intermediate path nodes are
    /// recorded as branched; the rest join the open list.
    fn spawn(
        &mut self,
        o: &OpenNode,
        final_obj: f64,
        base_len: usize,
        children: Vec<Spawn>,
    ) -> Result<(), SolveError> {
        // (id, depth, objective, ext handle, path length) of each spawn
        let mut made: Vec<(usize, usize, f64, Option<ExtNodeId>, usize)> = Vec::new();
        for sp in children {
            let (p, pd, pobj, pext, plen) = match sp.parent {
                None => (o.id, o.depth, final_obj, o.ext, base_len),
                Some(k) => made[k],
            };
            let step = sp.node.path[plen];
            let id = self.trace.nodes.len();
            self.counters.nodes += 1;
            let obj = sp.node.objective();
            let implied = &sp.node.path[plen + 1..];
            let pruned = sp.open && self.incumbent.prunes(obj);
            let status = match (sp.open, pruned) {
                (false, _) => NodeStatus::Branched,
                (true, true) => NodeStatus::Pruned,
                (true, false) => NodeStatus::Open,
            };
            self.trace.nodes.push(NodeRecord {
                id,
                parent: Some(p),
                depth: pd + 1,
                branch: Some(BranchRecord::from(&step)),
                objective: Some(obj + self.problem.objective_offset),
                status,
                implied: implied.iter().map(BranchRecord::from).collect(),
                scores: Vec::new(),
                prune_reason: pruned.then_some(PruneReason::Bound),
                popped: None,
            });
            self.info.push(BbInfo {
                parent: Some(p),
                depth: pd + 1,
                created_obj: obj,
                final_obj: obj,
                min_cost: sp.min_cost,
            });
            let ext = match (&self.ext, pext) {
                (Some(e), Some(v)) => {
                    let mut e = e.borrow_mut();
                    let h = e.add_basic(v, (step.var, step.dir, step.bound), sp.uc)?;
                    for b in implied {
                        e.add_compulsory(h, b.var, b.dir)?;
                    }
                    Some(h)
                }
                _ => None,
            };
            made.push((id, pd + 1, obj, ext, sp.node.path.len()));
            if sp.open && !pruned {
                self.push_open(OpenNode {
                    id,
                    node: sp.node,
                    depth: pd + 1,
                    delta: obj - pobj,
                    min_cost: sp.min_cost,
                    ext,
                    seq: 0,
                });
            }
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn expand(
        &mut self,
        o: &OpenNode,
    ) -> Result<(Worked, Vec<IncumbentFound>, Vec<SolveRecord>, Vec<LpNode>), SolveError> {
        let problem = self.problem;
        let ext_cell = self.ext.as_ref();
        let pseudo = &self.pseudo;
        let th = self.cfg.analytical;
        let v = o.ext;
        let classic = |f: &Fractional| pseudo.estimate(f, 1);
        let analytical = |f: &Fractional| -> Option<(f64, f64)> {
            let mut t = ext_cell?.borrow_mut();
            let v = v?;
            let up = t.analytical_uc(v, f.var, Direction::Up, &th).ok()?;
            let down = t.analytical_uc(v, f.var, Direction::Down, &th).ok()?;
            match (up, down) {
                (Analytical::Estimate { uc: u, .. }, Analytical::Estimate { uc: d, .. }) => {
                    Some((u * f.f_plus, d * f.f_minus))
                }
                _ => None,
            }
        };
        let mut oracle = LpOracle::new(
            problem,
            self.params.clone(),
            self.cfg.criterion.clone(),
            &mut self.incumbent,
            &mut self.counters,
        );
        oracle.estimate = match self.cfg.pseudo {
            PseudoMode::Off => None,
            PseudoMode::Classic => Some(&classic),
            PseudoMode::Analytical => Some(&analytical),
        };
        let mut tree_states = Vec::new();
        let worked = match &self.cfg.lookahead {
            None => plain_expand(
                &mut oracle,
                o.node.clone(),
                o.node.path.len(),
                &self.cfg.criterion,
            )?,
            Some(la) => {
                let (w, tree) = tree_expand(&mut oracle, o.node.clone(), la, &self.cfg.criterion)?;
                if let Some(tree) = tree {
                    self.trace.trees.push(tree.to_trace(o.id));
                    if self.cfg.reversals {
                        let budget = PivotBudget::default();
                        if let Some((rec, sol)) =
                            try_reversal(&tree, problem, self.cfg.beta, &budget, o.id)?
                        {
                            oracle.counters.add_solve(sol.pivots);
                            oracle.counters.reversals += 1;
                            self.trace.reversals.push(rec);
                        }
                    }
                    tree_states = tree.nodes.into_iter().map(|n| n.state).collect();
                }
                w
            }
        };
        let found = std::mem::take(&mut oracle.found);
        let solves = std::mem::take(&mut oracle.solves);
        drop(oracle);
        let worked = match worked {
            Worked::Branched {
                implied,
                final_obj,
                scores,
                children,
            } => Worked::Branched {
                implied,
                final_obj,
                scores,
                children: self.order_children(children),
            },
            w => w,
        };
        Ok((worked, found, solves, tree_states))
    }

    /// Reference-set bias between the last two open siblings: a branch
    /// outside the gate yields to one inside it, otherwise the lower
    /// global cost goes first.
    fn order_children(&self, mut spawns: Vec<Spawn>) -> Vec<Spawn> {
        let Some(refset) = &self.refset else {
            return spawns;
        };
        let n = spawns.len();
        if n < 2 || spawns[n - 1].parent != spawns[n - 2].parent || !spawns[n - 2].open {
            return spawns;
        }
        let plen = match spawns[n - 1].parent {
            Some(k) => spawns[k].node.path.len(),
            None => spawns[n - 1].node.path.len() - 1 - implied_tail(&spawns[n - 1].node.path),
        };
        let (Some(&pref), Some(&other)) = (
            spawns[n - 1].node.path.get(plen),
            spawns[n - 2].node.path.get(plen),
        ) else {
            return spawns;
        };
        if pref.var != other.var || pref.straddle {
            return spawns;
        }
        let binary = self.problem.is_binary(pref.var);
        let open_pref = refset.gate(pref.var, pref.dir, pref.bound, binary);
        let open_other = refset.gate(other.var, other.dir, other.bound, binary);
        let swap = if open_pref != open_other {
            !open_pref
        } else {
            refset.gc(other.var, other.dir) < refset.gc(pref.var, pref.dir)
        };
        // only an open leaf can be moved behind its sibling
        if swap && spawns[n - 1].open {
            spawns.swap(n - 1, n - 2);
        }
        spawns
    }

    fn on_incumbent(
        &mut self,
        id: usize,
        f: &IncumbentFound,
        root_len: usize,
        tree_states: &[LpNode],
    ) -> Result<(), SolveError> {
        self.incumbent_event(id, f.objective, f.path.len());
        if let Some(r) = self.refset.as_mut() {
            r.add(&f.x, f.objective, &f.path);
        }
        // ancestors of the branch-and-bound node
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.info[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        let mut path = Vec::new();
        for w in chain.windows(2) {
            let (a, b) = (self.info[w[0]], self.info[w[1]]);
            path.push(PathStep {
                depth: a.depth,
                node_obj: a.final_obj,
                child_obj: b.created_obj,
                min_cost: b.min_cost,
            });
        }
        // tree nodes between the node and the incumbent
        let here = self.info[id];
        let mut prefix: Vec<&LpNode> = tree_states
            .iter()
            .filter(|n| {
                root_len < n.path.len()
                    && n.path.len() < f.path.len()
                    && f.path.starts_with(&n.path)
            })
            .collect();
        prefix.sort_by_key(|n| n.path.len());
        prefix.dedup_by_key(|n| n.path.len());
        let mut obj = here.final_obj;
        let mut parent_sol: Option<&lp::LpSolution> = tree_states
            .iter()
            .find(|n| n.path.len() == root_len && f.path.starts_with(&n.path))
            .map(|n| &n.sol);
        let mut depth = here.depth;
        for n in &prefix {
            let min_cost = parent_sol
                .map(|s| {
                    UnitCosts::new(&[], Some(s))
                        .min_costs(&n.fractional)
                        .iter()
                        .sum()
                })
                .unwrap_or(0.0);
            path.push(PathStep {
                depth,
                node_obj: obj,
                child_obj: n.objective(),
                min_cost,
            });
            obj = n.objective();
            parent_sol = Some(&n.sol);
            depth += 1;
        }
        path.push(PathStep {
            depth,
            node_obj: obj,
            child_obj: f.objective,
            min_cost: 0.0,
        });
        let weights = self.dval.record(&path, f.objective);
        self.trace.calibrations.push(CalibrationTrace {
            bb_node: id,
            x_star: f.objective,
            path,
            weights,
        });
        Ok(())
    }
}

/// Number of trailing compulsory entries of a path.
fn implied_tail(path: &[BoundChange]) -> usize {
    path.iter().rev().take_while(|b| b.compulsory).count()
}

fn candidate_evals(candidates: &[Candidate<LpNode>]) -> Vec<BranchEval> {
    candidates.iter().map(|c| c.eval.clone()).collect()
}

fn min_cost_of(evals: &[BranchEval], parent: &LpNode, child: &LpNode) -> f64 {
    UnitCosts::new(evals, Some(&parent.sol))
        .min_costs(&child.fractional)
        .iter()
        .sum()
}

fn root_pair(
    cur: &LpNode,
    candidates: &[Candidate<LpNode>],
    var: usize,
    dir: Direction,
) -> Vec<Spawn> {
    let evals = candidate_evals(candidates);
    let Some(c) = candidates.iter().find(|c| c.var == var) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for d in [dir.opposite(), dir] {
        if let Some(child) = c.child(d) {
            out.push(Spawn {
                min_cost: min_cost_of(&evals, cur, child),
                uc: Some(match d {
                    Direction::Up => c.eval.uc_up,
                    Direction::Down => c.eval.uc_down,
                }),
                node: child.clone(),
                parent: None,
                open: true,
            });
        }
    }
    out
}

/// Expand without a tree: absorb compulsory branches, then branch on the
/// criterion's choice among the fully evaluated candidates.
fn plain_expand(
    oracle: &mut LpOracle<'_>,
    mut cur: LpNode,
    start_len: usize,
    spec: &CriterionSpec,
) -> Result<Worked, SolveError> {
    loop {
        match oracle.expand(&cur, 0, &[])? {
            Expansion::Compulsory { child, .. } => cur = child,
            Expansion::Infeasible => return Ok(Worked::Fathomed(PruneReason::Infeasible)),
            Expansion::Leaf => {
                if cur.fractional.is_empty() {
                    return Ok(Worked::Fathomed(PruneReason::Limit));
                }
                if oracle.params.clist.take().is_none() {
                    return Ok(Worked::Fathomed(PruneReason::CandidateList));
                }
            }
            Expansion::Branch { candidates, .. } => {
                let evals = candidate_evals(&candidates);
                let sel = select(&evals, spec).expect("branch has candidates");
                let children = root_pair(&cur, &candidates, sel.var, sel.direction);
                return Ok(Worked::Branched {
                    implied: cur.path[start_len..].to_vec(),
                    final_obj: cur.objective(),
                    scores: sel.scores,
                    children,
                });
            }
        }
    }
}

/// Expand through a look-ahead tree.
fn tree_expand(
    oracle: &mut LpOracle<'_>,
    node: LpNode,
    la: &LookaheadConfig,
    spec: &CriterionSpec,
) -> Result<(Worked, Option<TreeResult<LpNode>>), SolveError> {
    let start_len = node.path.len();
    let mut cur = node;
    loop {
        let tree = if la.d2_ratio.is_some() {
            build_d2_tree(oracle, cur.clone(), la)?
        } else {
            build_tree(oracle, cur.clone(), la)?
        };
        oracle.counters.tree_builds += 1;
        oracle.counters.tree_nodes += tree.counted_nodes as u64;
        match &tree.outcome {
            TreeOutcome::Infeasible => {
                return Ok((Worked::Fathomed(PruneReason::Infeasible), Some(tree)))
            }
            TreeOutcome::RestartLimit => {
                oracle.counters.restarts += 1;
                cur = tree.root.clone().expect("a capped tree keeps its root");
            }
            TreeOutcome::Leaf => {
                let root = tree.root.clone().expect("a leaf tree keeps its root");
                // the candidate list ran dry here; branch on anything
                oracle.params.clist = None;
                let w = plain_expand(oracle, root, start_len, spec)?;
                return Ok((w, Some(tree)));
            }
            TreeOutcome::Branch(d) => {
                let root = tree.root.as_ref().expect("a decided tree keeps its root");
                let children = if d.path.is_empty() {
                    root_pair(root, &tree.root_candidates, d.var, d.dir)
                } else {
                    path_chains(&tree, root, &d.path)
                };
                let scores = tree
                    .root_candidates
                    .iter()
                    .map(|c| (c.var, la.leaf.score(&c.eval)))
                    .collect();
                let w = Worked::Branched {
                    implied: root.path[start_len..].to_vec(),
                    final_obj: root.objective(),
                    scores,
                    children,
                };
                return Ok((w, Some(tree)));
            }
        }
    }
}

/// The accepted path with the sibling of every path node pushed just
/// before it.
fn path_chains(tree: &TreeResult<LpNode>, root: &LpNode, path: &[usize]) -> Vec<Spawn> {
    let evals = candidate_evals(&tree.root_candidates);
    let mut out: Vec<Spawn> = Vec::new();
    let mut parent: &LpNode = root;
    let mut parent_spawn: Option<usize> = None;
    for (k, &id) in path.iter().enumerate() {
        let node = &tree.nodes[id].state;
        let sibling = tree
            .pairs
            .iter()
            .find(|p| p.up == Some(id) || p.down == Some(id))
            .and_then(|p| if p.up == Some(id) { p.down } else { p.up });
        let measure = |child: &LpNode| -> f64 {
            if k == 0 {
                min_cost_of(&evals, parent, child)
            } else {
                UnitCosts::new(&[], Some(&parent.sol))
                    .min_costs(&child.fractional)
                    .iter()
                    .sum()
            }
        };
        if let Some(s) = sibling {
            let sib = &tree.nodes[s].state;
            out.push(Spawn {
                min_cost: measure(sib),
                uc: None,
                node: sib.clone(),
                parent: parent_spawn,
                open: true,
            });
        }
        out.push(Spawn {
            min_cost: measure(node),
            uc: None,
            node: node.clone(),
            parent: parent_spawn,
            open: k + 1 == path.len(),
        });
        parent_spawn = Some(out.len() - 1);
        parent = node;
    }
    out
}
