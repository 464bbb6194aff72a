//! Narrow-gauge look-ahead trees.
//!
//! A tree is grown from the current node to depth `D`. Every scanned node
//! contributes exactly one sibling pair: the branching variable its winnowing
//! selects. Sibling pairs at the deepest level are scored against the root
//! objective and the best pair decides the branch taken at the root.
//!
//! The builder is generic over a [`TreeOracle`], which hides how a node is
//! expanded. [`LpOracle`] expands nodes with LP solves; [`SyntheticOracle`]
//! is an always-feasible stand-in used to check node counts.

mod lp_oracle;
mod synthetic;

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::{BranchEval, CriterionId, CriterionSpec};
use crate::error::SolveError;
use crate::lp::Direction;
use crate::trace::{TreeNodeStatus, TreeNodeTrace, TreeTrace};

pub use lp_oracle::{
    build_d2_tree, d2_budget, reversal_threshold, try_reversal, IncumbentFound, LpNode, LpOracle,
    SolveRecord,
};
pub use synthetic::{idealized_path_correctness, SyntheticNode, SyntheticOracle};

/// Retention rule applied to each level from `d0` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostWinnow {
    Off,
    /// Keep the `Lim` best sibling pairs.
    Pairs,
    /// Keep the `Lim` best pairs, then only the better node of each.
    BestSibling,
    /// Keep the `Lim` best nodes regardless of pairing.
    SingleStream,
}

impl FromStr for PostWinnow {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "off" | "none" => PostWinnow::Off,
            "2a" => PostWinnow::Pairs,
            "2b" => PostWinnow::BestSibling,
            "2c" => PostWinnow::SingleStream,
            _ => {
                return Err(SolveError::Config(format!(
                    "unknown post-winnow mode `{s}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcceptMode {
    /// Take only the root branch toward the winning pair.
    FirstBranch,
    /// Take the whole path down to the winning pair.
    FullPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traversal {
    DepthFirst,
    BreadthFirst,
}

/// Which attractiveness counts may override the tree's root branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractMode {
    Off,
    Global,
    HalfTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookaheadConfig {
    pub depth: usize,
    /// Criterion used on sibling pairs (C2a, C2b or C3).
    pub leaf: CriterionSpec,
    /// Weight on the fractionality of a node's solution; must be `<= 0`.
    pub frac_weight: f64,
    pub post_winnow: PostWinnow,
    /// `Lim(d)` indexed by scanning depth; the last entry repeats.
    pub lim: Vec<usize>,
    pub d0: usize,
    pub accept: AcceptMode,
    /// Ignored (breadth first) while post-winnowing is on.
    pub traversal: Traversal,
    /// Number of trees `n'`, each rooted at a different depth-0 candidate.
    pub trees: usize,
    /// Ratio `v` of the simplified depth-2 mode; `None` disables it.
    pub d2_ratio: Option<f64>,
    pub attract: AttractMode,
    pub attract_threshold: f64,
    pub max_restarts: usize,
    pub early_exit: bool,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        LookaheadConfig {
            depth: 3,
            leaf: CriterionSpec::new(CriterionId::C2a),
            frac_weight: 0.0,
            post_winnow: PostWinnow::Pairs,
            lim: vec![3],
            d0: 2,
            accept: AcceptMode::FirstBranch,
            traversal: Traversal::DepthFirst,
            trees: 1,
            d2_ratio: None,
            attract: AttractMode::Off,
            attract_threshold: 3.0,
            max_restarts: 20,
            early_exit: true,
        }
    }
}

impl LookaheadConfig {
    pub fn lim_at(&self, d: usize) -> usize {
        self.lim.get(d).or(self.lim.last()).copied().unwrap_or(1)
    }

    /// `n2_root` is the number of stage-2 survivors at depth 0.
    pub fn validate(&self, n2_root: usize) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if self.depth == 0 {
            return bad("look-ahead depth must be at least 1");
        }
        if self.lim.is_empty() || self.lim.contains(&0) {
            return bad("Lim(d) must be at least 1");
        }
        if self.d0 == 0 {
            return bad("d0 must be at least 1");
        }
        if !(self.frac_weight <= 0.0) {
            return bad("the fractionality weight must be nonpositive");
        }
        if self.trees == 0 {
            return bad("at least one tree is required");
        }
        if self.trees > 1 && self.trees >= n2_root {
            return bad("the number of trees must be smaller than n2 at depth 0");
        }
        if let Some(v) = self.d2_ratio {
            if !(1.0..=2.0).contains(&v) {
                return bad("v must lie in [1, 2]");
            }
            if !(2..=3).contains(&self.depth) {
                return bad("the simplified mode needs depth 2 or 3");
            }
        }
        if !matches!(
            self.leaf.id,
            CriterionId::C2a | CriterionId::C2b | CriterionId::C3
        ) {
            return bad("leaf pairs are scored with C2a, C2b or C3");
        }
        self.leaf.validate()
    }
}

/// One depth-0 or in-tree branching candidate with its solved children.
/// A missing child is infeasible (or no better than the incumbent).
#[derive(Debug, Clone)]
pub struct Candidate<N> {
    pub var: usize,
    pub eval: BranchEval,
    pub up: Option<N>,
    pub down: Option<N>,
}

impl<N> Candidate<N> {
    pub fn child(&self, dir: Direction) -> Option<&N> {
        match dir {
            Direction::Up => self.up.as_ref(),
            Direction::Down => self.down.as_ref(),
        }
    }
}

/// Result of expanding one node.
#[derive(Debug, Clone)]
pub enum Expansion<N> {
    /// Nothing left to branch on.
    Leaf,
    /// Both branches of some candidate are infeasible.
    Infeasible,
    /// One branch of `var` is infeasible: `child` replaces the node.
    Compulsory {
        var: usize,
        dir: Direction,
        child: N,
    },
    Branch {
        /// Fully evaluated candidates, best first.
        candidates: Vec<Candidate<N>>,
        /// Candidates dropped by the final cut, with their preferred direction.
        others: Vec<(usize, Direction)>,
    },
}

pub trait TreeOracle {
    type Node: Clone;

    fn objective(&self, node: &Self::Node) -> f64;

    /// `sum min(f+, f-)` over the fractional variables of the node.
    fn fractionality(&self, _node: &Self::Node) -> f64 {
        0.0
    }

    /// `x_o*`, `+inf` before the first incumbent.
    fn incumbent_objective(&self) -> f64;

    /// Whether a node with this objective can no longer beat the incumbent.
    fn prunes(&self, objective: f64) -> bool;

    /// Expand `node` at `depth`, never branching on a variable in `excluded`.
    fn expand(
        &mut self,
        node: &Self::Node,
        depth: usize,
        excluded: &[usize],
    ) -> Result<Expansion<Self::Node>, SolveError>;
}

#[derive(Debug, Clone)]
pub struct TreeNode<N> {
    pub id: usize,
    pub tree: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: Option<(usize, Direction)>,
    /// Compulsory branches absorbed into this node.
    pub implied: Vec<(usize, Direction)>,
    /// Root branch direction of the half-tree holding this node.
    pub half: Option<Direction>,
    pub objective: f64,
    pub fractionality: f64,
    pub status: TreeNodeStatus,
    pub counted: bool,
    pub state: N,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub tree: usize,
    pub parent: usize,
    pub var: usize,
    /// Depth of the two children.
    pub depth: usize,
    pub up: Option<usize>,
    pub down: Option<usize>,
    pub retained: bool,
}

/// Per-variable `[up, down]` counts.
pub type AttractTable = BTreeMap<usize, [u32; 2]>;

/// Persistent attractiveness counts of one tree build.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttractCounters {
    pub global: AttractTable,
    /// Counts for the up and the down half-tree, both including the root.
    pub halves: [AttractTable; 2],
}

fn dir_index(dir: Direction) -> usize {
    match dir {
        Direction::Up => 0,
        Direction::Down => 1,
    }
}

impl AttractCounters {
    pub fn bump(&mut self, half: Option<Direction>, var: usize, dir: Direction) {
        let k = dir_index(dir);
        self.global.entry(var).or_default()[k] += 1;
        match half {
            Some(h) => self.halves[dir_index(h)].entry(var).or_default()[k] += 1,
            None => {
                for t in &mut self.halves {
                    t.entry(var).or_default()[k] += 1;
                }
            }
        }
    }

    pub fn half(&self, dir: Direction) -> &AttractTable {
        &self.halves[dir_index(dir)]
    }
}

/// Among `candidates` (in priority order), the variable whose
/// `max(UpAttract, DownAttract)` is largest, if it exceeds `threshold`.
pub fn attract_override(
    table: &AttractTable,
    candidates: &[usize],
    threshold: f64,
) -> Option<(usize, Direction)> {
    let mut best: Option<(usize, Direction, u32)> = None;
    for &j in candidates {
        let [up, down] = table.get(&j).copied().unwrap_or_default();
        let value = up.max(down);
        if f64::from(value) <= threshold {
            continue;
        }
        if best.is_none_or(|(_, _, b)| value > b) {
            let dir = if up > down {
                Direction::Up
            } else {
                Direction::Down
            };
            best = Some((j, dir, value));
        }
    }
    best.map(|(j, d, _)| (j, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub var: usize,
    pub dir: Direction,
    pub tree: usize,
    /// Tree nodes from depth 1 down to the accepted node.
    pub path: Vec<usize>,
    pub winner: Option<usize>,
    pub overridden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeOutcome {
    Branch(Decision),
    /// The root has no candidate to branch on.
    Leaf,
    Infeasible,
    /// Too many compulsory branches at the root; the modified root is
    /// returned for a fresh attempt.
    RestartLimit,
}

#[derive(Debug, Clone)]
pub struct TreeResult<N> {
    pub outcome: TreeOutcome,
    /// The root after compulsory branches; `None` when it is infeasible.
    pub root: Option<N>,
    pub implied: Vec<(usize, Direction)>,
    pub root_candidates: Vec<Candidate<N>>,
    pub nodes: Vec<TreeNode<N>>,
    pub pairs: Vec<Pair>,
    pub counted_nodes: usize,
    pub early_exit: bool,
    pub attract: AttractCounters,
}

impl<N> TreeResult<N> {
    fn bare(outcome: TreeOutcome, root: Option<N>, implied: Vec<(usize, Direction)>) -> Self {
        TreeResult {
            outcome,
            root,
            implied,
            root_candidates: Vec::new(),
            nodes: Vec::new(),
            pairs: Vec::new(),
            counted_nodes: 0,
            early_exit: false,
            attract: AttractCounters::default(),
        }
    }

    pub fn decision(&self) -> Option<&Decision> {
        match &self.outcome {
            TreeOutcome::Branch(d) => Some(d),
            _ => None,
        }
    }

    /// The root children of the decided branch.
    pub fn root_children(&self) -> Option<(&Candidate<N>, Direction)> {
        let d = self.decision()?;
        self.root_candidates
            .iter()
            .find(|c| c.var == d.var)
            .map(|c| (c, d.dir))
    }

    /// Branches along the node path from the root to `id`.
    pub fn branches_to(&self, id: usize) -> Vec<(usize, Direction)> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            let n = &self.nodes[c];
            if let Some(b) = n.branch {
                out.push(b);
            }
            cur = n.parent;
        }
        out.reverse();
        out
    }

    pub fn to_trace(&self, bb_node: usize) -> TreeTrace {
        let decision = self.decision();
        TreeTrace {
            bb_node,
            counted_nodes: self.counted_nodes,
            early_exit: self.early_exit,
            implied: self.implied.clone(),
            decision: decision.map(|d| (d.var, d.dir)),
            overridden: decision.is_some_and(|d| d.overridden),
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeNodeTrace {
                    id: n.id,
                    tree: n.tree,
                    parent: n.parent,
                    depth: n.depth,
                    branch: n.branch,
                    implied: n.implied.clone(),
                    objective: n.objective.is_finite().then_some(n.objective),
                    status: n.status,
                    counted: n.counted,
                })
                .collect(),
        }
    }
}

enum Settled<N> {
    Leaf(N, Vec<(usize, Direction)>),
    Capped(N, Vec<(usize, Direction)>),
    Infeasible(Vec<(usize, Direction)>),
    Branch {
        state: N,
        implied: Vec<(usize, Direction)>,
        candidates: Vec<Candidate<N>>,
        others: Vec<(usize, Direction)>,
    },
}

/// Expand `node`, absorbing compulsory branches until a real choice appears.
fn settle<O: TreeOracle>(
    oracle: &mut O,
    node: O::Node,
    depth: usize,
    excluded: &[usize],
    cap: usize,
) -> Result<Settled<O::Node>, SolveError> {
    let mut state = node;
    let mut implied = Vec::new();
    loop {
        match oracle.expand(&state, depth, excluded)? {
            Expansion::Leaf => return Ok(Settled::Leaf(state, implied)),
            Expansion::Infeasible => return Ok(Settled::Infeasible(implied)),
            Expansion::Compulsory { var, dir, child } => {
                implied.push((var, dir));
                state = child;
                if implied.len() >= cap {
                    return Ok(Settled::Capped(state, implied));
                }
            }
            Expansion::Branch { candidates, others } => {
                if candidates.is_empty() {
                    return Ok(Settled::Leaf(state, implied));
                }
                return Ok(Settled::Branch {
                    state,
                    implied,
                    candidates,
                    others,
                });
            }
        }
    }
}

struct Builder<'c, N> {
    cfg: &'c LookaheadConfig,
    nodes: Vec<TreeNode<N>>,
    pairs: Vec<Pair>,
    root_obj: f64,
    attract: AttractCounters,
    early_exit: bool,
}

impl<N: Clone> Builder<'_, N> {
    fn missing<O: TreeOracle<Node = N>>(&self, oracle: &O, id: usize) -> bool {
        let n = &self.nodes[id];
        matches!(
            n.status,
            TreeNodeStatus::Pruned | TreeNodeStatus::Infeasible
        ) || oracle.prunes(n.objective)
    }

    /// Node evaluation against the root objective, with the fractionality
    /// penalty; a missing node is valued at the incumbent.
    fn side<O: TreeOracle<Node = N>>(&self, oracle: &O, child: Option<usize>) -> f64 {
        match child {
            Some(id) if !self.missing(oracle, id) => {
                let n = &self.nodes[id];
                n.objective - self.root_obj + self.cfg.frac_weight * n.fractionality
            }
            _ => oracle.incumbent_objective() - self.root_obj,
        }
    }

    fn pair_eval<O: TreeOracle<Node = N>>(&self, oracle: &O, p: usize, label: usize) -> BranchEval {
        let pair = &self.pairs[p];
        BranchEval::from_values(
            label,
            self.side(oracle, pair.up),
            self.side(oracle, pair.down),
        )
    }

    fn key(&self, id: usize) -> Vec<(usize, u8)> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            let n = &self.nodes[c];
            if let Some((v, d)) = n.branch {
                out.push((v, dir_index(d) as u8));
            }
            cur = n.parent;
        }
        out.push((self.nodes[id].tree, 0));
        out.reverse();
        out
    }

    /// Pairs sorted into a traversal-independent order.
    fn canonical(&self, pairs: &[usize]) -> Vec<usize> {
        let mut keyed: Vec<(Vec<(usize, u8)>, usize, usize)> = pairs
            .iter()
            .map(|&p| (self.key(self.pairs[p].parent), self.pairs[p].var, p))
            .collect();
        keyed.sort();
        keyed.into_iter().map(|(_, _, p)| p).collect()
    }

    /// Pairs best first under the leaf criterion.
    fn rank_pairs<O: TreeOracle<Node = N>>(&self, oracle: &O, pairs: &[usize]) -> Vec<usize> {
        let canon = self.canonical(pairs);
        let evals: Vec<BranchEval> = canon
            .iter()
            .enumerate()
            .map(|(i, &p)| self.pair_eval(oracle, p, i))
            .collect();
        self.cfg
            .leaf
            .rank(&evals)
            .into_iter()
            .map(|i| canon[i])
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn new_node<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &O,
        tree: usize,
        parent: usize,
        branch: (usize, Direction),
        state: N,
    ) -> usize {
        let id = self.nodes.len();
        let p = &self.nodes[parent];
        let half = p.half.or(Some(branch.1));
        let depth = p.depth + 1;
        self.nodes.push(TreeNode {
            id,
            tree,
            parent: Some(parent),
            depth,
            branch: Some(branch),
            implied: Vec::new(),
            half,
            objective: oracle.objective(&state),
            fractionality: oracle.fractionality(&state),
            status: TreeNodeStatus::Open,
            counted: false,
            state,
        });
        id
    }

    fn add_pair<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &O,
        tree: usize,
        parent: usize,
        cand: &Candidate<N>,
    ) -> usize {
        let up = cand
            .up
            .clone()
            .map(|s| self.new_node(oracle, tree, parent, (cand.var, Direction::Up), s));
        let down = cand
            .down
            .clone()
            .map(|s| self.new_node(oracle, tree, parent, (cand.var, Direction::Down), s));
        self.pairs.push(Pair {
            tree,
            parent,
            var: cand.var,
            depth: self.nodes[parent].depth + 1,
            up,
            down,
            retained: true,
        });
        self.pairs.len() - 1
    }

    fn count_pair(&mut self, p: usize) {
        for id in [self.pairs[p].up, self.pairs[p].down].into_iter().flatten() {
            self.nodes[id].counted = true;
        }
    }

    fn children(&self, p: usize) -> impl Iterator<Item = usize> {
        [self.pairs[p].up, self.pairs[p].down].into_iter().flatten()
    }

    /// Expand one open node; returns the pair it generates, if any.
    fn expand_node<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &mut O,
        id: usize,
        excluded: &[usize],
    ) -> Result<Option<usize>, SolveError> {
        if self.nodes[id].status != TreeNodeStatus::Open {
            return Ok(None);
        }
        if oracle.prunes(self.nodes[id].objective) {
            self.nodes[id].status = TreeNodeStatus::Pruned;
            return Ok(None);
        }
        let depth = self.nodes[id].depth;
        let state = self.nodes[id].state.clone();
        let settled = settle(oracle, state, depth, excluded, self.cfg.max_restarts)?;
        let refresh = |b: &mut Self, state: N, implied: Vec<(usize, Direction)>, oracle: &O| {
            let n = &mut b.nodes[id];
            n.objective = oracle.objective(&state);
            n.fractionality = oracle.fractionality(&state);
            n.implied = implied;
            n.state = state;
        };
        match settled {
            Settled::Leaf(state, implied) => {
                refresh(self, state, implied, oracle);
                self.nodes[id].status = TreeNodeStatus::Leaf;
                Ok(None)
            }
            Settled::Capped(state, implied) => {
                refresh(self, state, implied, oracle);
                self.nodes[id].status = TreeNodeStatus::Capped;
                Ok(None)
            }
            Settled::Infeasible(implied) => {
                self.nodes[id].implied = implied;
                self.nodes[id].status = TreeNodeStatus::Infeasible;
                Ok(None)
            }
            Settled::Branch {
                state,
                implied,
                candidates,
                others,
            } => {
                refresh(self, state, implied, oracle);
                self.nodes[id].status = TreeNodeStatus::Expanded;
                let half = self.nodes[id].half;
                self.record_attract(half, &candidates, &others);
                let tree = self.nodes[id].tree;
                Ok(Some(self.add_pair(oracle, tree, id, &candidates[0])))
            }
        }
    }

    fn record_attract(
        &mut self,
        half: Option<Direction>,
        candidates: &[Candidate<N>],
        others: &[(usize, Direction)],
    ) {
        for &(j, d) in others {
            self.attract.bump(half, j, d);
        }
        for c in candidates {
            self.attract.bump(half, c.var, c.eval.direction());
        }
    }

    fn grow_dfs<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &mut O,
        id: usize,
        excluded: &[usize],
    ) -> Result<(), SolveError> {
        if self.nodes[id].depth >= self.cfg.depth {
            return Ok(());
        }
        if let Some(p) = self.expand_node(oracle, id, excluded)? {
            self.count_pair(p);
            let kids: Vec<usize> = self.children(p).collect();
            for c in kids {
                self.grow_dfs(oracle, c, excluded)?;
            }
        }
        Ok(())
    }

    fn grow_levels<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &mut O,
        mut frontier: Vec<usize>,
        excluded: &[usize],
        single_tree: bool,
    ) -> Result<(), SolveError> {
        let retaining = self.cfg.post_winnow != PostWinnow::Off;
        for d in 1..self.cfg.depth {
            let mut level = Vec::new();
            for &id in &frontier {
                if let Some(p) = self.expand_node(oracle, id, excluded)? {
                    level.push(p);
                }
            }
            if level.is_empty() {
                break;
            }
            if !(retaining && d >= self.cfg.d0) {
                for &p in &level {
                    self.count_pair(p);
                }
                frontier = level.iter().flat_map(|&p| self.children(p)).collect();
                continue;
            }
            if d > self.cfg.d0 {
                for &p in &level {
                    self.count_pair(p);
                }
            }
            frontier = self.retain(oracle, &level, d);
            if d == self.cfg.d0 {
                for &p in &level {
                    if self.pairs[p].retained {
                        self.count_pair(p);
                    }
                }
            }
            if single_tree && self.cfg.early_exit && !frontier.is_empty() {
                let h = self.nodes[frontier[0]].half;
                if frontier.iter().all(|&id| self.nodes[id].half == h) {
                    self.early_exit = true;
                    break;
                }
            }
        }
        Ok(())
    }

    /// Apply the post-winnow rule to the pairs generated at one level and
    /// return the nodes carried forward.
    fn retain<O: TreeOracle<Node = N>>(
        &mut self,
        oracle: &O,
        level: &[usize],
        d: usize,
    ) -> Vec<usize> {
        let lim = self.cfg.lim_at(d);
        let ranked = self.rank_pairs(oracle, level);
        let mut keep: Vec<usize> = Vec::new();
        match self.cfg.post_winnow {
            PostWinnow::Off => {
                keep = ranked.iter().flat_map(|&p| self.children(p)).collect();
            }
            PostWinnow::Pairs => {
                for &p in ranked.iter().take(lim) {
                    keep.extend(self.children(p));
                }
            }
            PostWinnow::BestSibling => {
                for &p in ranked.iter().take(lim) {
                    let best = self
                        .children(p)
                        .filter(|&c| !self.missing(oracle, c))
                        .min_by(|&a, &b| {
                            self.side(oracle, Some(a))
                                .total_cmp(&self.side(oracle, Some(b)))
                        });
                    keep.extend(best);
                }
            }
            PostWinnow::SingleStream => {
                let canon = self.canonical(level);
                let mut all: Vec<usize> = canon
                    .iter()
                    .flat_map(|&p| self.children(p))
                    .filter(|&c| !self.missing(oracle, c))
                    .collect();
                // stable sort keeps the canonical order among ties
                all.sort_by(|&a, &b| {
                    self.side(oracle, Some(a))
                        .total_cmp(&self.side(oracle, Some(b)))
                });
                all.truncate(lim);
                keep = all;
            }
        }
        for &p in level {
            let kids: Vec<usize> = self.children(p).collect();
            let mut any = false;
            for c in kids {
                if keep.contains(&c) {
                    any = true;
                } else if self.nodes[c].status == TreeNodeStatus::Open {
                    self.nodes[c].status = TreeNodeStatus::Dropped;
                }
            }
            self.pairs[p].retained = any;
        }
        keep
    }

    fn decide<O: TreeOracle<Node = N>>(&self, oracle: &O) -> Option<Decision> {
        let live: Vec<usize> = (0..self.pairs.len())
            .filter(|&p| self.pairs[p].retained)
            .collect();
        let deepest = live.iter().map(|&p| self.pairs[p].depth).max()?;
        let leaves: Vec<usize> = live
            .into_iter()
            .filter(|&p| self.pairs[p].depth == deepest)
            .collect();
        let ranked = self.rank_pairs(oracle, &leaves);
        let winner = *ranked.first()?;
        let pair = &self.pairs[winner];
        let preferred = self.pair_eval(oracle, winner, 0).direction();
        let pick = match preferred {
            Direction::Up => pair.up.or(pair.down),
            Direction::Down => pair.down.or(pair.up),
        };
        // nodes from depth 1 down to the winning pair's parent
        let mut chain = Vec::new();
        let mut cur = Some(pair.parent);
        while let Some(c) = cur {
            if self.nodes[c].parent.is_some() {
                chain.push(c);
            }
            cur = self.nodes[c].parent;
        }
        chain.reverse();
        let (var, dir) = match chain.first() {
            Some(&first) => self.nodes[first]
                .branch
                .expect("non-root node has a branch"),
            None => (pair.var, preferred),
        };
        let path = match self.cfg.accept {
            AcceptMode::FirstBranch => chain.first().copied().or(pick).into_iter().collect(),
            AcceptMode::FullPath => {
                let mut p = chain;
                p.extend(pick);
                p
            }
        };
        Some(Decision {
            var,
            dir,
            tree: pair.tree,
            path,
            winner: Some(winner),
            overridden: false,
        })
    }
}

/// Grow a look-ahead tree from `root` and decide the branch to take there.
pub fn build_tree<O: TreeOracle>(
    oracle: &mut O,
    root: O::Node,
    cfg: &LookaheadConfig,
) -> Result<TreeResult<O::Node>, SolveError> {
    let settled = settle(oracle, root, 0, &[], cfg.max_restarts)?;
    let (state, implied, candidates, others) = match settled {
        Settled::Branch {
            state,
            implied,
            candidates,
            others,
        } => (state, implied, candidates, others),
        Settled::Leaf(state, implied) => {
            return Ok(TreeResult::bare(TreeOutcome::Leaf, Some(state), implied))
        }
        Settled::Capped(state, implied) => {
            return Ok(TreeResult::bare(
                TreeOutcome::RestartLimit,
                Some(state),
                implied,
            ))
        }
        Settled::Infeasible(implied) => {
            return Ok(TreeResult::bare(TreeOutcome::Infeasible, None, implied))
        }
    };
    let root_obj = oracle.objective(&state);
    let mut b = Builder {
        cfg,
        nodes: vec![TreeNode {
            id: 0,
            tree: 0,
            parent: None,
            depth: 0,
            branch: None,
            implied: implied.clone(),
            half: None,
            objective: root_obj,
            fractionality: oracle.fractionality(&state),
            status: TreeNodeStatus::Expanded,
            counted: false,
            state: state.clone(),
        }],
        pairs: Vec::new(),
        root_obj,
        attract: AttractCounters::default(),
        early_exit: false,
    };
    b.record_attract(None, &candidates, &others);
    let n_trees = cfg.trees.clamp(1, candidates.len());
    for (t, cand) in candidates.iter().take(n_trees).enumerate() {
        let excluded: Vec<usize> = candidates[..t].iter().map(|c| c.var).collect();
        let p = b.add_pair(oracle, t, 0, cand);
        b.count_pair(p);
        let kids: Vec<usize> = b.children(p).collect();
        let breadth =
            cfg.post_winnow != PostWinnow::Off || cfg.traversal == Traversal::BreadthFirst;
        if breadth {
            b.grow_levels(oracle, kids, &excluded, n_trees == 1)?;
        } else {
            for c in kids {
                b.grow_dfs(oracle, c, &excluded)?;
            }
        }
    }
    let mut decision = b.decide(oracle);
    if let Some(d) = decision.as_mut() {
        let table = match cfg.attract {
            AttractMode::Off => None,
            AttractMode::Global => Some(&b.attract.global),
            AttractMode::HalfTree => Some(b.attract.half(d.dir)),
        };
        let vars: Vec<usize> = candidates.iter().map(|c| c.var).collect();
        if let Some((j, dir)) =
            table.and_then(|t| attract_override(t, &vars, cfg.attract_threshold))
        {
            if (j, dir) != (d.var, d.dir) {
                *d = Decision {
                    var: j,
                    dir,
                    tree: d.tree,
                    path: Vec::new(),
                    winner: d.winner,
                    overridden: true,
                };
            }
        }
    }
    let counted_nodes = b.nodes.iter().filter(|n| n.counted).count();
    Ok(TreeResult {
        outcome: decision.map_or(TreeOutcome::Leaf, TreeOutcome::Branch),
        root: Some(state),
        implied,
        root_candidates: candidates,
        nodes: b.nodes,
        pairs: b.pairs,
        counted_nodes,
        early_exit: b.early_exit,
        attract: b.attract,
    })
}
