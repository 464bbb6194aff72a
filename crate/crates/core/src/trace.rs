//! Run traces written as versioned JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costs::{DvalWeights, ExtendedTree, PathStep};
use crate::lp::Direction;

/// Version of the JSON trace layout. Bumped on any incompatible change.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Work counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Branch-and-bound nodes created (root included).
    pub nodes: u64,
    pub lp_solves: u64,
    pub pivots: u64,
    /// Single-pivot probes and pseudo-cost substitutions.
    pub probes: u64,
    pub pseudo_estimates: u64,
    pub tree_builds: u64,
    /// Nodes generated inside look-ahead trees.
    pub tree_nodes: u64,
    pub restarts: u64,
    pub compulsory: u64,
    pub reversals: u64,
}

impl Counters {
    pub fn add_solve(&mut self, pivots: usize) {
        self.lp_solves += 1;
        self.pivots += pivots as u64;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Branched,
    Integral,
    Infeasible,
    Pruned,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneReason {
    Bound,
    Infeasible,
    Incumbent,
    Limit,
    CandidateList,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub var: usize,
    pub dir: Direction,
    pub bound: f64,
    pub compulsory: bool,
    pub straddle: bool,
}

impl From<&crate::model::BoundChange> for BranchRecord {
    fn from(b: &crate::model::BoundChange) -> Self {
        BranchRecord {
            var: b.var,
            dir: b.dir,
            bound: b.bound,
            compulsory: b.compulsory,
            straddle: b.straddle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: Option<BranchRecord>,
    /// LP objective; absent when infeasible.
    pub objective: Option<f64>,
    pub status: NodeStatus,
    /// Compulsory branches absorbed at this node.
    pub implied: Vec<BranchRecord>,
    /// Criterion scores of the candidates compared at this node.
    pub scores: Vec<(usize, f64)>,
    pub prune_reason: Option<PruneReason>,
    /// Position in the order nodes were taken off the open list.
    #[serde(default)]
    pub popped: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentEvent {
    pub node: usize,
    /// Nodes created when the incumbent was found.
    pub nodes_so_far: u64,
    pub objective: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalRecord {
    pub node: usize,
    pub var: usize,
    pub reduced_cost: f64,
    pub threshold: f64,
    /// Distance from the branch's bound back to the antecedent bound.
    #[serde(default)]
    pub span: f64,
    /// Restrictions imposed after the reversed branch and dropped with it.
    #[serde(default)]
    pub dropped: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNodeStatus {
    Open,
    Expanded,
    /// No candidate left to branch on.
    Leaf,
    Infeasible,
    /// Bound no better than the incumbent.
    Pruned,
    /// Removed by post-winnowing.
    Dropped,
    /// Compulsory-branch cap reached.
    Capped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeTrace {
    pub id: usize,
    pub tree: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: Option<(usize, Direction)>,
    pub implied: Vec<(usize, Direction)>,
    pub objective: Option<f64>,
    pub status: TreeNodeStatus,
    /// Whether the node enters the generated-node count.
    pub counted: bool,
}

/// One look-ahead tree built at a branch-and-bound node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTrace {
    pub bb_node: usize,
    pub counted_nodes: usize,
    pub early_exit: bool,
    /// Compulsory branches applied at the tree root.
    pub implied: Vec<(usize, Direction)>,
    pub decision: Option<(usize, Direction)>,
    pub overridden: bool,
    pub nodes: Vec<TreeNodeTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Optimal,
    Feasible,
    Infeasible,
    LimitHit,
}

/// Weights derived from the path to one incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrace {
    pub bb_node: usize,
    pub x_star: f64,
    pub path: Vec<PathStep>,
    pub weights: BTreeMap<usize, DvalWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub schema_version: u32,
    pub instance: String,
    pub strategy: String,
    pub seed: u64,
    pub status: FinalStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub solution: Option<Vec<f64>>,
    pub counters: Counters,
    pub nodes: Vec<NodeRecord>,
    pub incumbents: Vec<IncumbentEvent>,
    pub reversals: Vec<ReversalRecord>,
    pub trees: Vec<TreeTrace>,
    #[serde(default)]
    pub calibrations: Vec<CalibrationTrace>,
    /// Present when analytical pseudo-costs are in use.
    #[serde(default)]
    pub extended: Option<ExtendedTree>,
}

impl RunTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
