//! Memories of branching costs: pseudo-costs, the extended tree behind
//! analytical pseudo-costs, depth-calibrated node scores and the
//! reference set.

mod dval;
mod extended;
mod pseudo;
mod refset;

pub use dval::{
    calibrate, fixed_wo_w1, single_weight, solve_2x2, DvalApproach, DvalTables, DvalWeights,
    PathStep,
};
pub use extended::{
    Analytical, AnalyticalThresholds, ExtNodeId, ExtRecord, ExtendedTree, QueryLog, SymDifMetrics,
};
pub use pseudo::{PseudoCostTable, PseudoEntry};
pub use refset::{BdStats, RefSolution, ReferenceSet, LARGE};
