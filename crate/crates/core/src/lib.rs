//! Branch-and-bound for mixed-integer programs with narrow-gauge look-ahead
//! branching.

pub mod bench;
pub mod costs;
pub mod criteria;
pub mod driver;
pub mod error;
pub mod lookahead;
pub mod lp;
pub mod model;
pub mod mps;
pub mod straddle;
pub mod trace;
pub mod winnow;

pub use error::{CostError, LpError, ParseError, SolveError};
pub use lp::{Direction, LpModel, LpSolution, LpStatus, PivotBudget};
pub use model::{MipProblem, NodeState};
pub use mps::{parse_mps, write_mps};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lp.md")]
mod book_lp {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/criteria.md")]
mod book_criteria {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lookahead.md")]
mod book_lookahead {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/straddle.md")]
mod book_straddle {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/costs.md")]
mod book_costs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/driver.md")]
mod book_driver {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/trace.md")]
mod book_trace {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bench.md")]
mod book_bench {}
