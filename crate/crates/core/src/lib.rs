//! Swap-regret testbed for tree-form decision problems.
//!
//! - [`treeform`]: tree-form problems, realization-form strategies, best responses.
//! - [`regret`]: transcripts, swap/external regret, correlated-equilibrium gaps.
//! - [`learners`]: Hedge and Blum–Mansour learners, self-play.
//! - [`lowerbound`]: the random-codeword embedding of a normal-form adversary
//!   into a tree-form problem, concentration checks and parameter selection.
//! - [`reduction`]: projection of tree-form play back to the normal-form
//!   problem and the per-run regret-transfer inequalities.
//! - [`cli`]: configs, seeded experiment runners and CSV output.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod learners;
pub mod lowerbound;
pub mod reduction;
pub mod regret;
pub mod seed;
pub mod treeform;

pub use error::{Error, Result};
pub use treeform::{MixedStrategy, PureStrategy, TreeFormProblem, UtilityVector};
