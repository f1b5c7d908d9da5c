//! Rank-constrained least-squares semidefinite programming through an exact
//! difference-of-convex penalty.
//!
//! The crate solves
//!
//! ```text
//! min_{U ⪰ 0} (1/n)‖A(U) − b‖²   s.t. rank(U) ≤ r
//! ```
//!
//! where `A(U)ᵢ = τᵢᵀUτᵢ` comes from pairwise differences of a data set, by
//! penalizing `c(tr U − ‖U‖_(r))` and running proximal DC iterations. The
//! main solver is the sieving inexact proximal DC method in [`dc`], whose
//! subproblems are solved in the dual by accelerated block coordinate
//! descent ([`inner`]). Classical proximal DC and its extrapolated variant
//! are provided as baselines.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dc;
pub mod error;
pub mod inner;
pub mod io;
pub mod pairs;
pub mod pipeline;
pub mod problem;
pub mod spectral;

pub use dc::{
    initial_point, objective_j, objective_jc, pdca_solve, pdcae_solve, penalty_continuation,
    sipdca_solve, stopping_eta, Algorithm, IterateLog, IterateRecord, Solution, SolveStatus,
    SolverConfig, StepKind,
};
pub use error::{Error, Result};
pub use inner::{abcd_solve, AbcdOptions, InnerResult, PhiTerm, WarmStart};
pub use pairs::PairMap;
pub use problem::{Dataset, SdppInstance};
pub use spectral::{EigenDecomposition, FactoredPsd, SymmetricMatrix};
