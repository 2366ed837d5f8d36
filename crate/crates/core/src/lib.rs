//! Finite-dimensional operator spaces `X ⊆ M_{p×q}(ℂ)` and numerical
//! decision procedures for their structure: whether a given element is a
//! unitary, coisometry or isometry, whether the space is an operator system,
//! and whether it is closed under multiplication or carries an operator
//! algebra product.
//!
//! Each universally quantified criterion is tested by a seeded, bounded
//! search over the matrix levels `M_n(X)`. A search that finds nothing
//! reports [`Verdict::HoldsWithinBudget`], never a proof; a violation comes
//! with a witness that re-evaluates from scratch.
//!
//! The matrix layer is generic over the real field ([`Real`]); the search
//! and reporting layers work in `f64`.

pub mod corpus;
pub mod criteria;
pub mod error;
pub mod formulas;
pub mod gadgets;
pub mod matcore;
pub mod opspace;
pub mod scalar;
pub mod witness;

pub use criteria::{run_check, CheckReport, CheckRequest, CriterionId, Verdict, Witness};
pub use error::{Error, Result};
pub use matcore::{op_norm, trace_norm, CMat, RngStream};
pub use opspace::{load_space, LevelElement, SpaceRep};
pub use scalar::{Real, C};
pub use witness::SearchConfig;

/// Master seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 0x5_EED0_F0A5;

pub type C64 = C<f64>;
pub type CMat64 = CMat<f64>;
pub type Space = SpaceRep<f64>;
pub type Element = LevelElement<f64>;
