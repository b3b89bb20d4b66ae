//! Computational hyperbolic geometry in the Vahlen model of `Iso+(H^{n+1})`.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN on purpose

pub mod clifford;
pub mod eisenstein;
pub mod excursion;
pub mod scalar;
pub mod harmonics;
pub mod lie;
pub mod picard;
pub mod vahlen;

pub use clifford::{CliffordElement, CliffordError, CliffordGroupElement, VectorElement};
pub use scalar::{Exact, Scalar};
pub use vahlen::{dist_hyp, CliffordMatrix, UpperHalfPoint, VahlenError, VahlenMatrix};
