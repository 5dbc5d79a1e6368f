//! Sum-of-squares approximations of nonnegative polynomials.
//!
//! A nonnegative polynomial `f` becomes a sum of squares after adding
//! `ε Θ_r(x) = ε Σ_{k<=r} Σ_j x_j^{2k}/k!` for suitable `r`. This crate
//! builds the moment relaxations that produce such representations,
//! solves them with a dense primal-dual interior-point method, and turns
//! the dual solutions into checkable certificates.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certfile;
pub mod certificate;
pub mod cli;
pub mod convex_kkt;
pub mod error;
pub mod linalg;
pub mod moment;
pub mod poly;
pub mod relaxation;
pub mod sampling;
pub mod sdp;

pub use error::*;
