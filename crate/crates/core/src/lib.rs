//! Constrained Gaussian Wasserstein optimal transport for commuting covariances.
//!
//! Given a source `N(μ, Σ)` and a prescribed reconstruction law `N(μ̂, Σ̂)`
//! with commuting positive-definite covariances, this crate computes the
//! minimum mean squared error of a transport plan when the plan has to pass
//! through
//!
//! - a rate-limited bit pipeline, with or without common randomness
//!   ([`waterfill`]),
//! - a linear dimension bottleneck ([`dimension`]),
//! - a unit-variance AWGN channel under a power constraint ([`channel`]),
//!
//! together with the unconstrained quantities ([`transport`]) and Monte Carlo
//! checks of the achieving schemes ([`simulate`]).
//!
//! Every solver consumes a [`CanonicalProblem`]: the joint eigenvalues of the
//! two covariances, ordered so that `λ₁λ̂₁ ≥ λ₂λ̂₂ ≥ … ≥ λ_Lλ̂_L`.
//!
//! ```
//! use gwot::{CanonicalProblem, transport, waterfill};
//!
//! let p = CanonicalProblem::from_diagonal(&[2.0, 3.0, 1.0], &[3.0, 1.0, 1.0]).unwrap();
//! assert!((transport::d_max(&p) - 11.0).abs() < 1e-12);
//!
//! let cr = waterfill::rate_cr(&p, 0.1).unwrap();
//! assert!((cr.rates[0] - 0.058).abs() < 5e-4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod channel;
pub mod cli;
pub mod dimension;
mod error;
pub mod simulate;
pub mod transport;
pub mod waterfill;

pub use canonical::{CanonicalProblem, GaussianSpec, ProblemConfig};
pub use error::{Error, Result};
