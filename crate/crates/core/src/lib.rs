//! MaxEnt-derived neural network layers.
//!
//! Each layer starts from a dimension-reducing linear map z = W'x and a
//! maximum-entropy prior on x. The crate provides the pieces that fall out
//! of that construction:
//!
//! - [`exponential_family`] — the catalog of prior/activation pairs
//!   (truncated exponential, truncated Gaussian, exponential, Gaussian),
//!   their mean functions, derivatives, and samplers.
//! - [`gamma_inverse`] — the saddle-point solve W'lambda(theta0 + Wh) = z
//!   that inverts a layer, with exact derivatives for back-propagation.
//! - [`manifold_sampler`] — exact posterior sampling on {x : W'x = z} via
//!   hit-and-run MCMC, the Gaussian closed form, and a small-instance
//!   quadrature oracle for the true conditional mean.
//! - [`pbn`] — projected-belief-network autoencoders: feed-forward analysis,
//!   backward reconstruction through shared weights, stochastic generation,
//!   sampling-efficiency measurement, and gradient training.
//! - [`numerics`] — dense linear algebra, special functions, and the
//!   seeded RNG streams everything else builds on.
//!
//! Matrices are row-major `ndarray::Array2<f64>`; design matrices W are
//! N x M with N >= M and full column rank.

// special-function coefficients and reference constants keep every digit
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod exponential_family;
pub mod gamma_inverse;
pub mod manifold_sampler;
pub mod numerics;
pub mod pbn;

pub use error::{Error, Result};
pub use exponential_family::{ActivationKind, Support, UnivariateLaw};
pub use gamma_inverse::{LayerMap, SaddleSolution, SolverConfig};
pub use numerics::RngStream;
