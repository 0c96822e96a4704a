//! Bracketing entropy of bounded completely monotone functions and small-ball
//! estimates for the smooth Gaussian process with covariance
//! `(1 - exp(-t - s)) / (t + s)`.
//!
//! The crate is organised around five pieces:
//!
//! - [`measure`]: completely monotone functions as finite mixtures of
//!   exponentials, `L^p(nu)` distances and random generators.
//! - [`bracket`]: explicit epsilon-brackets built from block-wise truncated
//!   Taylor expansions with quantized coefficients, plus realization counting.
//! - [`linalg`]: exact rational determinants and permanents, and
//!   precision-tracked big-float determinants.
//! - [`smallball`]: the design-point sequence, Cauchy determinants, the
//!   determinant/permanent inequalities and the resulting small-ball bounds.
//! - [`sim`]: Monte Carlo estimates of small-ball probabilities and the
//!   scaling-law fit.
//!
//! The [`cli`] module backs the `laplace-entropy` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bracket;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod quadrature;
pub mod sim;
pub mod smallball;

pub use error::{Error, Result};
