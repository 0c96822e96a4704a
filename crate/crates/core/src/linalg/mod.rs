//! Exact rational and precision-tracked big-float linear algebra.

pub mod bigfloat;
pub mod rational;

pub use bigfloat::{det_highprec, det_highprec_adaptive, BigFloatMatrix, HighPrecisionDet};
pub use rational::{det_exact, permanent_exact, RationalMatrix};
