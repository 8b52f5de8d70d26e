//! Fourier–Feynman transforms of cylinder functionals taken along the
//! processes `𝒵_h`, with closed forms, quadrature and Monte Carlo checks.
//!
//! Start with [`grid`] for weights and paths on a time grid, [`cylinder`]
//! for functionals, [`gfft`] for the transforms and [`algebra`] for the
//! monoid and group structure they carry.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod config;
pub mod cylinder;
pub mod error;
pub mod gauss;
pub mod gfft;
pub mod grid;
pub mod quad;
pub mod report;
pub mod rng;
pub mod suites;
pub mod wiener;

pub use error::{Error, Result};
