//! Row-access randomized Kaczmarz solvers for overdetermined least squares
//! and ridge regression.
//!
//! The crate is organized by layer:
//!
//! - [`linalg`]: dense storage, pivoted QR reference solves, spectral
//!   quantities such as the Demmel condition number.
//! - [`sampling`]: seeded random streams, alias-table row sampling,
//!   rejection sampling and diagonal reweighting.
//! - [`rows`]: the [`rows::RowOracle`] abstraction that lets every solver run
//!   on finite matrices and on continuously indexed (semi-infinite) rows.
//! - [`kaczmarz`]: RK, tail-averaged RK (fixed and doubling burn-in),
//!   underrelaxed RK, averaged RK, and their mean-square-error bounds.
//! - [`ridge`]: weight-decay RK for ridge regression, the augmented system,
//!   the dual coordinate baseline, and their bounds.
//! - [`active`]: QR preconditioning with volume-sampled initialization.
//! - [`problems`]: polynomial-regression and lower-bound problem generators.
//! - [`harness`]: seeded multi-trial experiments, checkpoints, CSV output and
//!   Monte-Carlo bound verification.

pub mod active;
pub mod error;
pub mod harness;
pub mod kaczmarz;
pub mod linalg;
pub mod problems;
pub mod ridge;
pub mod rows;
pub mod sampling;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, LeastSquaresProblem, SpectralSummary};
pub use sampling::RngStream;
