//! Row sources for Kaczmarz-type iterations.
//!
//! A [`RowOracle`] hands out rows already drawn from the `‖a‖²`-weighted
//! distribution, so the same solver loop serves a finite matrix and a
//! continuously indexed family of rows.

use crate::error::Result;
use crate::linalg::LeastSquaresProblem;
use crate::sampling::{RngStream, WeightedSampler};

/// A row `a` with response `b` and cached `‖a‖²`.
#[derive(Clone, Copy, Debug)]
pub struct SampledRow<'a> {
    pub features: &'a [f64],
    pub response: f64,
    pub sq_norm: f64,
    /// Position in the underlying matrix, for finite sources.
    pub index: Option<usize>,
}

pub trait RowOracle {
    /// Number of features `d`.
    fn dim(&self) -> usize;

    /// Draws a row with probability proportional to its squared norm.
    /// Sources that synthesize rows write them into `scratch` (length
    /// `dim()`).
    fn draw<'a>(&'a self, rng: &mut RngStream, scratch: &'a mut [f64]) -> SampledRow<'a>;

    /// `∫ ‖a‖² dν`, or `‖A‖_F²` for a finite matrix.
    fn frob_sq(&self) -> f64;

    /// Upper bound on any single `‖a‖²`.
    fn norm_bound(&self) -> f64;
}

/// Finite matrix rows with alias-table sampling.
#[derive(Clone, Debug)]
pub struct FiniteRows<'p> {
    problem: &'p LeastSquaresProblem,
    sampler: WeightedSampler,
}

impl<'p> FiniteRows<'p> {
    pub fn new(problem: &'p LeastSquaresProblem) -> Result<Self> {
        let sampler = WeightedSampler::for_matrix(&problem.matrix)?;
        Ok(Self { problem, sampler })
    }

    pub fn problem(&self) -> &'p LeastSquaresProblem {
        self.problem
    }

    pub fn sampler(&self) -> &WeightedSampler {
        &self.sampler
    }
}

impl RowOracle for FiniteRows<'_> {
    fn dim(&self) -> usize {
        self.problem.n_cols()
    }

    #[inline]
    fn draw<'a>(&'a self, rng: &mut RngStream, _scratch: &'a mut [f64]) -> SampledRow<'a> {
        let i = self.sampler.sample(rng);
        SampledRow {
            features: self.problem.matrix.row(i),
            response: self.problem.rhs[i],
            sq_norm: self.problem.matrix.row_sq_norm(i),
            index: Some(i),
        }
    }

    fn frob_sq(&self) -> f64 {
        self.sampler.total()
    }

    fn norm_bound(&self) -> f64 {
        self.problem
            .matrix
            .row_sq_norms()
            .iter()
            .fold(0.0, |m, &v| m.max(v))
    }
}
