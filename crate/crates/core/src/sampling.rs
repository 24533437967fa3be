//! Random streams and row-selection distributions.
//!
//! Rows are drawn with probability `‖a_i‖² / ‖A‖_F²` from a Vose alias
//! table, so each draw costs two uniforms regardless of `n`.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LeastSquaresProblem};

/// One step of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded xoshiro256++ stream. The 64-bit seed is expanded to the full
/// state with splitmix64.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream for e.g. `(master_seed, method_index, trial)`.
    pub fn derive(master: u64, path: &[u64]) -> Self {
        Self::new(derive_seed(master, path))
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Standard normal via Box–Muller; the second variate of each pair is
    /// cached for the next call.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Vose alias table over nonnegative weights.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    weights: Vec<f64>,
    total: f64,
    threshold: Vec<f64>,
    alias: Vec<usize>,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "sampling weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let n = weights.len();
        let scale = n as f64 / total;
        let mut threshold: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias: Vec<usize> = (0..n).collect();

        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &p) in threshold.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            threshold[l] -= 1.0 - threshold[s];
            if threshold[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        let heaviest = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(i, _)| i)
            .expect("nonempty");
        for i in large.into_iter().chain(small) {
            // leftovers are within rounding of 1, except true zeros
            if weights[i] > 0.0 {
                threshold[i] = 1.0;
            } else {
                threshold[i] = 0.0;
                alias[i] = heaviest;
            }
        }
        Ok(Self {
            weights: weights.to_vec(),
            total,
            threshold,
            alias,
        })
    }

    pub fn for_matrix(matrix: &DenseMatrix) -> Result<Self> {
        Self::new(matrix.row_sq_norms())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let column = rng.below(self.threshold.len());
        if rng.uniform() < self.threshold[column] {
            column
        } else {
            self.alias[column]
        }
    }

    /// Per-index probabilities implied by the alias tables.
    pub fn table_probabilities(&self) -> Vec<f64> {
        let n = self.threshold.len() as f64;
        let mut p: Vec<f64> = self.threshold.iter().map(|t| t / n).collect();
        for (j, &t) in self.threshold.iter().enumerate() {
            if t < 1.0 {
                p[self.alias[j]] += (1.0 - t) / n;
            }
        }
        p
    }
}

/// Source of candidates for [`rejection_sample`]: returns a candidate drawn
/// from the base measure together with its squared norm.
pub trait CandidateProvider {
    type Candidate;
    fn propose(&self, rng: &mut RngStream) -> (Self::Candidate, f64);
}

impl<T, F> CandidateProvider for F
where
    F: Fn(&mut RngStream) -> (T, f64),
{
    type Candidate = T;
    fn propose(&self, rng: &mut RngStream) -> (T, f64) {
        self(rng)
    }
}

pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

/// Draws a candidate with density proportional to its squared norm times
/// the base measure. Accepts when `u · norm_bound < ‖a‖²`.
pub fn rejection_sample<P: CandidateProvider>(
    norm_bound: f64,
    provider: &P,
    rng: &mut RngStream,
) -> Result<P::Candidate> {
    if !(norm_bound > 0.0 && norm_bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "norm bound must be positive, got {norm_bound}"
        )));
    }
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let (candidate, norm_sq) = provider.propose(rng);
        if norm_sq > norm_bound {
            return Err(Error::BoundViolation {
                bound: norm_bound,
                norm_sq,
            });
        }
        if rng.uniform() * norm_bound < norm_sq {
            return Ok(candidate);
        }
    }
    Err(Error::RejectionExhausted(MAX_REJECTION_ATTEMPTS))
}

/// Rescales every row (and its right-hand side) to unit norm, dropping
/// zero rows. Returns the reweighted problem and the number dropped.
///
/// The reweighted problem generally has a different least-squares solution;
/// no reference solution is carried over.
pub fn diag_reweight(problem: &LeastSquaresProblem) -> Result<(LeastSquaresProblem, usize)> {
    let d = problem.n_cols();
    let mut entries = Vec::with_capacity(problem.n_rows() * d);
    let mut rhs = Vec::with_capacity(problem.n_rows());
    let mut dropped = 0;
    for (i, row) in problem.matrix.rows().enumerate() {
        let sq = problem.matrix.row_sq_norm(i);
        if sq == 0.0 {
            dropped += 1;
            continue;
        }
        let inv = 1.0 / sq.sqrt();
        entries.extend(row.iter().map(|v| v * inv));
        rhs.push(problem.rhs[i] * inv);
    }
    if rhs.is_empty() {
        return Err(Error::ZeroMatrix);
    }
    let matrix = DenseMatrix::new(rhs.len(), d, entries)?;
    Ok((LeastSquaresProblem::new(matrix, rhs)?, dropped))
}
