//! Preconditioned TARK with a volume-sampled start.
//!
//! Pipeline: thin QR `A P = Q R`, draw `r` rows `S` with probability
//! `∝ det(Q_S)²`, start at `y₀ = Q_S⁻¹ b_S`, run TARK on `min ‖b − Q y‖`,
//! and map back through `R`. Only `r + (t − 1)` entries of `b` are read.

use crate::error::{Error, Result};
use crate::kaczmarz::{run_tark, NoTrace, TraceSink};
use crate::linalg::{dot, DenseMatrix, LeastSquaresProblem, PivotedQr};
use crate::rows::FiniteRows;
use crate::sampling::RngStream;

/// Resampling attempts when `Q_S` is numerically singular.
pub const MAX_VOLUME_RETRIES: u32 = 32;

/// Thin QR factors of a numerical-rank-`r` matrix.
#[derive(Clone, Debug)]
pub struct QRFactors {
    /// `n × r`, orthonormal columns.
    pub q: DenseMatrix,
    /// `r × d` upper trapezoid, columns in pivoted order.
    pub r: DenseMatrix,
    /// `perm[k]` is the original index of pivoted column `k`.
    pub perm: Vec<usize>,
    qr: PivotedQr,
}

impl QRFactors {
    pub fn rank(&self) -> usize {
        self.q.n_cols()
    }

    /// Minimum-norm `x` with `R Pᵀ x = y`.
    pub fn solve_r(&self, y: &[f64]) -> Vec<f64> {
        self.qr.solve_upper_min_norm(y)
    }
}

pub fn thin_qr(matrix: &DenseMatrix) -> Result<QRFactors> {
    let qr = PivotedQr::factor(matrix);
    let rank = qr.rank();
    if rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    let q = qr.thin_q(rank);
    let r = DenseMatrix::new(rank, matrix.n_cols(), qr.r_factor(rank))?;
    Ok(QRFactors {
        q,
        r,
        perm: qr.perm().to_vec(),
        qr,
    })
}

/// Row subset `S` with `|S| = r`, in draw order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VolumeSample {
    pub indices: Vec<usize>,
}

impl VolumeSample {
    /// Indices in increasing order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }
}

/// Draws `S` with `P(S) ∝ det(Q_S)²` for `Q` with orthonormal columns.
///
/// Sequential projection sampling: pick a row with probability
/// proportional to its squared norm after projecting out the rows
/// already chosen, then project it out of every row.
pub fn volume_sample(q: &DenseMatrix, rng: &mut RngStream) -> Result<VolumeSample> {
    let (n, r) = (q.n_rows(), q.n_cols());
    if n < r {
        return Err(Error::Dimension(format!("need n >= r, got n = {n}, r = {r}")));
    }
    let mut work = q.entries().to_vec();
    let mut weights: Vec<f64> = q.row_sq_norms().to_vec();
    let mut indices = Vec::with_capacity(r);
    let mut dir = vec![0.0; r];
    for step in 0..r {
        let total: f64 = weights.iter().sum();
        // the remaining mass is r − step in exact arithmetic
        if !(total > 1e-8 * (r - step) as f64) {
            return Err(Error::Singular(format!(
                "Q has rank below {r} (leverage mass {total} at step {step})"
            )));
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if target < acc {
                break;
            }
        }
        let i = pick.expect("positive total has a positive entry");
        indices.push(i);

        let norm = weights[i].sqrt();
        dir.iter_mut()
            .zip(&work[i * r..(i + 1) * r])
            .for_each(|(d, w)| *d = w / norm);
        for j in 0..n {
            let row = &mut work[j * r..(j + 1) * r];
            let c = dot(row, &dir);
            row.iter_mut().zip(&dir).for_each(|(v, d)| *v -= c * d);
            weights[j] = if j == i || indices.contains(&j) {
                0.0
            } else {
                dot(row, row)
            };
        }
    }
    Ok(VolumeSample { indices })
}

/// Solves the square system `M y = c` (row-major `M`) by LU with partial
/// pivoting. Fails when a pivot falls below `tol`.
pub fn lu_solve(m: &[f64], c: &[f64], tol: f64) -> Result<Vec<f64>> {
    let k = c.len();
    assert_eq!(m.len(), k * k);
    let mut a = m.to_vec();
    let mut b = c.to_vec();
    for col in 0..k {
        let p = (col..k)
            .max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))
            .expect("nonempty range");
        if !(a[p * k + col].abs() > tol) {
            return Err(Error::Singular(format!(
                "pivot {} at column {col}",
                a[p * k + col]
            )));
        }
        if p != col {
            for j in 0..k {
                a.swap(p * k + j, col * k + j);
            }
            b.swap(p, col);
        }
        let piv = a[col * k + col];
        for i in col + 1..k {
            let f = a[i * k + col] / piv;
            if f != 0.0 {
                for j in col..k {
                    a[i * k + j] -= f * a[col * k + j];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i * k + j] * y[j]).sum();
        y[i] = (b[i] - s) / a[i * k + i];
    }
    Ok(y)
}

/// Result of one preconditioned run.
#[derive(Clone, Debug)]
pub struct ActiveEstimate {
    pub x: Vec<f64>,
    pub y0: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub subset: VolumeSample,
    /// Entries of `b` read: `r` for the start plus one per TARK step.
    pub entries_accessed: u64,
    /// Volume draws discarded because `Q_S` was numerically singular.
    pub retries: u32,
}

/// Factors `A` once so that repeated runs only pay for sampling.
#[derive(Clone, Debug)]
pub struct PreconditionedTark {
    factors: QRFactors,
    orthonormal: LeastSquaresProblem,
}

impl PreconditionedTark {
    pub fn new(problem: &LeastSquaresProblem) -> Result<Self> {
        let factors = thin_qr(&problem.matrix)?;
        let orthonormal = LeastSquaresProblem::new(factors.q.clone(), problem.rhs.clone())?;
        Ok(Self {
            factors,
            orthonormal,
        })
    }

    pub fn factors(&self) -> &QRFactors {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// Volume-sampled start `y₀ = Q_S⁻¹ b_S`.
    pub fn initial_estimate(&self, rng: &mut RngStream) -> Result<(VolumeSample, Vec<f64>, u32)> {
        let q = &self.factors.q;
        let r = q.n_cols();
        let tol = 1e-12 * r as f64;
        let mut retries = 0;
        loop {
            let subset = volume_sample(q, rng)?;
            let mut m = Vec::with_capacity(r * r);
            subset.indices.iter().for_each(|&i| m.extend_from_slice(q.row(i)));
            let rhs: Vec<f64> = subset.indices.iter().map(|&i| self.orthonormal.rhs[i]).collect();
            match lu_solve(&m, &rhs, tol) {
                Ok(y0) => return Ok((subset, y0, retries)),
                Err(e) if retries >= MAX_VOLUME_RETRIES => return Err(e),
                Err(_) => retries += 1,
            }
        }
    }

    pub fn run(
        &self,
        t_b: u64,
        t: u64,
        rng: &mut RngStream,
        trace: &mut dyn TraceSink,
    ) -> Result<ActiveEstimate> {
        let (subset, y0, retries) = self.initial_estimate(rng)?;
        let rows = FiniteRows::new(&self.orthonormal)?;
        let y_bar = run_tark(&rows, &y0, t_b, t, rng, trace)?;
        let x = self.factors.solve_r(&y_bar);
        Ok(ActiveEstimate {
            x,
            y0,
            y_bar,
            subset,
            entries_accessed: self.rank() as u64 + (t - 1),
            retries,
        })
    }
}

pub fn run_preconditioned_tark(
    problem: &LeastSquaresProblem,
    t_b: u64,
    t: u64,
    rng: &mut RngStream,
) -> Result<ActiveEstimate> {
    PreconditionedTark::new(problem)?.run(t_b, t, rng, &mut NoTrace)
}

/// Bound on `E‖b − A x̂‖² / ‖b − A x⋆‖²`.
pub fn bound_theorem6(r: usize, t_b: u64, t: u64) -> f64 {
    assert!(r >= 1 && t_b < t);
    let r = r as f64;
    1.0 + (1.0 - 1.0 / r).powf(t_b as f64) * r + (2.0 * r - 1.0) / (t - t_b) as f64
}

/// Entries of `b` sufficient for a `1 + ε` residual factor:
/// `r + r ln(2r/ε) + (4r − 2)/ε`.
pub fn entry_budget(r: usize, eps: f64) -> f64 {
    let r = r as f64;
    r + r * (2.0 * r / eps).ln() + (4.0 * r - 2.0) / eps
}

/// TARK final time and burn-in spending `entry_budget(r, ε)` entries
/// (rounded up), with the burn-in at half the final time.
pub fn budget_schedule(r: usize, eps: f64) -> (u64, u64) {
    let entries = entry_budget(r, eps).ceil() as u64;
    let t = entries - r as u64 + 1;
    (t / 2, t)
}
