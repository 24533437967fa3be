//! Ridge regression by Kaczmarz-type iterations.
//!
//! RK-RR alternates an RK projection with the shrinkage `x ← μ x`; its
//! tail average is TARK-RR. The regularized solution it targets is
//! `x_μ = (AᵀA + λI)⁻¹Aᵀb` with `λ = (1 − μ)/μ · ‖A‖_F²`. Two baselines
//! are included: plain RK/TARK on the augmented system `[A; √λ I]`, and
//! coordinate descent on the dual (dual RK).

use crate::error::{Error, Result};
use crate::kaczmarz::{
    check_start, relaxed_project, AveragingMode, TailAverager, TraceSink,
};
use crate::linalg::{dot, DenseMatrix, LeastSquaresProblem};
use crate::rows::{FiniteRows, RowOracle};
use crate::sampling::RngStream;

/// `λ = (1 − μ)/μ · ‖A‖_F²` for `μ ∈ (0, 1)`.
pub fn mu_to_lambda(mu: f64, frob_sq: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidParameter(format!("mu {mu} outside (0, 1)")));
    }
    if !(frob_sq > 0.0 && frob_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!("frob_sq {frob_sq} must be positive")));
    }
    Ok((1.0 - mu) / mu * frob_sq)
}

/// Inverse of [`mu_to_lambda`]: `μ = ‖A‖_F² / (‖A‖_F² + λ)`.
pub fn lambda_to_mu(lambda: f64, frob_sq: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
    }
    if !(frob_sq > 0.0 && frob_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!("frob_sq {frob_sq} must be positive")));
    }
    Ok(frob_sq / (frob_sq + lambda))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeConfig {
    pub mu: f64,
    pub lambda: f64,
    pub t: u64,
    pub t_b: u64,
    pub seed: u64,
}

impl RidgeConfig {
    /// Derives `λ` from `μ` and `‖A‖_F²`; burn-in defaults to `⌊t/4⌋`.
    pub fn new(mu: f64, frob_sq: f64, t: u64, seed: u64) -> Result<Self> {
        let lambda = mu_to_lambda(mu, frob_sq)?;
        if t < 1 {
            return Err(Error::InvalidParameter("t must be at least 1".into()));
        }
        Ok(Self {
            mu,
            lambda,
            t,
            t_b: t / 4,
            seed,
        })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mu {mu} outside (0, 1]")))
    }
}

/// `μ (x + (b_i − rowᵀx)/‖row‖² row)`
pub fn rkrr_step(x: &[f64], row: &[f64], b_i: f64, mu: f64) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let mut out = crate::kaczmarz::rk_step(x, row, b_i)?;
    out.iter_mut().for_each(|v| *v *= mu);
    Ok(out)
}

#[inline]
fn shrink_project(x: &mut [f64], row: &[f64], b: f64, sq_norm: f64, mu: f64) {
    relaxed_project(x, row, b, sq_norm, 1.0);
    for v in x.iter_mut() {
        *v *= mu;
    }
}

/// RK-RR with final time `t`; returns `x_{t−1}`.
pub fn run_rkrr<O: RowOracle + ?Sized>(
    oracle: &O,
    mu: f64,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    check_mu(mu)?;
    check_start(oracle, x0)?;
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; oracle.dim()];
    if matches!(trace.next_checkpoint(), Some(0)) {
        trace.record(0, &x);
    }
    for s in 0..t.saturating_sub(1) {
        let row = oracle.draw(rng, &mut scratch);
        shrink_project(&mut x, row.features, row.response, row.sq_norm, mu);
        if matches!(trace.next_checkpoint(), Some(c) if c <= s + 1) {
            trace.record(s + 1, &x);
        }
    }
    Ok(x)
}

/// TARK-RR: mean of the RK-RR iterates `x_{t_b} .. x_{t−1}`. At `μ = 1`
/// this is TARK, bit for bit.
pub fn run_tark_rr<O: RowOracle + ?Sized>(
    oracle: &O,
    mu: f64,
    x0: &[f64],
    t_b: u64,
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    check_mu(mu)?;
    if t_b >= t {
        return Err(Error::InvalidParameter(format!(
            "burn-in {t_b} must be below t = {t}"
        )));
    }
    check_start(oracle, x0)?;
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; oracle.dim()];
    let mut avg = TailAverager::new(AveragingMode::FixedBurnIn(t_b), x.len());
    avg.push(&x);
    let snapshot = |avg: &TailAverager, x: &[f64]| avg.estimate().unwrap_or_else(|| x.to_vec());
    if matches!(trace.next_checkpoint(), Some(0)) {
        trace.record(0, &snapshot(&avg, &x));
    }
    for s in 0..t - 1 {
        let row = oracle.draw(rng, &mut scratch);
        shrink_project(&mut x, row.features, row.response, row.sq_norm, mu);
        avg.push(&x);
        if matches!(trace.next_checkpoint(), Some(c) if c <= s + 1) {
            trace.record(s + 1, &snapshot(&avg, &x));
        }
    }
    Ok(avg.estimate().expect("tail is nonempty when t_b < t"))
}

/// Stacks `A` over `√λ I` and `b` over zeros. The least-squares solution
/// of the result is the ridge solution of the input.
pub fn augmented_problem(problem: &LeastSquaresProblem, lambda: f64) -> Result<LeastSquaresProblem> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
    }
    let (n, d) = (problem.n_rows(), problem.n_cols());
    let mut entries = Vec::with_capacity((n + d) * d);
    entries.extend_from_slice(problem.matrix.entries());
    let s = lambda.sqrt();
    for j in 0..d {
        entries.extend((0..d).map(|k| if k == j { s } else { 0.0 }));
    }
    let mut rhs = problem.rhs.clone();
    rhs.resize(n + d, 0.0);
    LeastSquaresProblem::new(DenseMatrix::new(n + d, d, entries)?, rhs)
}

/// Dual RK: coordinate descent on `½ yᵀ(AAᵀ + λI)y − bᵀy` with rows drawn
/// by squared norm and `x = Aᵀy` kept in sync. Starts from `y = 0` and
/// performs `t − 1` steps; returns `x`.
pub fn run_dual_rk(
    problem: &LeastSquaresProblem,
    lambda: f64,
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
    }
    let rows = FiniteRows::new(problem)?;
    let mut x = vec![0.0; problem.n_cols()];
    let mut y = vec![0.0; problem.n_rows()];
    if matches!(trace.next_checkpoint(), Some(0)) {
        trace.record(0, &x);
    }
    for s in 0..t.saturating_sub(1) {
        let i = rows.sampler().sample(rng);
        let a = problem.matrix.row(i);
        let delta = (problem.rhs[i] - dot(a, &x) - lambda * y[i])
            / (problem.matrix.row_sq_norm(i) + lambda);
        y[i] += delta;
        for (xj, aj) in x.iter_mut().zip(a) {
            *xj += delta * aj;
        }
        if matches!(trace.next_checkpoint(), Some(c) if c <= s + 1) {
            trace.record(s + 1, &x);
        }
    }
    Ok(x)
}

#[inline]
fn ridge_contraction(kappa_dem: f64, mu: f64) -> f64 {
    mu * mu * (1.0 - 1.0 / (kappa_dem * kappa_dem))
}

/// RK-RR: `init_err_sq = ‖x₀ − x_μ‖²`, `residual_mu_sq = ‖b − A x_μ‖²`.
pub fn bound_theorem4(
    kappa_dem: f64,
    mu: f64,
    lambda: f64,
    init_err_sq: f64,
    residual_mu_sq: f64,
    t: u64,
) -> f64 {
    2.0 * ridge_contraction(kappa_dem, mu).powf(t as f64) * init_err_sq
        + 2.0 * mu / ((1.0 + mu) * lambda) * residual_mu_sq
}

/// TARK-RR, same conventions as [`bound_theorem4`].
pub fn bound_theorem5(
    kappa_dem: f64,
    mu: f64,
    lambda: f64,
    init_err_sq: f64,
    residual_mu_sq: f64,
    t_b: u64,
    t: u64,
) -> f64 {
    assert!(t_b < t, "burn-in must be below the final time");
    2.0 * ridge_contraction(kappa_dem, mu).powf(t_b as f64) * init_err_sq
        + 2.0 * mu / ((t - t_b) as f64 * (1.0 - mu) * lambda) * residual_mu_sq
}
