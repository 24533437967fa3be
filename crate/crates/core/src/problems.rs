//! Test problems: noisy polynomial regression, the block-of-ones class
//! used for entry-budget lower bounds, and a continuously indexed
//! Chebyshev row source.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LeastSquaresProblem};
use crate::rows::{RowOracle, SampledRow};
use crate::sampling::{rejection_sample, RngStream};

/// Function sampled by the regression problems.
pub fn target_function(u: f64) -> f64 {
    use std::f64::consts::PI;
    (PI * u).sin() * (-2.0 * u).exp() + (4.0 * PI * u).cos()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Chebyshev,
    Monomial,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chebyshev" => Ok(Basis::Chebyshev),
            "monomial" => Ok(Basis::Monomial),
            other => Err(Error::InvalidParameter(format!("unknown basis `{other}`"))),
        }
    }
}

/// Writes `φ_0(u) .. φ_{d−1}(u)` into `out`.
pub fn basis_values(basis: Basis, u: f64, out: &mut [f64]) {
    let d = out.len();
    if d == 0 {
        return;
    }
    out[0] = 1.0;
    if d == 1 {
        return;
    }
    match basis {
        Basis::Chebyshev => {
            out[1] = u;
            for j in 2..d {
                out[j] = 2.0 * u * out[j - 1] - out[j - 2];
            }
        }
        Basis::Monomial => {
            for j in 1..d {
                out[j] = out[j - 1] * u;
            }
        }
    }
}

/// `Σ c_j φ_j(u)` by Clenshaw (Chebyshev) or Horner (monomial).
pub fn eval_poly(coeffs: &[f64], basis: Basis, u: f64) -> f64 {
    match basis {
        Basis::Monomial => coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c),
        Basis::Chebyshev => {
            let (mut b1, mut b2) = (0.0, 0.0);
            for &c in coeffs.iter().skip(1).rev() {
                let b0 = 2.0 * u * b1 - b2 + c;
                b2 = b1;
                b1 = b0;
            }
            coeffs.first().copied().unwrap_or(0.0) + u * b1 - b2
        }
    }
}

/// `n` equally spaced points on `[−1, 1]`, endpoints included.
pub fn abscissae(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let h = 2.0 / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { 1.0 } else { -1.0 + h * i as f64 })
                .collect()
        }
    }
}

fn default_noise_std() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyRegressionSpec {
    pub n: usize,
    pub d: usize,
    pub basis: Basis,
    /// Standard deviation of the additive Gaussian noise.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PolyRegressionSpec {
    pub fn new(n: usize, d: usize, basis: Basis, seed: u64) -> Self {
        Self {
            n,
            d,
            basis,
            noise_std: default_noise_std(),
            seed,
        }
    }
}

/// Design `A_ij = φ_j(u_i)` and responses `b_i = f(u_i) + ε_i`, with the
/// least-squares solution attached.
pub fn gen_poly_regression(spec: &PolyRegressionSpec) -> Result<LeastSquaresProblem> {
    if spec.d == 0 || spec.n < spec.d {
        return Err(Error::InvalidParameter(format!(
            "need n >= d >= 1, got n = {}, d = {}",
            spec.n, spec.d
        )));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise_std must be finite and >= 0, got {}",
            spec.noise_std
        )));
    }
    let (n, d) = (spec.n, spec.d);
    let us = abscissae(n);
    let mut entries = vec![0.0; n * d];
    for (u, row) in us.iter().zip(entries.chunks_exact_mut(d)) {
        basis_values(spec.basis, *u, row);
    }
    let mut rng = RngStream::new(spec.seed);
    let rhs = us
        .iter()
        .map(|&u| target_function(u) + spec.noise_std * rng.normal())
        .collect();
    LeastSquaresProblem::new(DenseMatrix::new(n, d, entries)?, rhs)?.with_reference()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    pub d: usize,
    pub m: usize,
    pub v: f64,
    #[serde(default)]
    pub seed: u64,
}

/// `md × d` block-of-ones matrix: rows `jm .. (j+1)m` equal `e_j`. Each
/// block of `b` is `g + √v γ 1_m` with `g ~ N(0, I_m)`, `γ ~ N(0, 1)`, so
/// its covariance is `I_m + v 1 1ᵀ`. The solution is the vector of block
/// means.
pub fn gen_lower_bound_problem(spec: &LowerBoundSpec) -> Result<LeastSquaresProblem> {
    let (d, m) = (spec.d, spec.m);
    if d == 0 || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 1 and m >= 2, got d = {d}, m = {m}"
        )));
    }
    if !(spec.v >= 0.0 && spec.v.is_finite()) {
        return Err(Error::InvalidParameter(format!("v must be >= 0, got {}", spec.v)));
    }
    let mut entries = vec![0.0; m * d * d];
    for j in 0..d {
        for i in 0..m {
            entries[(j * m + i) * d + j] = 1.0;
        }
    }
    let mut rng = RngStream::new(spec.seed);
    let sv = spec.v.sqrt();
    let mut rhs = Vec::with_capacity(m * d);
    let mut means = Vec::with_capacity(d);
    for _ in 0..d {
        let gamma = rng.normal();
        let block: Vec<f64> = (0..m).map(|_| rng.normal() + sv * gamma).collect();
        means.push(block.iter().sum::<f64>() / m as f64);
        rhs.extend(block);
    }
    let problem = LeastSquaresProblem::new(DenseMatrix::new(m * d, d, entries)?, rhs)?;
    Ok(problem.with_known_solution(means))
}

/// Minimum expected squared error of any estimator that reads `t` entries
/// of `b` on the block-of-ones class:
/// `(d/m²)(m − t/d)[1 + v(m − t/d)/(1 + v t/d)]`.
pub fn lower_bound_mse(d: usize, m: usize, v: f64, t: f64) -> Result<f64> {
    let total = (m * d) as f64;
    if !(t >= 0.0 && t <= total) {
        return Err(Error::InvalidParameter(format!(
            "entry budget {t} outside [0, {total}]"
        )));
    }
    let (df, mf) = (d as f64, m as f64);
    let rest = mf - t / df;
    Ok(df / (mf * mf) * rest * (1.0 + v * rest / (1.0 + v * t / df)))
}

/// Dense Gaussian instance: `A_ij ~ N(0, 1)`, `b = A x + σ ε` with
/// `x ~ N(0, I)`. Inconsistent whenever `σ > 0` and `n > d`.
pub fn gen_gaussian_problem(n: usize, d: usize, noise_std: f64, seed: u64) -> Result<LeastSquaresProblem> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter("need n, d >= 1".into()));
    }
    let mut rng = RngStream::new(seed);
    let entries: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    let a = DenseMatrix::new(n, d, entries)?;
    let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let rhs = a
        .matvec(&x)
        .into_iter()
        .map(|v| v + noise_std * rng.normal())
        .collect();
    LeastSquaresProblem::new(a, rhs)?.with_reference()
}

/// `∫ T_j(u)² dν(u)` for `ν` the uniform probability measure on `[−1, 1]`.
pub fn chebyshev_sq_integral(j: usize) -> f64 {
    let jf = j as f64;
    0.5 * (1.0 - 1.0 / (4.0 * jf * jf - 1.0))
}

/// Rows `a(u) = (T_0(u), …, T_{d−1}(u))` and responses `f(u) + ε` for
/// `u` drawn with density `∝ ‖a(u)‖²` against the uniform measure on
/// `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct ChebyshevRowOracle {
    d: usize,
    noise_std: f64,
    frob_sq: f64,
}

impl ChebyshevRowOracle {
    pub fn new(d: usize, noise_std: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be finite and >= 0, got {noise_std}"
            )));
        }
        Ok(Self {
            d,
            noise_std,
            frob_sq: (0..d).map(chebyshev_sq_integral).sum(),
        })
    }

    /// Draws only the abscissa `u`.
    pub fn sample_abscissa(&self, rng: &mut RngStream) -> f64 {
        let provider = |r: &mut RngStream| {
            let u = 2.0 * r.uniform() - 1.0;
            (u, chebyshev_sq_norm(self.d, u))
        };
        rejection_sample(self.norm_bound(), &provider, rng)
            .expect("|T_j| <= 1 keeps every row within the bound d")
    }
}

/// `Σ_{j<d} T_j(u)²`.
pub fn chebyshev_sq_norm(d: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    let mut s = 1.0;
    for _ in 1..d {
        s += cur * cur;
        let next = 2.0 * u * cur - prev;
        prev = cur;
        cur = next;
    }
    s
}

impl RowOracle for ChebyshevRowOracle {
    fn dim(&self) -> usize {
        self.d
    }

    fn draw<'a>(&'a self, rng: &mut RngStream, scratch: &'a mut [f64]) -> SampledRow<'a> {
        let u = self.sample_abscissa(rng);
        basis_values(Basis::Chebyshev, u, scratch);
        let sq_norm = scratch.iter().map(|v| v * v).sum();
        let response = target_function(u) + self.noise_std * rng.normal();
        SampledRow {
            features: scratch,
            response,
            sq_norm,
            index: None,
        }
    }

    fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    fn norm_bound(&self) -> f64 {
        self.d as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_eval_examples() {
        assert_eq!(eval_poly(&[1.0], Basis::Chebyshev, 0.3), 1.0);
        assert_eq!(eval_poly(&[1.0, 0.0, 0.0], Basis::Monomial, -0.7), 1.0);
        assert_eq!(eval_poly(&[0.0, 1.0], Basis::Chebyshev, 0.3), 0.3);
        assert_eq!(eval_poly(&[0.0, 0.0, 1.0], Basis::Chebyshev, 0.5), -0.5);
        assert!((eval_poly(&[1.0, 2.0, 3.0], Basis::Monomial, 2.0) - 17.0).abs() < 1e-15);
    }

    #[test]
    fn clenshaw_matches_basis_sum() {
        let c: Vec<f64> = (0..25).map(|j| ((j * 7 % 11) as f64 - 5.0) / (j + 1) as f64).collect();
        let mut phi = vec![0.0; 25];
        for k in 0..=40 {
            let u = -1.0 + k as f64 / 20.0;
            basis_values(Basis::Chebyshev, u, &mut phi);
            let direct: f64 = c.iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((eval_poly(&c, Basis::Chebyshev, u) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_matches_trig_form() {
        let mut phi = vec![0.0; 25];
        for k in 0..=200 {
            let u = -1.0 + k as f64 / 100.0;
            basis_values(Basis::Chebyshev, u, &mut phi);
            for (j, &v) in phi.iter().enumerate() {
                assert!((v - (j as f64 * u.acos()).cos()).abs() < 1e-12, "j={j} u={u}");
            }
            let s: f64 = phi.iter().map(|v| v * v).sum();
            assert!((chebyshev_sq_norm(25, u) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn abscissae_endpoints() {
        let u = abscissae(5);
        assert_eq!(u, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(abscissae(2), vec![-1.0, 1.0]);
    }

    #[test]
    fn noiseless_constant_fit_is_mean() {
        let spec = PolyRegressionSpec {
            n: 101,
            d: 1,
            basis: Basis::Chebyshev,
            noise_std: 0.0,
            seed: 0,
        };
        let p = gen_poly_regression(&spec).unwrap();
        let us = abscissae(101);
        let mean = us.iter().map(|&u| target_function(u)).sum::<f64>() / 101.0;
        assert!((p.reference_solution.unwrap()[0] - mean).abs() < 1e-14);
        assert!(gen_poly_regression(&PolyRegressionSpec::new(3, 5, Basis::Monomial, 0)).is_err());
    }

    #[test]
    fn lower_bound_block_means() {
        let p = gen_lower_bound_problem(&LowerBoundSpec { d: 1, m: 2, v: 3.0, seed: 9 }).unwrap();
        let x = p.reference_solution.as_ref().unwrap();
        assert_eq!(x[0], (p.rhs[0] + p.rhs[1]) / 2.0);
        let p = gen_lower_bound_problem(&LowerBoundSpec { d: 3, m: 4, v: 2.0, seed: 1 }).unwrap();
        assert!(p.normal_equations_defect(p.reference_solution.as_ref().unwrap()) < 1e-12);
    }

    #[test]
    fn lower_bound_formula() {
        assert_eq!(lower_bound_mse(3, 10, 5.0, 30.0).unwrap(), 0.0);
        let v0 = lower_bound_mse(3, 10, 0.0, 6.0).unwrap();
        assert!((v0 - 3.0 / 100.0 * 8.0).abs() < 1e-15);
        let big = lower_bound_mse(1, 2, 1e12, 1.0).unwrap();
        assert!((big - 0.5).abs() < 1e-9);
        assert!(lower_bound_mse(3, 10, 5.0, 31.0).is_err());
        let mut prev = f64::INFINITY;
        for t in 0..=30 {
            let v = lower_bound_mse(3, 10, 5.0, t as f64).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn chebyshev_oracle_basics() {
        let o = ChebyshevRowOracle::new(1, 0.0).unwrap();
        assert_eq!(o.frob_sq(), 1.0);
        let o = ChebyshevRowOracle::new(25, 0.2).unwrap();
        assert_eq!(o.norm_bound(), 25.0);
        assert!((chebyshev_sq_norm(25, 1.0) - 25.0).abs() < 1e-12);
        assert!((chebyshev_sq_norm(25, -1.0) - 25.0).abs() < 1e-12);
        // ∫ T_0² + T_1² dν = 1 + 1/3
        let two = ChebyshevRowOracle::new(2, 0.0).unwrap();
        assert!((two.frob_sq() - 4.0 / 3.0).abs() < 1e-15);
        let mut rng = RngStream::new(3);
        let mut scratch = vec![0.0; 25];
        for _ in 0..100 {
            let row = o.draw(&mut rng, &mut scratch);
            let s: f64 = row.features.iter().map(|v| v * v).sum();
            assert!((row.sq_norm - s).abs() <= 1e-12 * s);
            assert!(row.sq_norm <= 25.0 + 1e-9);
        }
    }
}
