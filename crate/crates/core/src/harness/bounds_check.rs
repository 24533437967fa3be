use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kaczmarz::{
    bound_theorem1, bound_theorem2, bound_theorem3, run_rk, run_tark, CheckpointRecorder,
};
use crate::linalg::{dist_sq, lstsq_reference, norm_sq, ridge_solution, spectral_summary, LeastSquaresProblem};
use crate::ridge::{bound_theorem4, bound_theorem5, mu_to_lambda, run_rkrr, run_tark_rr};
use crate::rows::FiniteRows;
use crate::sampling::{derive_seed, RngStream};

use super::checkpoint_grid;

/// Which mean-square-error bound to check, and implicitly which method:
/// RK for 1, TARK for 2 and 3, RK-RR for 4, TARK-RR for 5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Theorem1,
    Theorem2,
    Theorem3,
    Theorem4,
    Theorem5,
}

impl BoundKind {
    pub fn is_ridge(self) -> bool {
        matches!(self, BoundKind::Theorem4 | BoundKind::Theorem5)
    }

    pub fn is_averaged(self) -> bool {
        matches!(
            self,
            BoundKind::Theorem2 | BoundKind::Theorem3 | BoundKind::Theorem5
        )
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("theorem").trim_start_matches("thm") {
            "1" => Ok(BoundKind::Theorem1),
            "2" => Ok(BoundKind::Theorem2),
            "3" => Ok(BoundKind::Theorem3),
            "4" => Ok(BoundKind::Theorem4),
            "5" => Ok(BoundKind::Theorem5),
            _ => Err(Error::Config(format!("unknown bound `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundSetup {
    pub kind: BoundKind,
    /// Burn-in for the averaged methods.
    pub t_b: u64,
    /// Largest final time; checkpoints go up to `t − 1` rows.
    pub t: u64,
    /// Required for the ridge bounds.
    pub mu: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub points_per_decade: u32,
}

impl BoundSetup {
    pub fn new(kind: BoundKind, t_b: u64, t: u64, trials: usize, seed: u64) -> Self {
        Self {
            kind,
            t_b,
            t,
            mu: None,
            trials,
            seed,
            points_per_decade: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub rows_accessed: u64,
    /// Time index the bound is evaluated at.
    pub time: u64,
    pub empirical_mse: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub trials: usize,
    pub kappa_dem: f64,
    /// Absolute slack for rounding error, `(64 ε)² (‖target‖² + 1)`.
    pub roundoff_floor: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Monte-Carlo check of `E‖x − target‖² ≤ bound + 3 SE` at log-spaced
/// checkpoints, starting from `x₀ = 0`.
pub fn verify_bounds(problem: &LeastSquaresProblem, setup: &BoundSetup) -> Result<BoundReport> {
    if setup.trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    if setup.t < 2 || (setup.kind.is_averaged() && setup.t_b + 1 >= setup.t) {
        return Err(Error::InvalidParameter(format!(
            "need t_b + 1 < t, got t_b = {}, t = {}",
            setup.t_b, setup.t
        )));
    }
    let spectral = spectral_summary(&problem.matrix)?;
    let kappa = spectral.kappa_dem();
    let pinv_sq = spectral.pinv_norm_sq();
    let (target, mu, lambda) = if setup.kind.is_ridge() {
        let mu = setup
            .mu
            .ok_or_else(|| Error::InvalidParameter("ridge bounds need mu".into()))?;
        let lambda = mu_to_lambda(mu, problem.matrix.frob_sq())?;
        (ridge_solution(problem, lambda)?, mu, lambda)
    } else {
        let x = match &problem.reference_solution {
            Some(x) => x.clone(),
            None => lstsq_reference(problem)?,
        };
        (x, 1.0, 0.0)
    };
    let residual_sq = problem.residual_sq(&target);
    let init = norm_sq(&target);
    let d = problem.n_cols();

    let grid: Vec<u64> = checkpoint_grid(setup.t - 1, setup.points_per_decade)
        .into_iter()
        .filter(|&k| !setup.kind.is_averaged() || k + 1 > setup.t_b)
        .collect();
    let rows = FiniteRows::new(problem)?;

    let per_trial: Vec<Result<Vec<f64>>> = (0..setup.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RngStream::new(derive_seed(setup.seed, &[trial as u64]));
            let mut rec = CheckpointRecorder::new(grid.clone());
            let x0 = vec![0.0; d];
            match setup.kind {
                BoundKind::Theorem1 => run_rk(&rows, &x0, setup.t, &mut rng, &mut rec)?,
                BoundKind::Theorem2 | BoundKind::Theorem3 => {
                    run_tark(&rows, &x0, setup.t_b, setup.t, &mut rng, &mut rec)?
                }
                BoundKind::Theorem4 => run_rkrr(&rows, mu, &x0, setup.t, &mut rng, &mut rec)?,
                BoundKind::Theorem5 => {
                    run_tark_rr(&rows, mu, &x0, setup.t_b, setup.t, &mut rng, &mut rec)?
                }
            };
            Ok(rec
                .snapshots()
                .iter()
                .map(|(_, x)| dist_sq(x, &target))
                .collect())
        })
        .collect();
    let per_trial: Vec<Vec<f64>> = per_trial.into_iter().collect::<Result<_>>()?;

    let n = setup.trials as f64;
    let roundoff_floor = (64.0 * f64::EPSILON).powi(2) * (init + 1.0);
    let checks = grid
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let vals: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let (time, bound) = match setup.kind {
                BoundKind::Theorem1 => (k, bound_theorem1(kappa, init, pinv_sq, residual_sq, k)),
                BoundKind::Theorem2 => (
                    k + 1,
                    bound_theorem2(kappa, init, pinv_sq, residual_sq, setup.t_b, k + 1),
                ),
                BoundKind::Theorem3 => (
                    k + 1,
                    bound_theorem3(kappa, init, pinv_sq, residual_sq, setup.t_b, k + 1),
                ),
                BoundKind::Theorem4 => (k, bound_theorem4(kappa, mu, lambda, init, residual_sq, k)),
                BoundKind::Theorem5 => (
                    k + 1,
                    bound_theorem5(kappa, mu, lambda, init, residual_sq, setup.t_b, k + 1),
                ),
            };
            BoundCheck {
                rows_accessed: k,
                time,
                empirical_mse: mean,
                std_error: se,
                bound,
                pass: mean <= bound + 3.0 * se + roundoff_floor,
            }
        })
        .collect();
    Ok(BoundReport {
        kind: setup.kind,
        trials: setup.trials,
        kappa_dem: kappa,
        roundoff_floor,
        checks,
    })
}
