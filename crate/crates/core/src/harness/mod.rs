//! Seeded multi-trial experiments.
//!
//! Each `(method, trial)` pair owns the random stream
//! `derive_seed(master_seed, [method_index, trial])`. Trials may run on any
//! number of threads; results are always emitted in `(method, trial)`
//! order, so identical configs give identical CSV bytes.

mod bounds_check;
mod config;
mod output;

pub use bounds_check::{verify_bounds, BoundCheck, BoundKind, BoundReport, BoundSetup};
pub use config::{ExperimentConfig, MethodKind, MethodSpec, ProblemSpec};
pub use output::{
    aggregate, coefficients_sidecar, median, quantile, read_csv, summarize, write_aggregate_csv,
    write_csv, AggregateRow, Metric, MethodSummary, CSV_HEADER,
};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kaczmarz::{
    run_rk, run_rka, run_rku, run_tark, run_tark_doubling, CheckpointRecorder, TraceSink,
};
use crate::linalg::{norm, relative_error, ridge_solution, LeastSquaresProblem};
use crate::ridge::{augmented_problem, mu_to_lambda, run_dual_rk, run_rkrr, run_tark_rr};
use crate::rows::FiniteRows;
use crate::sampling::{derive_seed, RngStream};

/// One checkpoint of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub method: String,
    pub trial: usize,
    pub rows_accessed: u64,
    pub rel_err_lstsq: f64,
    pub rel_err_ridge: Option<f64>,
    pub residual_norm: f64,
    pub wall_ns: u64,
}

/// Final estimate of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalEstimate {
    pub method: String,
    pub trial: usize,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TraceRecord>,
    pub finals: Vec<FinalEstimate>,
    pub summary: Vec<MethodSummary>,
    /// Least-squares solution of the problem.
    pub reference: Vec<f64>,
    /// Ridge solution for `ridge_mu`, when set.
    pub ridge_reference: Option<Vec<f64>>,
}

/// Log-spaced integers `round(10^{k/ppd})` in `1..=t_max`, deduplicated,
/// always containing `1` and `t_max`.
pub fn checkpoint_grid(t_max: u64, points_per_decade: u32) -> Vec<u64> {
    assert!(t_max >= 1 && points_per_decade >= 1);
    let mut grid = vec![1u64];
    let top = (t_max as f64).log10() * points_per_decade as f64;
    let mut k = 1u32;
    while (k as f64) <= top + 1e-9 {
        let v = 10f64.powf(k as f64 / points_per_decade as f64).round() as u64;
        if v <= t_max && grid.last() != Some(&v) {
            grid.push(v);
        }
        k += 1;
    }
    if grid.last() != Some(&t_max) {
        grid.push(t_max);
    }
    grid
}

struct Prepared<'a> {
    problem: &'a LeastSquaresProblem,
    reference: &'a [f64],
    ridge_reference: Option<&'a [f64]>,
    augmented: Vec<Option<LeastSquaresProblem>>,
    lambdas: Vec<Option<f64>>,
}

/// Snapshots of the run with wall-clock offsets.
struct TimedRecorder {
    inner: CheckpointRecorder,
    start: Option<Instant>,
    times: Vec<u64>,
}

impl TraceSink for TimedRecorder {
    fn next_checkpoint(&self) -> Option<u64> {
        self.inner.next_checkpoint()
    }

    fn record(&mut self, rows: u64, estimate: &[f64]) {
        let before = self.inner.snapshots().len();
        self.inner.record(rows, estimate);
        if self.inner.snapshots().len() > before {
            self.times
                .push(self.start.map_or(0, |s| s.elapsed().as_nanos() as u64));
        }
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    prep: &Prepared<'_>,
    method_index: usize,
    trial: usize,
    grid: &[u64],
) -> Result<(Vec<TraceRecord>, FinalEstimate)> {
    let spec = &cfg.methods[method_index];
    let problem = prep.problem;
    let d = problem.n_cols();
    let x0 = vec![0.0; d];
    let budget = cfg.budget;
    let t = budget + 1;
    let t_b = spec.t_b.unwrap_or(t / 4);
    let mut rng = RngStream::new(derive_seed(
        cfg.master_seed,
        &[method_index as u64, trial as u64],
    ));
    let mut sink = TimedRecorder {
        inner: CheckpointRecorder::new(grid.to_vec()),
        start: cfg.record_wall_time.then(Instant::now),
        times: Vec::new(),
    };
    let x = match spec.method {
        MethodKind::Rk => run_rk(&FiniteRows::new(problem)?, &x0, t, &mut rng, &mut sink)?,
        MethodKind::Tark => run_tark(&FiniteRows::new(problem)?, &x0, t_b, t, &mut rng, &mut sink)?,
        MethodKind::TarkDoubling => {
            run_tark_doubling(&FiniteRows::new(problem)?, &x0, t, &mut rng, &mut sink)?
        }
        MethodKind::Rku => {
            let omega = spec.omega.unwrap_or(1.0 / (budget as f64).sqrt());
            run_rku(&FiniteRows::new(problem)?, &x0, t, omega, &mut rng, &mut sink)?
        }
        MethodKind::Rka => {
            let q = spec.q.unwrap_or(1);
            run_rka(&FiniteRows::new(problem)?, &x0, budget / q, q, &mut rng, &mut sink)?
        }
        MethodKind::Rkrr | MethodKind::TarkRr => {
            let mu = cfg.mu_for(spec).expect("validated");
            let rows = FiniteRows::new(problem)?;
            if spec.method == MethodKind::Rkrr {
                run_rkrr(&rows, mu, &x0, t, &mut rng, &mut sink)?
            } else {
                run_tark_rr(&rows, mu, &x0, t_b, t, &mut rng, &mut sink)?
            }
        }
        MethodKind::AugmentedRk | MethodKind::AugmentedTark => {
            let aug = prep.augmented[method_index].as_ref().expect("prepared");
            let rows = FiniteRows::new(aug)?;
            if spec.method == MethodKind::AugmentedRk {
                run_rk(&rows, &x0, t, &mut rng, &mut sink)?
            } else {
                run_tark(&rows, &x0, t_b, t, &mut rng, &mut sink)?
            }
        }
        MethodKind::DualRk => {
            let lambda = prep.lambdas[method_index].expect("prepared");
            run_dual_rk(problem, lambda, t, &mut rng, &mut sink)?
        }
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let label = spec.label().to_string();
    let records = sink
        .inner
        .snapshots()
        .iter()
        .zip(&sink.times)
        .map(|((rows, est), &wall_ns)| TraceRecord {
            method: label.clone(),
            trial,
            rows_accessed: *rows,
            rel_err_lstsq: relative_error(est, prep.reference),
            rel_err_ridge: prep.ridge_reference.map(|r| relative_error(est, r)),
            residual_norm: norm(&problem.residual(est)),
            wall_ns,
        })
        .collect();
    Ok((
        records,
        FinalEstimate {
            method: label,
            trial,
            x,
        },
    ))
}

/// Runs every `(method, trial)` pair of `cfg` on `problem`, which must
/// carry its least-squares solution.
pub fn run_experiment_on(cfg: &ExperimentConfig, problem: &LeastSquaresProblem) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let reference = problem
        .reference_solution
        .clone()
        .ok_or_else(|| Error::Config("problem has no reference solution".into()))?;
    let frob_sq = problem.matrix.frob_sq();
    let ridge_reference = match cfg.ridge_mu {
        Some(mu) => Some(ridge_solution(problem, mu_to_lambda(mu, frob_sq)?)?),
        None => None,
    };
    let mut augmented = Vec::with_capacity(cfg.methods.len());
    let mut lambdas = Vec::with_capacity(cfg.methods.len());
    for spec in &cfg.methods {
        let lambda = match cfg.mu_for(spec) {
            Some(mu) if spec.method.is_ridge() => Some(mu_to_lambda(mu, frob_sq)?),
            _ => None,
        };
        augmented.push(match (spec.method, lambda) {
            (MethodKind::AugmentedRk | MethodKind::AugmentedTark, Some(l)) => {
                Some(augmented_problem(problem, l)?)
            }
            _ => None,
        });
        lambdas.push(lambda);
    }
    let prep = Prepared {
        problem,
        reference: &reference,
        ridge_reference: ridge_reference.as_deref(),
        augmented,
        lambdas,
    };

    let grid = checkpoint_grid(cfg.budget, cfg.points_per_decade);
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..cfg.trials).map(move |k| (m, k)))
        .collect();
    let results: Vec<Result<(Vec<TraceRecord>, FinalEstimate)>> = jobs
        .par_iter()
        .map(|&(m, k)| run_one(cfg, &prep, m, k, &grid))
        .collect();

    let mut records = Vec::new();
    let mut finals = Vec::with_capacity(jobs.len());
    for r in results {
        let (recs, fin) = r?;
        records.extend(recs);
        finals.push(fin);
    }
    let summary = summarize(&records, &cfg.methods);
    Ok(ExperimentOutput {
        records,
        finals,
        summary,
        reference,
        ridge_reference,
    })
}

/// Resolves the problem and runs the experiment. `threads` caps the
/// worker pool; `None` uses the global pool.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base: Option<&Path>,
    threads: Option<usize>,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let problem = cfg.problem.resolve(base)?;
    match threads {
        None => run_experiment_on(cfg, &problem),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_experiment_on(cfg, &problem)),
    }
}

/// Desk-scale version of the four-method comparison on Chebyshev
/// regression: RK, TARK (`t_b = 10³`), RKU (`ω = 1/√t`), RKA (`q = 10`).
pub fn figure1_config(n: usize, budget: u64, trials: usize, seed: u64) -> ExperimentConfig {
    let problem = ProblemSpec::PolyRegression {
        n,
        d: 25,
        basis: crate::problems::Basis::Chebyshev,
        noise_std: 0.2,
        seed,
    };
    let methods = vec![
        MethodSpec::new(MethodKind::Rk),
        MethodSpec::new(MethodKind::Tark).with_burn_in(1000.min(budget / 2)),
        MethodSpec::new(MethodKind::Rku),
        MethodSpec::new(MethodKind::Rka).with_q(10),
    ];
    let mut cfg = ExperimentConfig::new(problem, methods, budget);
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg
}

/// Ridge comparison on monomial regression with `μ = 0.999`: TARK,
/// TARK-RR, TARK on the augmented system, and dual RK.
pub fn figure2_config(n: usize, budget: u64, trials: usize, seed: u64) -> ExperimentConfig {
    let problem = ProblemSpec::PolyRegression {
        n,
        d: 25,
        basis: crate::problems::Basis::Monomial,
        noise_std: 0.2,
        seed,
    };
    let t_b = budget / 4;
    let methods = vec![
        MethodSpec::new(MethodKind::Tark).with_burn_in(t_b),
        MethodSpec::new(MethodKind::TarkRr).with_burn_in(t_b),
        MethodSpec::new(MethodKind::AugmentedTark).with_burn_in(t_b),
        MethodSpec::new(MethodKind::DualRk),
    ];
    let mut cfg = ExperimentConfig::new(problem, methods, budget);
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg.ridge_mu = Some(0.999);
    cfg
}
