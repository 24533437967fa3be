//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use tark::active::{bound_theorem6, thin_qr, volume_sample, PreconditionedTark};
use tark::harness::{
    aggregate, figure1_config, figure2_config, run_experiment, verify_bounds, AggregateRow,
    BoundKind, BoundSetup, ExperimentOutput, Metric,
};
use tark::kaczmarz::{
    bound_theorem2, doubling_burn_in, run_tark, run_tark_doubling, EveryStep, NoTrace,
};
use tark::linalg::{dist_sq, lstsq_reference, relative_error, ridge_solution, spectral_summary};
use tark::problems::{
    gen_gaussian_problem, gen_lower_bound_problem, gen_poly_regression, lower_bound_mse, Basis,
    LowerBoundSpec, PolyRegressionSpec,
};
use tark::ridge::{augmented_problem, mu_to_lambda, run_rkrr};
use tark::rows::FiniteRows;
use tark::{DenseMatrix, LeastSquaresProblem, RngStream};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn one_row(row: &[f64], b: f64) -> LeastSquaresProblem {
    LeastSquaresProblem::new(DenseMatrix::from_rows(&[row]).unwrap(), vec![b])
        .unwrap()
        .with_reference()
        .unwrap()
}

fn conditioning() -> Outcome {
    let cheb = gen_poly_regression(&PolyRegressionSpec::new(100_000, 25, Basis::Chebyshev, 0))
        .map_err(|e| e.to_string())?;
    let mono = gen_poly_regression(&PolyRegressionSpec::new(100_000, 25, Basis::Monomial, 0))
        .map_err(|e| e.to_string())?;
    let kc = spectral_summary(&cheb.matrix).map_err(|e| e.to_string())?.condition_number();
    let km = spectral_summary(&mono.matrix).map_err(|e| e.to_string())?.condition_number();
    ensure(
        kc < 6.0 && km >= 1e7,
        format!("chebyshev cond = {kc:.4} (< 6), monomial cond = {km:.3e} (>= 1e7)"),
    )
}

/// Median at the checkpoint closest to `rows`.
fn median_at(agg: &[AggregateRow], method: &str, rows: u64) -> f64 {
    agg.iter()
        .filter(|r| r.method == method)
        .min_by_key(|r| r.rows_accessed.abs_diff(rows))
        .map(|r| r.median)
        .unwrap_or(f64::NAN)
}

fn final_median(agg: &[AggregateRow], method: &str) -> f64 {
    median_at(agg, method, u64::MAX)
}

fn run(cfg: &tark::harness::ExperimentConfig) -> Result<ExperimentOutput, String> {
    run_experiment(cfg, None, None).map_err(|e| e.to_string())
}

fn figure1() -> Outcome {
    let budget = 100_000;
    let out = run(&figure1_config(100_000, budget, 10, 1))?;
    let agg = aggregate(&out.records, Metric::Lstsq);
    let rk_decade = median_at(&agg, "rk", budget / 10);
    let rk = final_median(&agg, "rk");
    let tark = final_median(&agg, "tark");
    let rku = final_median(&agg, "rku");
    let rka = final_median(&agg, "rka");
    let a = rk_decade / rk < 2.0;
    let b = tark <= 0.2 * rk;
    let c = rku < rk && tark <= rku;
    let d = rka < rk;
    ensure(
        a && b && c && d,
        format!(
            "(a) rk last-decade gain {:.3}x [{}] (b) tark {tark:.4} vs 0.2*rk {:.4} [{}] \
             (c) rku {rku:.4} < rk {rk:.4}, tark <= rku [{}] (d) rka {rka:.4} < rk [{}]",
            rk_decade / rk,
            a,
            0.2 * rk,
            b,
            c,
            d
        ),
    )
}

fn exact_variance() -> Outcome {
    let p = LeastSquaresProblem::new(DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap(), vec![0.0, 2.0])
        .unwrap();
    let rows = FiniteRows::new(&p).unwrap();
    let s = spectral_summary(&p.matrix).unwrap();
    let residual = p.residual_sq(&[1.0]);
    let mut details = Vec::new();
    let mut ok = true;
    for (i, t) in [11u64, 101, 1001].into_iter().enumerate() {
        let mut rng = RngStream::derive(7, &[i as u64]);
        let errs: Vec<f64> = (0..10_000)
            .map(|_| {
                let x = run_tark(&rows, &[0.0], 1, t, &mut rng, &mut NoTrace).unwrap();
                (x[0] - 1.0).powi(2)
            })
            .collect();
        let (mse, se) = mean_se(&errs);
        let exact = 1.0 / (t - 1) as f64;
        let bound = bound_theorem2(s.kappa_dem(), 1.0, s.pinv_norm_sq(), residual, 1, t);
        let within = (mse - exact).abs() <= 3.0 * se;
        let tight = (bound - exact).abs() <= 4.0 * f64::EPSILON * exact;
        ok &= within && tight;
        details.push(format!("t={t}: mse {mse:.6} vs {exact:.6} (3se {:.1e}), bound {bound:.6}", 3.0 * se));
    }
    ensure(ok, details.join("; "))
}

fn dominance() -> Outcome {
    let mut problems: Vec<(String, LeastSquaresProblem)> = Vec::new();
    for (k, (n, d)) in [(200, 10), (120, 5), (50, 8), (80, 3), (30, 2)].into_iter().enumerate() {
        problems.push((
            format!("gaussian{n}x{d}"),
            gen_gaussian_problem(n, d, 1.0, 100 + k as u64).map_err(|e| e.to_string())?,
        ));
    }
    problems.push(("row[1,2,-2]".into(), one_row(&[1.0, 2.0, -2.0], 3.0)));
    problems.push(("row[0.5,4]".into(), one_row(&[0.5, 4.0], -1.0)));
    let kinds = [
        BoundKind::Theorem1,
        BoundKind::Theorem2,
        BoundKind::Theorem3,
        BoundKind::Theorem4,
        BoundKind::Theorem5,
    ];
    let mut checks = 0;
    let mut failures = Vec::new();
    for (pi, (name, p)) in problems.iter().enumerate() {
        for (ki, &kind) in kinds.iter().enumerate() {
            let mus: &[f64] = if kind.is_ridge() { &[0.9, 0.99] } else { &[1.0] };
            for &mu in mus {
                let mut setup = BoundSetup::new(kind, 50, 1001, 1000, (pi * 10 + ki) as u64);
                if kind.is_ridge() {
                    setup.mu = Some(mu);
                }
                let report = verify_bounds(p, &setup).map_err(|e| e.to_string())?;
                checks += report.checks.len();
                for c in report.checks.iter().filter(|c| !c.pass) {
                    failures.push(format!(
                        "{name} {kind:?} mu={mu} k={}: mse {:.3e} > bound {:.3e} + 3se {:.1e}",
                        c.rows_accessed,
                        c.empirical_mse,
                        c.bound,
                        3.0 * c.std_error
                    ));
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{checks} checkpoints across {} problems, 1000 trials each", problems.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn ridge_fixed_point() -> Outcome {
    let mut rng = RngStream::new(31);
    let mut worst_iter: f64 = 0.0;
    for _ in 0..20 {
        let d = 1 + rng.below(5);
        let row: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let b = rng.normal();
        let p = one_row(&row, b);
        let rows = FiniteRows::new(&p).unwrap();
        let sq: f64 = row.iter().map(|v| v * v).sum();
        for mu in [0.3, 0.9, 0.999] {
            let closed: Vec<f64> = row.iter().map(|a| mu * b * a / sq).collect();
            let lambda = mu_to_lambda(mu, sq).unwrap();
            let x_mu = ridge_solution(&p, lambda).unwrap();
            worst_iter = worst_iter.max(relative_error(&x_mu, &closed));
            let mut sink = EveryStep(|s: u64, x: &[f64]| {
                if s >= 1 {
                    worst_iter = worst_iter.max(relative_error(x, &closed));
                }
            });
            run_rkrr(&rows, mu, &vec![0.0; d], 50, &mut rng, &mut sink).unwrap();
        }
    }
    let mut worst_aug: f64 = 0.0;
    for k in 0..20u64 {
        let n = 5 + (k as usize * 7) % 40;
        let d = 1 + (k as usize) % 8;
        let p = gen_gaussian_problem(n.max(d), d, 1.0, 500 + k).unwrap();
        let lambda = 0.1 + k as f64;
        let aug = augmented_problem(&p, lambda).unwrap();
        let via_aug = lstsq_reference(&aug).unwrap();
        worst_aug = worst_aug.max(relative_error(&via_aug, &ridge_solution(&p, lambda).unwrap()));
    }
    ensure(
        worst_iter <= 1e-12 && worst_aug <= 1e-10,
        format!("max iterate deviation {worst_iter:.2e} (<= 1e-12), augmented mismatch {worst_aug:.2e} (<= 1e-10)"),
    )
}

fn doubling_equality() -> Outcome {
    let p = gen_gaussian_problem(50, 6, 0.5, 3).unwrap();
    let rows = FiniteRows::new(&p).unwrap();
    let x0 = [0.25; 6];
    let mut bad = Vec::new();
    for t in [2u64, 3, 5, 8, 13, 100, 1000] {
        let a = run_tark_doubling(&rows, &x0, t, &mut RngStream::new(t), &mut NoTrace).unwrap();
        let b = run_tark(&rows, &x0, doubling_burn_in(t), t, &mut RngStream::new(t), &mut NoTrace)
            .unwrap();
        if a.iter().zip(&b).any(|(u, v)| u.to_bits() != v.to_bits()) {
            bad.push(t);
        }
    }
    ensure(bad.is_empty(), format!("bitwise mismatches at t = {bad:?}"))
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..m.len())
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for last in r - 1..n {
        for mut s in subsets(last, r - 1) {
            s.push(last);
            out.push(s);
        }
    }
    out
}

fn volume_sampling() -> Outcome {
    let mut rng = RngStream::new(77);
    let shapes = [(3, 2), (4, 2), (5, 3), (6, 2), (6, 3), (7, 1), (8, 3), (8, 2), (5, 1), (7, 3)];
    let mut min_p: f64 = 1.0;
    for &(n, r) in &shapes {
        let a = DenseMatrix::new(n, r, (0..n * r).map(|_| rng.normal()).collect()).unwrap();
        let q = thin_qr(&a).unwrap().q;
        let all = subsets(n, r);
        let probs: Vec<f64> = all
            .iter()
            .map(|s| det(&s.iter().map(|&i| q.row(i).to_vec()).collect::<Vec<_>>()).powi(2))
            .collect();
        let draws = 100_000;
        let mut counts = vec![0usize; all.len()];
        for _ in 0..draws {
            let s = volume_sample(&q, &mut rng).map_err(|e| e.to_string())?.sorted();
            counts[all.iter().position(|x| *x == s).unwrap()] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&c, &p)| (c as f64 - p * draws as f64).powi(2) / (p * draws as f64))
            .sum();
        let p = 1.0 - ChiSquared::new((all.len() - 1) as f64).unwrap().cdf(stat);
        min_p = min_p.min(p);
    }

    let problem = gen_gaussian_problem(200, 10, 1.0, 8).unwrap();
    let solver = PreconditionedTark::new(&problem).unwrap();
    let opt = problem.reference_residual_sq.unwrap();
    let mut mc = Vec::new();
    let mut mc_ok = true;
    for t in [20u64, 100, 434] {
        let t_b = t / 2;
        let ratios: Vec<f64> = (0..400)
            .map(|_| {
                let est = solver.run(t_b, t, &mut rng, &mut NoTrace).unwrap();
                problem.residual_sq(&est.x) / opt
            })
            .collect();
        let (mean, se) = mean_se(&ratios);
        let bound = bound_theorem6(10, t_b, t);
        mc_ok &= mean <= bound + 3.0 * se;
        mc.push(format!("t={t}: {mean:.4} <= {bound:.4} + {:.1e}", 3.0 * se));
    }
    ensure(
        min_p > 1e-6 && mc_ok,
        format!("min chi2 p = {min_p:.3e} over {} cases; residual factor {}", shapes.len(), mc.join(", ")),
    )
}

fn lower_bound_floor() -> Outcome {
    let (d, m, v) = (3, 10, 5.0);
    let exact_zero = lower_bound_mse(d, m, v, (m * d) as f64).unwrap() == 0.0;
    let mut ok = exact_zero;
    let mut details = vec![format!("lower_bound(md) = 0: {exact_zero}")];
    for t in [3u64, 9, 15] {
        let final_time = t + 1;
        let errs: Vec<f64> = (0..20_000u64)
            .map(|trial| {
                let p = gen_lower_bound_problem(&LowerBoundSpec { d, m, v, seed: trial * 31 + t })
                    .unwrap();
                let rows = FiniteRows::new(&p).unwrap();
                let mut rng = RngStream::derive(t, &[trial]);
                let x = run_tark(&rows, &vec![0.0; d], final_time / 4, final_time, &mut rng, &mut NoTrace)
                    .unwrap();
                dist_sq(&x, p.reference_solution.as_ref().unwrap())
            })
            .collect();
        let (mse, se) = mean_se(&errs);
        let lb = lower_bound_mse(d, m, v, t as f64).unwrap();
        ok &= mse >= lb - 3.0 * se;
        details.push(format!("t={t}: mse {mse:.4} >= floor {lb:.4} - {:.1e}", 3.0 * se));
    }
    ensure(ok, details.join("; "))
}

fn figure2() -> Outcome {
    let out = run(&figure2_config(100_000, 100_000, 10, 2))?;
    let ridge = aggregate(&out.records, Metric::Ridge);
    let lstsq = aggregate(&out.records, Metric::Lstsq);
    let rr_start = median_at(&ridge, "tark_rr", 1);
    let rr_end = final_median(&ridge, "tark_rr");
    let tark_start = median_at(&lstsq, "tark", 1);
    let tark_end = final_median(&lstsq, "tark");
    let dual = final_median(&ridge, "dual_rk");
    let aug = final_median(&ridge, "augmented_tark");
    let a = rr_start / rr_end >= 10.0;
    let b = tark_start / tark_end < 2.0;
    let c = rr_end <= dual && rr_end <= aug;
    ensure(
        a && b && c,
        format!(
            "tark_rr ridge error {rr_start:.3} -> {rr_end:.4} ({:.1}x) [{a}]; tark lstsq error \
             {tark_start:.3} -> {tark_end:.3} ({:.2}x) [{b}]; dual_rk {dual:.4}, augmented_tark {aug:.4} [{c}]",
            rr_start / rr_end,
            tark_start / tark_end
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("conditioning", conditioning),
        ("fig1_phenomenology", figure1),
        ("exact_variance", exact_variance),
        ("bound_dominance", dominance),
        ("ridge_fixed_point", ridge_fixed_point),
        ("doubling_equality", doubling_equality),
        ("volume_sampling", volume_sampling),
        ("lower_bound_floor", lower_bound_floor),
        ("fig2_phenomenology", figure2),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
