use statrs::distribution::{ChiSquared, ContinuousCDF};

use tark::active::{
    bound_theorem6, budget_schedule, entry_budget, lu_solve, thin_qr, volume_sample,
    PreconditionedTark,
};
use tark::linalg::{demmel_condition, dot, lstsq_reference, relative_error};
use tark::problems::gen_gaussian_problem;
use tark::{DenseMatrix, LeastSquaresProblem, RngStream};

fn random_matrix(n: usize, d: usize, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::new(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap()
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

#[test]
fn thin_qr_reconstructs_input() {
    let mut rng = RngStream::new(3);
    let a = random_matrix(20, 5, &mut rng);
    let mut deficient = a.entries().to_vec();
    for i in 0..20 {
        deficient[i * 5 + 4] = deficient[i * 5] - 2.0 * deficient[i * 5 + 1];
    }
    for (m, rank) in [(a.clone(), 5), (DenseMatrix::new(20, 5, deficient).unwrap(), 4)] {
        let f = thin_qr(&m).unwrap();
        assert_eq!(f.rank(), rank);
        for i in 0..rank {
            for j in 0..rank {
                let g: f64 = (0..20).map(|k| f.q.get(k, i) * f.q.get(k, j)).sum();
                assert!((g - (i == j) as u8 as f64).abs() < 1e-12);
            }
        }
        for (k, &col) in f.perm.iter().enumerate() {
            for i in 0..rank {
                if i > k {
                    assert_eq!(f.r.get(i, k), 0.0);
                }
            }
            for row in 0..20 {
                let qr: f64 = (0..rank).map(|i| f.q.get(row, i) * f.r.get(i, k)).sum();
                assert!((qr - m.get(row, col)).abs() < 1e-12 * m.frob_norm());
            }
        }
        // orthonormal columns have κ_dem = √r
        let kappa = demmel_condition(&f.q).unwrap();
        assert!((kappa - (rank as f64).sqrt()).abs() < 1e-10);
    }
    assert!(thin_qr(&DenseMatrix::new(3, 2, vec![0.0; 6]).unwrap()).is_err());
}

#[test]
fn volume_sampling_matches_determinant_law() {
    let mut rng = RngStream::new(10);
    let shapes = [(3, 2), (4, 2), (5, 3), (6, 2), (6, 3), (7, 1), (8, 3), (8, 2), (4, 3), (3, 3)];
    for (case, &(n, r)) in shapes.iter().enumerate() {
        let q = thin_qr(&random_matrix(n, r, &mut rng)).unwrap().q;
        let all = subsets(n, r);
        let probs: Vec<f64> = all
            .iter()
            .map(|s| {
                let m: Vec<Vec<f64>> = s.iter().map(|&i| q.row(i).to_vec()).collect();
                det(&m).powi(2)
            })
            .collect();
        // Cauchy–Binet: the squared minors of an orthonormal Q sum to one
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let draws = 100_000;
        let mut counts = vec![0usize; all.len()];
        for _ in 0..draws {
            let s = volume_sample(&q, &mut rng).unwrap().sorted();
            counts[all.iter().position(|a| *a == s).unwrap()] += 1;
        }
        let mut stat = 0.0;
        let mut cells = 0;
        for (&c, &p) in counts.iter().zip(&probs) {
            let e = p * draws as f64;
            if e > 0.0 {
                stat += (c as f64 - e).powi(2) / e;
                cells += 1;
            }
        }
        let p = if cells > 1 {
            1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
        } else {
            1.0
        };
        assert!(p > 1e-6, "case {case} (n={n}, r={r}): p = {p}");
    }
}

/// The volume-sampled start has expected residual exactly `(r + 1)` times
/// the optimum.
#[test]
fn initial_estimate_residual_factor() {
    let p = gen_gaussian_problem(40, 3, 1.0, 21).unwrap();
    let solver = PreconditionedTark::new(&p).unwrap();
    let q = solver.factors().q.clone();
    let r = solver.rank();
    let qp = LeastSquaresProblem::new(q.clone(), p.rhs.clone()).unwrap();
    let opt = qp.residual_sq(&lstsq_reference(&qp).unwrap());
    let mut rng = RngStream::new(4);
    let trials = 20_000;
    let res: Vec<f64> = (0..trials)
        .map(|_| {
            let (_, y0, _) = solver.initial_estimate(&mut rng).unwrap();
            qp.residual_sq(&y0)
        })
        .collect();
    let mean = res.iter().sum::<f64>() / trials as f64;
    let var = res.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    let want = (r + 1) as f64 * opt;
    assert!((mean - want).abs() <= 4.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn run_reads_r_plus_steps_entries() {
    let p = gen_gaussian_problem(60, 4, 0.5, 2).unwrap();
    let solver = PreconditionedTark::new(&p).unwrap();
    let mut rng = RngStream::new(0);
    for (t_b, t) in [(0, 1), (5, 11), (100, 201)] {
        let est = solver.run(t_b, t, &mut rng, &mut tark::kaczmarz::NoTrace).unwrap();
        assert_eq!(est.entries_accessed, 4 + t - 1);
        assert_eq!(est.subset.indices.len(), 4);
        // x maps y_bar back through R
        let qy = solver.factors().q.matvec(&est.y_bar);
        let ax = p.matrix.matvec(&est.x);
        assert!(relative_error(&ax, &qy) < 1e-10);
    }
    // with a long run the estimate approaches the least-squares solution
    let est = solver.run(20_000, 40_001, &mut rng, &mut tark::kaczmarz::NoTrace).unwrap();
    let x_star = p.reference_solution.as_ref().unwrap();
    assert!(relative_error(&est.x, x_star) < 0.05);
}

#[test]
fn lu_solve_recovers_and_flags_singular() {
    let m = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
    let x = [1.0, -2.0, 0.5];
    let c: Vec<f64> = (0..3).map(|i| dot(&m[i * 3..i * 3 + 3], &x)).collect();
    let y = lu_solve(&m, &c, 1e-12).unwrap();
    assert!(relative_error(&y, &x) < 1e-14);
    assert!(lu_solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0], 1e-12).is_err());
}

#[test]
fn split_budget_meets_target_factor() {
    for &(r, eps) in &[(10usize, 0.1), (3, 0.5), (25, 0.01)] {
        let rf = r as f64;
        let t_b = (rf * (2.0 * rf / eps).ln()).ceil() as u64;
        let t = t_b + ((4.0 * rf - 2.0) / eps).ceil() as u64;
        assert!(bound_theorem6(r, t_b, t) <= 1.0 + eps);
        let entries = (r as u64 + t - 1) as f64;
        assert!(entries <= entry_budget(r, eps) + 2.0);
    }
    // the half-and-half schedule is at least as long as the budget
    let (t_b, t) = budget_schedule(10, 0.1);
    assert_eq!(t_b, t / 2);
    assert!((10 + t - 1) as f64 >= entry_budget(10, 0.1));
    assert!(bound_theorem6(10, t_b, t) <= 1.1);
}
