//! Dense kernels and direct reference solvers.
//!
//! Everything downstream (samplers, iterative solvers, bound evaluators)
//! treats the types here as immutable once built. The reference solvers go
//! through a Householder QR with column pivoting; singular values come from a
//! one-sided Jacobi sweep over the triangular factor, which keeps small
//! singular values of ill-conditioned designs (monomial bases) accurate.

mod io;
mod qr;
mod svd;

pub use io::{
    format_matrix, format_vector, parse_matrix, parse_vector, read_matrix, read_vector,
    write_matrix, write_vector,
};
pub use qr::PivotedQr;
pub use svd::jacobi_singular_values;

use crate::error::{Error, Result};

/// Relative threshold below which a singular value (or a pivoted `R`
/// diagonal entry) counts as zero, scaled by the largest one.
pub fn rank_tolerance(n_rows: usize, n_cols: usize) -> f64 {
    f64::EPSILON * n_rows.max(n_cols) as f64
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// Squared Euclidean distance between two vectors.
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `‖x − y‖ / ‖y‖`, or the absolute distance when `y` is zero.
pub fn relative_error(x: &[f64], reference: &[f64]) -> f64 {
    let denom = norm(reference);
    let d = dist_sq(x, reference).sqrt();
    if denom > 0.0 {
        d / denom
    } else {
        d
    }
}

/// Row-major dense matrix with cached squared row norms.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
    row_sq_norms: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be at least 1x1, got {n_rows}x{n_cols}"
            )));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::Dimension(format!(
                "{n_rows}x{n_cols} matrix needs {} entries, got {}",
                n_rows * n_cols,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let row_sq_norms = entries.chunks_exact(n_cols).map(norm_sq).collect();
        Ok(Self {
            n_rows,
            n_cols,
            entries,
            row_sq_norms,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, entries)
    }

    /// Builds column-by-column from a column-major buffer.
    pub fn from_col_major(n_rows: usize, n_cols: usize, cols: &[f64]) -> Result<Self> {
        let mut entries = vec![0.0; n_rows * n_cols];
        for j in 0..n_cols {
            for i in 0..n_rows {
                entries[i * n_cols + j] = cols[j * n_rows + i];
            }
        }
        Self::new(n_rows, n_cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::new(n, n, entries).expect("identity is well formed")
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn row_sq_norm(&self, i: usize) -> f64 {
        self.row_sq_norms[i]
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    pub fn frob_sq(&self) -> f64 {
        self.row_sq_norms.iter().sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension");
        self.rows().map(|r| dot(r, x)).collect()
    }

    /// `Aᵀ y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows, "matvec_t dimension");
        let mut out = vec![0.0; self.n_cols];
        for (r, &yi) in self.rows().zip(y) {
            for (o, a) in out.iter_mut().zip(r) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut entries = vec![0.0; self.entries.len()];
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                entries[j * self.n_rows + i] = self.get(i, j);
            }
        }
        DenseMatrix::new(self.n_cols, self.n_rows, entries).expect("transpose of valid matrix")
    }

    pub fn to_col_major(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.entries.len()];
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                cols[j * self.n_rows + i] = self.get(i, j);
            }
        }
        cols
    }

    /// Rows selected by `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<DenseMatrix> {
        let mut entries = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            entries.extend_from_slice(self.row(i));
        }
        DenseMatrix::new(indices.len(), self.n_cols, entries)
    }
}

/// Overdetermined least-squares instance `min ‖b − A x‖²`, optionally
/// carrying its exact solution.
#[derive(Clone, Debug)]
pub struct LeastSquaresProblem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    pub reference_solution: Option<Vec<f64>>,
    pub reference_residual_sq: Option<f64>,
}

impl LeastSquaresProblem {
    pub fn new(matrix: DenseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != matrix.n_rows() {
            return Err(Error::Dimension(format!(
                "rhs has length {}, matrix has {} rows",
                rhs.len(),
                matrix.n_rows()
            )));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            matrix,
            rhs,
            reference_solution: None,
            reference_residual_sq: None,
        })
    }

    /// Computes and attaches the minimum-norm least-squares solution.
    pub fn with_reference(mut self) -> Result<Self> {
        let x = lstsq_reference(&self)?;
        self.reference_residual_sq = Some(self.residual_sq(&x));
        self.reference_solution = Some(x);
        Ok(self)
    }

    /// Attaches a solution known in closed form.
    pub fn with_known_solution(mut self, x: Vec<f64>) -> Self {
        self.reference_residual_sq = Some(self.residual_sq(&x));
        self.reference_solution = Some(x);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .matvec(x)
            .into_iter()
            .zip(&self.rhs)
            .map(|(ax, b)| b - ax)
            .collect()
    }

    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        self.matrix
            .rows()
            .zip(&self.rhs)
            .map(|(r, b)| {
                let e = b - dot(r, x);
                e * e
            })
            .sum()
    }

    /// `‖Aᵀ(b − A x)‖`, the normal-equations defect at `x`.
    pub fn normal_equations_defect(&self, x: &[f64]) -> f64 {
        norm(&self.matrix.matvec_t(&self.residual(x)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSummary {
    pub sigma_max: f64,
    /// Smallest singular value above the rank threshold.
    pub sigma_min_pos: f64,
    pub frob_norm: f64,
    pub rank: usize,
    /// All `min(n, d)` singular values, descending.
    pub singular_values: Vec<f64>,
}

impl SpectralSummary {
    /// `‖A⁺‖ ‖A‖_F`
    pub fn kappa_dem(&self) -> f64 {
        self.frob_norm / self.sigma_min_pos
    }

    /// `‖A⁺‖²`
    pub fn pinv_norm_sq(&self) -> f64 {
        1.0 / (self.sigma_min_pos * self.sigma_min_pos)
    }

    /// Spectral condition number `‖A‖ ‖A⁺‖`.
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min_pos
    }
}

/// Minimum-norm solution of `min ‖b − A x‖²`.
pub fn lstsq_reference(problem: &LeastSquaresProblem) -> Result<Vec<f64>> {
    let qr = PivotedQr::factor(&problem.matrix);
    Ok(qr.solve_min_norm(&problem.rhs))
}

pub fn spectral_summary(matrix: &DenseMatrix) -> Result<SpectralSummary> {
    let qr = PivotedQr::factor(matrix);
    let r = qr.r_factor(qr.steps());
    let singular_values = jacobi_singular_values(qr.steps(), matrix.n_cols(), &r);
    let sigma_max = singular_values[0];
    if sigma_max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let tol = rank_tolerance(matrix.n_rows(), matrix.n_cols()) * sigma_max;
    let rank = singular_values.iter().filter(|&&s| s > tol).count();
    Ok(SpectralSummary {
        sigma_max,
        sigma_min_pos: singular_values[rank - 1],
        frob_norm: matrix.frob_norm(),
        rank,
        singular_values,
    })
}

/// Demmel condition number `‖A⁺‖ ‖A‖_F`.
pub fn demmel_condition(matrix: &DenseMatrix) -> Result<f64> {
    Ok(spectral_summary(matrix)?.kappa_dem())
}

/// Ridge solution `(AᵀA + λI)⁻¹ Aᵀ b`.
///
/// Reduces through the pivoted QR of `A` to the small stacked system
/// `[R; √λ I] z ≈ [Qᵀb; 0]`, so the Gram matrix is never formed.
pub fn ridge_solution(problem: &LeastSquaresProblem, lambda: f64) -> Result<Vec<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ridge parameter must be finite and >= 0, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return lstsq_reference(problem);
    }
    let d = problem.n_cols();
    let qr = PivotedQr::factor(&problem.matrix);
    let k = qr.steps();
    let r = qr.r_factor(k);
    let qtb = qr.apply_qt(&problem.rhs);

    let sqrt_lambda = lambda.sqrt();
    let mut stacked = vec![0.0; (k + d) * d];
    stacked[..k * d].copy_from_slice(&r);
    for j in 0..d {
        stacked[(k + j) * d + j] = sqrt_lambda;
    }
    let mut rhs = vec![0.0; k + d];
    rhs[..k].copy_from_slice(&qtb[..k]);

    let small = DenseMatrix::new(k + d, d, stacked)?;
    let z = PivotedQr::factor(&small).solve_min_norm(&rhs);
    Ok(qr.unpermute(&z))
}
