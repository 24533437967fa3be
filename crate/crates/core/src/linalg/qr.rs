use super::{rank_tolerance, DenseMatrix};

/// Householder QR with column pivoting, `A P = Q R`.
///
/// Reflectors are stored LAPACK-style below the diagonal of a column-major
/// work buffer (unit leading entry implied), `R` on and above it.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    n_rows: usize,
    n_cols: usize,
    work: Vec<f64>,
    taus: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn factor(matrix: &DenseMatrix) -> Self {
        Self::factor_col_major(matrix.n_rows(), matrix.n_cols(), matrix.to_col_major())
    }

    pub fn factor_col_major(n_rows: usize, n_cols: usize, mut work: Vec<f64>) -> Self {
        assert_eq!(work.len(), n_rows * n_cols);
        let steps = n_rows.min(n_cols);
        let mut perm: Vec<usize> = (0..n_cols).collect();
        let mut taus = Vec::with_capacity(steps);

        for k in 0..steps {
            // Pivot on the largest trailing column norm. Recomputed rather
            // than downdated; d is small here.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n_cols {
                let col = &work[j * n_rows + k..(j + 1) * n_rows];
                let s: f64 = col.iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..n_rows {
                    work.swap(k * n_rows + i, best * n_rows + i);
                }
                perm.swap(k, best);
            }

            let (head, tail) = work.split_at_mut((k + 1) * n_rows);
            let col = &mut head[k * n_rows + k..];
            let tau = householder_in_place(col);
            taus.push(tau);
            if tau == 0.0 {
                continue;
            }
            let v = &col[..];
            for j in (k + 1)..n_cols {
                let target = &mut tail[(j - k - 1) * n_rows + k..(j - k) * n_rows];
                reflect(v, tau, target);
            }
        }

        let mut qr = Self {
            n_rows,
            n_cols,
            work,
            taus,
            perm,
            rank: 0,
        };
        qr.rank = qr.numerical_rank();
        qr
    }

    fn numerical_rank(&self) -> usize {
        let steps = self.steps();
        if steps == 0 {
            return 0;
        }
        let lead = self.r_entry(0, 0).abs();
        if lead == 0.0 {
            return 0;
        }
        let tol = rank_tolerance(self.n_rows, self.n_cols) * lead;
        (0..steps)
            .take_while(|&k| self.r_entry(k, k).abs() > tol)
            .count()
    }

    #[inline]
    fn r_entry(&self, i: usize, j: usize) -> f64 {
        self.work[j * self.n_rows + i]
    }

    pub fn steps(&self) -> usize {
        self.taus.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// `perm[k]` is the original index of pivoted column `k`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Leading `rows` rows of `R` (row-major, pivoted column order).
    pub fn r_factor(&self, rows: usize) -> Vec<f64> {
        let d = self.n_cols;
        let mut r = vec![0.0; rows * d];
        for i in 0..rows {
            for j in i..d {
                r[i * d + j] = self.r_entry(i, j);
            }
        }
        r
    }

    /// `Qᵀ b` with the full orthogonal factor.
    pub fn apply_qt(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n_rows);
        let mut out = b.to_vec();
        for (k, &tau) in self.taus.iter().enumerate() {
            if tau != 0.0 {
                let v = &self.work[k * self.n_rows + k..(k + 1) * self.n_rows];
                reflect(v, tau, &mut out[k..]);
            }
        }
        out
    }

    /// `Q y` with the full orthogonal factor.
    pub fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows);
        let mut out = y.to_vec();
        for (k, &tau) in self.taus.iter().enumerate().rev() {
            if tau != 0.0 {
                let v = &self.work[k * self.n_rows + k..(k + 1) * self.n_rows];
                reflect(v, tau, &mut out[k..]);
            }
        }
        out
    }

    /// The first `cols` columns of `Q` as an `n × cols` matrix.
    pub fn thin_q(&self, cols: usize) -> DenseMatrix {
        let n = self.n_rows;
        let mut buf = vec![0.0; n * cols];
        for j in 0..cols {
            let col = &mut buf[j * n..(j + 1) * n];
            col[j] = 1.0;
            for k in (0..self.steps().min(cols)).rev() {
                let tau = self.taus[k];
                if tau != 0.0 {
                    let v = &self.work[k * n + k..(k + 1) * n];
                    reflect(v, tau, &mut col[k..]);
                }
            }
        }
        DenseMatrix::from_col_major(n, cols, &buf).expect("orthonormal factor is finite")
    }

    /// Maps a vector in pivoted column order back to original order.
    pub fn unpermute(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_cols];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// Minimum-norm least-squares solution of `A x ≈ b`, truncated at the
    /// numerical rank.
    pub fn solve_min_norm(&self, b: &[f64]) -> Vec<f64> {
        let c = self.apply_qt(b);
        self.solve_upper_min_norm(&c[..self.rank])
    }

    /// Minimum-norm `z` (original column order) with `R[..k, :] Pᵀ z = c`
    /// for `k = c.len() <= rank`.
    pub fn solve_upper_min_norm(&self, c: &[f64]) -> Vec<f64> {
        let k = c.len();
        let d = self.n_cols;
        if k == 0 {
            return vec![0.0; d];
        }
        if k == d {
            let z = back_substitute(d, &self.r_factor(d), c);
            return self.unpermute(&z);
        }
        // Wide trapezoid T = R[..k, :]. Factor Tᵀ Π = W L and solve
        // Lᵀ w = Πᵀ c, then z = W w is the minimum-norm solution.
        let mut tt = vec![0.0; d * k];
        for i in 0..k {
            for j in i..d {
                tt[i * d + j] = self.r_entry(i, j);
            }
        }
        let inner = PivotedQr::factor_col_major(d, k, tt);
        let l = inner.r_factor(k);
        let rhs: Vec<f64> = inner.perm.iter().map(|&p| c[p]).collect();
        let w = forward_substitute_transposed(k, &l, &rhs);
        let mut padded = vec![0.0; d];
        padded[..k].copy_from_slice(&w);
        let z = inner.apply_q(&padded);
        self.unpermute(&z)
    }
}

/// Turns `x` into the reflector `v` (with `v[0] = 1` implied, `x[0]`
/// overwritten by the new leading value `β`) and returns `τ` such that
/// `(I − τ v vᵀ) x = β e₁`.
fn householder_in_place(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
    if tail_sq == 0.0 {
        return 0.0;
    }
    let norm = (alpha * alpha + tail_sq).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in x[1..].iter_mut() {
        *v *= scale;
    }
    x[0] = beta;
    tau
}

/// Applies `I − τ v vᵀ` to `target`; `v[0]` is taken to be 1.
#[inline]
fn reflect(v: &[f64], tau: f64, target: &mut [f64]) {
    let mut w = target[0];
    for (vi, ti) in v[1..].iter().zip(&target[1..]) {
        w += vi * ti;
    }
    w *= tau;
    target[0] -= w;
    for (vi, ti) in v[1..].iter().zip(target[1..].iter_mut()) {
        *ti -= w * vi;
    }
}

/// Solves the `k × k` upper-triangular leading block of a row-major `r`
/// with row stride `k`.
pub(crate) fn back_substitute(k: usize, r: &[f64], c: &[f64]) -> Vec<f64> {
    let stride = r.len() / k;
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = c[i];
        for j in (i + 1)..k {
            s -= r[i * stride + j] * z[j];
        }
        z[i] = s / r[i * stride + i];
    }
    z
}

/// Solves `Lᵀ w = c` for upper-triangular `L` (row-major `k × k`).
fn forward_substitute_transposed(k: usize, l: &[f64], c: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; k];
    for i in 0..k {
        let mut s = c[i];
        for j in 0..i {
            s -= l[j * k + i] * w[j];
        }
        w[i] = s / l[i * k + i];
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(qr: &PivotedQr, a: &DenseMatrix) -> f64 {
        let k = qr.steps();
        let q = qr.thin_q(k);
        let r = qr.r_factor(k);
        let mut err: f64 = 0.0;
        for i in 0..a.n_rows() {
            for j in 0..a.n_cols() {
                let qr_ij: f64 = (0..k).map(|l| q.get(i, l) * r[l * a.n_cols() + j]).sum();
                err = err.max((qr_ij - a.get(i, qr.perm()[j])).abs());
            }
        }
        err
    }

    #[test]
    fn reconstructs_small_matrix() {
        let a = DenseMatrix::from_rows(&[
            [1.0, 2.0, 3.0],
            [4.0, 5.0, 6.0],
            [7.0, 8.0, 10.0],
            [1.0, -1.0, 0.5],
        ])
        .unwrap();
        let qr = PivotedQr::factor(&a);
        assert_eq!(qr.rank(), 3);
        assert!(reconstruct(&qr, &a) < 1e-13);
    }

    #[test]
    fn pivoting_orders_diagonal() {
        let a = DenseMatrix::from_rows(&[[1.0, 10.0, 0.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0]])
            .unwrap();
        let qr = PivotedQr::factor(&a);
        assert_eq!(qr.perm()[0], 1);
        let r = qr.r_factor(3);
        assert!(r[0].abs() >= r[4].abs() && r[4].abs() >= r[8].abs());
        assert_eq!(qr.rank(), 2);
    }

    #[test]
    fn apply_q_inverts_apply_qt() {
        let a = DenseMatrix::from_rows(&[[2.0, 1.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let qr = PivotedQr::factor(&a);
        let b = [0.3, -1.0, 2.0];
        let back = qr.apply_q(&qr.apply_qt(&b));
        for (x, y) in back.iter().zip(b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let a = DenseMatrix::new(3, 2, vec![0.0; 6]).unwrap();
        let qr = PivotedQr::factor(&a);
        assert_eq!(qr.rank(), 0);
        assert_eq!(qr.solve_min_norm(&[1.0, 2.0, 3.0]), vec![0.0, 0.0]);
    }
}
