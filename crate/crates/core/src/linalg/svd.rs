/// Singular values of a row-major `rows × cols` matrix by one-sided
/// (Hestenes) Jacobi, descending, `min(rows, cols)` of them.
///
/// Rotations orthogonalize columns implicitly, which diagonalizes the Gram
/// matrix without ever forming it.
pub fn jacobi_singular_values(rows: usize, cols: usize, entries: &[f64]) -> Vec<f64> {
    assert_eq!(entries.len(), rows * cols);
    // Work on whichever orientation has fewer columns.
    let (len, count, mut m) = if rows >= cols {
        let mut m = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                m[j * rows + i] = entries[i * cols + j];
            }
        }
        (rows, cols, m)
    } else {
        (cols, rows, entries.to_vec())
    };

    const MAX_SWEEPS: usize = 80;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..count {
            for q in (p + 1)..count {
                let (alpha, beta, gamma) = {
                    let cp = &m[p * len..(p + 1) * len];
                    let cq = &m[q * len..(q + 1) * len];
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        a += x * x;
                        b += y * y;
                        g += x * y;
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = m.split_at_mut(q * len);
                let cp = &mut left[p * len..(p + 1) * len];
                let cq = &mut right[..len];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = m
        .chunks_exact(len)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}
