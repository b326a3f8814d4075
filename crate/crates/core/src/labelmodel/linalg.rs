//! Small dense linear algebra on row-major `m x m` matrices.

use alloc::vec;
use alloc::vec::Vec;

/// Population covariance (divide by the row count) of the columns of a
/// row-major `rows x cols` matrix.
pub fn covariance(entries: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut mean = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            mean[c] += entries[r * cols + c];
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }
    let mut cov = vec![0.0; cols * cols];
    for r in 0..rows {
        let row = &entries[r * cols..(r + 1) * cols];
        for i in 0..cols {
            let di = row[i] - mean[i];
            if di == 0.0 {
                continue;
            }
            for j in i..cols {
                cov[i * cols + j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..cols {
        for j in i..cols {
            let v = cov[i * cols + j] / rows as f64;
            cov[i * cols + j] = v;
            cov[j * cols + i] = v;
        }
    }
    cov
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
/// Returns `None` when the matrix is not numerically positive definite.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Solve L Y = I, then Lᵀ X = Y column by column.
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = sum / l[i * n + i];
        }
    }
    // symmetrize away rounding
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
    Some(inv)
}
