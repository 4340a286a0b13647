//! Small dense kernels: symmetric tridiagonal eigensolver, determinants and
//! least-squares polynomial fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{DqmError, Result};

const MAX_QL_ITERATIONS: usize = 64;

/// Eigenpairs of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples `i` and `i+1`), by implicit QL with
/// accumulated rotations. Eigenvalues ascend; eigenvectors are the columns of
/// the returned matrix.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 >= n, "off-diagonal too short");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > MAX_QL_ITERATIONS {
                    return Err(DqmError::ConvergenceFailure { index: l, iterations });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Determinant of a row-major `n x n` matrix. Sizes up to 3 use the explicit
/// expansion, larger ones LU with partial pivoting.
pub fn det(a: &[f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    match n {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => lu_det(a.to_vec(), n),
    }
}

fn lu_det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut sign = 1.0;
    let mut acc = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            sign = -sign;
        }
        let p = a[col * n + col];
        acc *= p;
        for row in col + 1..n {
            let factor = a[row * n + col] / p;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    sign * acc
}

/// Least-squares polynomial fit of `ys` against `xs`. The abscissae are
/// affinely mapped to `[-1, 1]` before forming the Vandermonde matrix.
/// Returns the maximum absolute residual relative to `max |y|`.
pub fn poly_fit_residual(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
    let n = xs.len();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(f64::MIN_POSITIVE);
    let vander = DMatrix::from_fn(n, degree + 1, |r, c| ((xs[r] - mid) / half).powi(c as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = vander.clone().svd(true, true);
    let coef = match svd.solve(&rhs, 1e-14) {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let fitted = vander * coef;
    (fitted - rhs).amax() / scale
}

/// Smallest degree whose least-squares fit reproduces the data to `tol`
/// (relative). `None` when the data do not determine a degree, i.e. fewer
/// than `degree + 3` samples would be needed to tell.
pub fn fitted_degree(xs: &[f64], ys: &[f64], tol: f64) -> Option<usize> {
    let n = xs.len();
    if ys.iter().all(|y| *y == 0.0) {
        return Some(0);
    }
    for degree in 0..n {
        if degree + 3 > n {
            return None;
        }
        if poly_fit_residual(xs, ys, degree) <= tol {
            return Some(degree);
        }
    }
    None
}

/// Number of strict sign changes along a sequence, ignoring exact zeros.
pub fn sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_matches_nalgebra() {
        let diag = [2.0, 3.5, 1.25, 4.0, 0.5];
        let off = [-1.0, 0.3, -0.7, 2.0];
        let (vals, vecs) = tridiagonal_eigen(&diag, &off).unwrap();
        let dense = DMatrix::from_fn(5, 5, |r, c| {
            if r == c {
                diag[r]
            } else if r + 1 == c {
                off[r]
            } else if c + 1 == r {
                off[c]
            } else {
                0.0
            }
        });
        let mut reference: Vec<f64> = dense.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&reference) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        let gram = vecs.transpose() * &vecs;
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-13);
        let resid = &dense * &vecs - &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals));
        assert!(resid.amax() < 1e-12);
    }

    #[test]
    fn eigen_of_trivial_sizes() {
        let (v, _) = tridiagonal_eigen(&[], &[]).unwrap();
        assert!(v.is_empty());
        let (v, m) = tridiagonal_eigen(&[3.0], &[]).unwrap();
        assert_eq!(v, vec![3.0]);
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn determinants_agree_across_methods() {
        let a = [2.0, -1.0, 0.5, 3.0, 1.0, 4.0, -2.0, 0.25, 1.5];
        assert_relative_eq!(det(&a, 3), lu_det(a.to_vec(), 3), epsilon = 1e-13);
        let b = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(det(&b, 2), -2.0);
        assert_eq!(det(&[], 0), 1.0);
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, 0.0, 1.0, 3.0, -1.0, 2.0, 0.5, 0.0, 4.0, 1.0, -2.0, 2.0, 0.0, 1.0, 1.0,
            ],
        );
        let flat: Vec<f64> = (0..16).map(|i| m[(i / 4, i % 4)]).collect();
        assert_relative_eq!(det(&flat, 4), m.determinant(), epsilon = 1e-12);
    }

    #[test]
    fn lu_detects_singular() {
        let a = [
            1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0,
        ];
        assert_eq!(det(&a, 4), 0.0);
    }

    #[test]
    fn degree_detection() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * x - x + 0.5).collect();
        assert_eq!(fitted_degree(&xs, &ys, 1e-9), Some(3));
        assert_eq!(fitted_degree(&xs[..5], &ys[..5], 1e-9), None);
    }

    #[test]
    fn counts_sign_changes() {
        assert_eq!(sign_changes(&[1.0, -1.0, 0.0, -2.0, 3.0]), 2);
        assert_eq!(sign_changes(&[]), 0);
    }
}
