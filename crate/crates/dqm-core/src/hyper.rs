//! Terminating hypergeometric and basic hypergeometric sums.

/// Rising factorial `(a)_k`.
pub fn poch(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (a + j as f64))
}

/// q-shifted factorial `(a; q)_k`.
pub fn qpoch(a: f64, q: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    let mut qj = 1.0;
    for _ in 0..k {
        acc *= 1.0 - a * qj;
        qj *= q;
    }
    acc
}

/// `(a; q)_inf`, truncated once the factors differ from one by less than `tol`.
pub fn qpoch_inf(a: f64, q: f64, tol: f64) -> f64 {
    let mut acc = 1.0;
    let mut term = a;
    for _ in 0..100_000 {
        if term.abs() < tol {
            break;
        }
        acc *= 1.0 - term;
        term *= q;
    }
    acc
}

/// `rFs(upper; lower; z)` summed for `k = 0..=kmax`.
pub fn hyp_sum(upper: &[f64], lower: &[f64], z: f64, kmax: usize) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..kmax {
        let kf = k as f64;
        let mut ratio = z / (kf + 1.0);
        for a in upper {
            ratio *= a + kf;
        }
        for b in lower {
            ratio /= b + kf;
        }
        term *= ratio;
        if term == 0.0 {
            break;
        }
        sum += term;
    }
    sum
}

/// `r phi s(upper; lower; q, z)` summed for `k = 0..=kmax`, with the usual
/// `[(-1)^k q^{k(k-1)/2}]^{1+s-r}` balancing factor.
pub fn qhyp_sum(upper: &[f64], lower: &[f64], q: f64, z: f64, kmax: usize) -> f64 {
    let balance = 1 + lower.len() as i64 - upper.len() as i64;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut qk = 1.0;
    for _ in 0..kmax {
        let mut ratio = z / (1.0 - qk * q);
        for a in upper {
            ratio *= 1.0 - a * qk;
        }
        for b in lower {
            ratio /= 1.0 - b * qk;
        }
        // ratio of consecutive balancing factors is (-q^k)^balance
        ratio *= (-qk).powi(balance as i32);
        term *= ratio;
        qk *= q;
        if term == 0.0 {
            break;
        }
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pochhammer_values() {
        assert_eq!(poch(3.0, 0), 1.0);
        assert_eq!(poch(3.0, 3), 60.0);
        assert_eq!(poch(-2.0, 3), 0.0);
        assert!((qpoch(0.5, 0.5, 2) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn chu_vandermonde() {
        // 2F1(-n, b; c; 1) = (c-b)_n / (c)_n
        let (n, b, c) = (4usize, 1.3, 2.7);
        let lhs = hyp_sum(&[-(n as f64), b], &[c], 1.0, n);
        let rhs = poch(c - b, n) / poch(c, n);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn q_chu_vandermonde() {
        // 2phi1(q^-n, b; c; q, q) = (c/b; q)_n / (c; q)_n * b^n
        let (q, n, b, c) = (0.5f64, 5usize, 0.3, 0.7);
        let lhs = qhyp_sum(&[q.powi(-(n as i32)), b], &[c], q, q, n);
        let rhs = qpoch(c / b, q, n) / qpoch(c, q, n) * b.powi(n as i32);
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn q_binomial_theorem_finite() {
        // 1phi0(q^-n; -; q, z) = (z q^-n; q)_n
        let (q, n, z) = (0.6f64, 4usize, 0.37);
        let lhs = qhyp_sum(&[q.powi(-(n as i32))], &[], q, z, n);
        let rhs = qpoch(z * q.powi(-(n as i32)), q, n);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn infinite_product_converges() {
        let q: f64 = 0.5;
        let full = qpoch_inf(0.3, q, 1e-18);
        let partial = qpoch(0.3, q, 80);
        assert!((full - partial).abs() < 1e-15);
    }
}
