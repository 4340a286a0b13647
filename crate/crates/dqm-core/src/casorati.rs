//! Casorati determinants `W[f_1..f_m](x) = det(f_k(x + j - 1))` and the
//! identities they satisfy.

use serde::Serialize;

use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::linalg::{det, fitted_degree, poly_fit_residual};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Table,
}

/// Samples on the integer range `[x_lo, x_hi]`. Reads outside the range are
/// errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledFunction {
    x_lo: i64,
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl SampledFunction {
    pub fn from_values(x_lo: i64, values: Vec<f64>, provenance: Provenance) -> Self {
        SampledFunction {
            x_lo,
            values,
            provenance,
        }
    }

    pub fn from_fn(x_lo: i64, x_hi: i64, f: impl Fn(i64) -> f64) -> Self {
        SampledFunction {
            x_lo,
            values: (x_lo..=x_hi).map(f).collect(),
            provenance: Provenance::ClosedForm,
        }
    }

    pub fn x_lo(&self) -> i64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> i64 {
        self.x_lo + self.values.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> Result<f64> {
        if x < self.x_lo || x > self.x_hi() {
            return Err(DqmError::DomainExceeded {
                x,
                lo: self.x_lo,
                hi: self.x_hi(),
            });
        }
        Ok(self.values[(x - self.x_lo) as usize])
    }

    /// Pointwise product with another sampled function on the common range.
    pub fn times(&self, g: &SampledFunction) -> SampledFunction {
        let lo = self.x_lo.max(g.x_lo);
        let hi = self.x_hi().min(g.x_hi());
        SampledFunction::from_fn(lo, hi, |x| self.get(x).unwrap() * g.get(x).unwrap())
    }
}

/// `W[f_1..f_m](x)` from an evaluator `f(k, y)` of the `k`-th function.
pub fn casoratian_by(m: usize, x: i64, f: impl Fn(usize, i64) -> f64) -> f64 {
    let mut a = Vec::with_capacity(m * m);
    for j in 0..m {
        for k in 0..m {
            a.push(f(k, x + j as i64));
        }
    }
    det(&a, m)
}

/// `W[fs](x)`; `m = 0` gives 1.
pub fn casoratian(fs: &[SampledFunction], x: i64) -> Result<f64> {
    let m = fs.len();
    let hi = x + m as i64 - 1;
    for f in fs {
        f.get(x)?;
        if m > 0 {
            f.get(hi)?;
        }
    }
    Ok(casoratian_by(m, x, |k, y| fs[k].values[(y - fs[k].x_lo) as usize]))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Relative residual of `W[g f_1..g f_n](x) = prod_{k<n} g(x+k) W[f](x)`.
pub fn check_product_rule(g: &SampledFunction, fs: &[SampledFunction], x: i64) -> Result<f64> {
    Ok(product_rule_residuals(g, fs, x)?.0)
}

/// The product-rule residual relative to the result and relative to
/// `prod |g| * H`, with `H` the Hadamard bound (product of row norms) of the
/// Casorati matrix of `fs`. The second is insensitive to draws where
/// `W[f]` is nearly singular.
pub fn product_rule_residuals(g: &SampledFunction, fs: &[SampledFunction], x: i64) -> Result<(f64, f64)> {
    let gf: Vec<SampledFunction> = fs.iter().map(|f| f.times(g)).collect();
    let lhs = casoratian(&gf, x)?;
    let mut prod = 1.0;
    for k in 0..fs.len() as i64 {
        prod *= g.get(x + k)?;
    }
    let rhs = prod * casoratian(fs, x)?;
    if lhs == rhs {
        return Ok((0.0, 0.0));
    }
    let mut hadamard = 1.0;
    for j in 0..fs.len() as i64 {
        let mut row = 0.0;
        for f in fs {
            row += f.get(x + j)?.powi(2);
        }
        hadamard *= row.sqrt();
    }
    let diff = (lhs - rhs).abs();
    Ok((rel(lhs, rhs), diff / (prod.abs() * hadamard).max(f64::MIN_POSITIVE)))
}

/// Residual of `W[W[f, g], W[f, h]](x) = W[f](x+1) W[f, g, h](x)`, relative
/// to the largest product on either side (the left side cancels).
pub fn check_wronskian_identity(
    fs: &[SampledFunction],
    g: &SampledFunction,
    h: &SampledFunction,
    x: i64,
) -> Result<f64> {
    let with = |extra: &[&SampledFunction]| {
        let mut v = fs.to_vec();
        v.extend(extra.iter().map(|f| (*f).clone()));
        v
    };
    let fg = with(&[g]);
    let fh = with(&[h]);
    let wg0 = casoratian(&fg, x)?;
    let wg1 = casoratian(&fg, x + 1)?;
    let wh0 = casoratian(&fh, x)?;
    let wh1 = casoratian(&fh, x + 1)?;
    let lhs = wg0 * wh1 - wg1 * wh0;
    let rhs = casoratian(fs, x + 1)? * casoratian(&with(&[g, h]), x)?;
    if lhs == rhs {
        return Ok(0.0);
    }
    let scale = (wg0 * wh1).abs().max((wg1 * wh0).abs()).max(rhs.abs());
    Ok((lhs - rhs).abs() / scale)
}

/// `varphi_l(x) = prod_{0<=j<k<=l-1} (eta(x+k) - eta(x+j)) / eta(k-j)`.
pub fn varphi_ell(spec: &FamilySpec, l: usize, x: f64) -> f64 {
    let mut acc = 1.0;
    for k in 1..l {
        for j in 0..k {
            let (kf, jf) = (k as f64, j as f64);
            acc *= (spec.eta(x + kf) - spec.eta(x + jf)) / spec.eta(kf - jf);
        }
    }
    acc
}

/// The same product written as `prod varphi(x + j; lambda + (k-j-1) delta)`.
pub fn varphi_ell_product(spec: &FamilySpec, l: usize, x: f64) -> f64 {
    let mut acc = 1.0;
    for k in 1..l {
        for j in 0..k {
            acc *= spec.shifted(k - j - 1).varphi(x + j as f64);
        }
    }
    acc
}

/// Prefactor of `W[P_{n_1}..P_{n_m}] = prefactor * varphi_m * P_(n)`:
/// `(-1)^{C(m,2)} kappa^{-C(m,3)} prod_{j<k} (E(n_k) - E(n_j)) / B(0; lambda + (j-1) delta)`
/// with `j, k` one-based.
pub fn wp_prefactor(spec: &FamilySpec, levels: &[usize]) -> Result<f64> {
    let m = levels.len();
    let c2 = m * m.saturating_sub(1) / 2;
    let c3 = m * m.saturating_sub(1) * m.saturating_sub(2) / 6;
    let mut acc = if c2 % 2 == 0 { 1.0 } else { -1.0 };
    acc *= spec.kappa().powi(-(c3 as i32));
    let mut b0 = Vec::with_capacity(m);
    for j in 0..m {
        b0.push(spec.shifted(j).b(0.0));
    }
    for k in 0..m {
        for j in 0..k {
            let gap = spec.energy(levels[k]) - spec.energy(levels[j]);
            if gap == 0.0 {
                return Err(DqmError::ZeroPrefactor(levels.to_vec()));
            }
            acc *= gap / b0[j];
        }
    }
    Ok(acc)
}

/// A Casoratian of eigenpolynomials together with its normalized
/// polynomial factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolynomialCasoratian {
    pub value: f64,
    pub prefactor: f64,
    pub varphi: f64,
    /// `P_(n_1..n_m)(x)`, equal to 1 at `x = 0`.
    pub normalized: f64,
}

/// `W[P_{n_1}..P_{n_m}](x)` and the normalized polynomial extracted from
/// it.
pub fn casoratian_of_polynomials(spec: &FamilySpec, levels: &[usize], x: i64) -> Result<PolynomialCasoratian> {
    let prefactor = wp_prefactor(spec, levels)?;
    let value = casoratian_by(levels.len(), x, |k, y| spec.poly(levels[k], y as f64));
    let varphi = varphi_ell(spec, levels.len(), x as f64);
    Ok(PolynomialCasoratian {
        value,
        prefactor,
        varphi,
        normalized: value / (prefactor * varphi),
    })
}

/// Degree of `values` as a polynomial in `eta(x; lambda + shift delta)`
/// sampled at `x = 0..values.len()`.
pub fn degree_in_eta(spec: &FamilySpec, shift: usize, values: &[f64], tol: f64) -> Option<usize> {
    let xs: Vec<f64> = (0..values.len()).map(|x| spec.eta_shifted(x as f64, shift)).collect();
    fitted_degree(&xs, values, tol)
}

/// Residuals of the closure relations: `eta(x+a) + eta(x-a)` is affine and
/// `eta(x+a) eta(x-a)` quadratic in `eta(x)`, sampled on `x = lo..=hi`.
pub fn eta_closure_residuals(spec: &FamilySpec, alpha: f64, lo: i64, hi: i64) -> (f64, f64) {
    let xs: Vec<f64> = (lo..=hi).map(|x| spec.eta(x as f64)).collect();
    let sum: Vec<f64> = (lo..=hi)
        .map(|x| spec.eta(x as f64 + alpha) + spec.eta(x as f64 - alpha))
        .collect();
    let prod: Vec<f64> = (lo..=hi)
        .map(|x| spec.eta(x as f64 + alpha) * spec.eta(x as f64 - alpha))
        .collect();
    (poly_fit_residual(&xs, &sum, 1), poly_fit_residual(&xs, &prod, 2))
}

/// Worst residuals of the product rule and the Wronskian identity over
/// randomized trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityTrials {
    pub seed: u64,
    pub trials: usize,
    /// Scaled by the Hadamard bound, see [`product_rule_residuals`].
    pub product_rule: f64,
    /// Plain relative residual; large only when `W[f]` nearly cancels.
    pub product_rule_unscaled: f64,
    pub wronskian: f64,
}

/// Runs `trials` draws of each identity. Functions are sampled uniformly on
/// `[-1, 1]` over `[-2, 10]`; the multiplier `g` of the product rule is
/// drawn from `[0.5, 2]` with a random sign so that it never vanishes.
pub fn random_identity_trials(seed: u64, trials: usize) -> Result<IdentityTrials> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (-2i64, 10i64);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, positive: bool| {
        let values = (lo..=hi)
            .map(|_| {
                if positive {
                    let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    s * rng.gen_range(0.5..2.0)
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        SampledFunction::from_values(lo, values, Provenance::Table)
    };
    let mut product_rule = 0.0f64;
    let mut product_rule_unscaled = 0.0f64;
    let mut wronskian = 0.0f64;
    for _ in 0..trials {
        let m = rng.gen_range(1..=4);
        let x = rng.gen_range(lo..=hi - m as i64 - 1);
        let fs: Vec<SampledFunction> = (0..m).map(|_| draw(&mut rng, false)).collect();
        let g = draw(&mut rng, true);
        let (plain, scaled) = product_rule_residuals(&g, &fs, x)?;
        product_rule = product_rule.max(scaled);
        product_rule_unscaled = product_rule_unscaled.max(plain);
        let k = rng.gen_range(0..=2usize);
        let (g, h) = (draw(&mut rng, false), draw(&mut rng, false));
        wronskian = wronskian.max(check_wronskian_identity(&fs[..k.min(m)], &g, &h, x)?);
    }
    Ok(IdentityTrials {
        seed,
        trials,
        product_rule,
        product_rule_unscaled,
        wronskian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(f: impl Fn(i64) -> f64) -> SampledFunction {
        SampledFunction::from_fn(-2, 12, f)
    }

    #[test]
    fn small_casoratians() {
        assert_eq!(casoratian(&[], 3).unwrap(), 1.0);
        let f = sample(|x| (x * x) as f64);
        assert_eq!(casoratian(&[f.clone()], 3).unwrap(), 9.0);
        let one = sample(|_| 1.0);
        let id = sample(|x| x as f64);
        for x in -2..12 {
            assert_eq!(casoratian(&[one.clone(), id.clone()], x).unwrap(), 1.0);
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let f = SampledFunction::from_fn(0, 3, |x| x as f64);
        let g = SampledFunction::from_fn(0, 3, |_| 1.0);
        assert_eq!(
            casoratian(&[f, g], 3),
            Err(DqmError::DomainExceeded { x: 4, lo: 0, hi: 3 })
        );
    }

    #[test]
    fn identity_base_cases() {
        let f = sample(|x| (x * x - 3) as f64);
        let g = sample(|_| 1.0);
        assert_eq!(check_product_rule(&g, &[f.clone()], 2).unwrap(), 0.0);
        let h = sample(|x| (2 * x + 1) as f64);
        assert_eq!(check_product_rule(&h, &[f.clone()], 2).unwrap(), 0.0);
        assert_eq!(check_wronskian_identity(&[], &f, &h, 1).unwrap(), 0.0);
    }

    fn random_cubic(rng: &mut ChaCha8Rng) -> SampledFunction {
        let c: Vec<i64> = (0..4).map(|_| rng.gen_range(-5..=5)).collect();
        sample(move |x| (c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x) as f64)
    }

    #[test]
    fn identities_on_random_cubics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let fs: Vec<SampledFunction> = (0..3).map(|_| random_cubic(&mut rng)).collect();
            let g = random_cubic(&mut rng);
            let h = random_cubic(&mut rng);
            assert!(check_product_rule(&g, &fs, 1).unwrap() <= 1e-12);
            assert!(check_wronskian_identity(&fs[..1], &g, &h, 1).unwrap() <= 1e-12);
            assert!(check_wronskian_identity(&fs[..2], &g, &h, 1).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn randomized_trials_are_reproducible() {
        let a = random_identity_trials(42, 1000).unwrap();
        let b = random_identity_trials(42, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.product_rule <= 1e-12, "{a:?}");
        assert!(a.wronskian <= 1e-12, "{a:?}");
        let c = random_identity_trials(43, 10).unwrap();
        assert_ne!(c.product_rule, a.product_rule);
    }

    #[test]
    fn varphi_examples() {
        let spec = FamilySpec::default_for(FamilyId::DualQuantumQKrawtchouk);
        assert_eq!(varphi_ell(&spec, 0, 1.0), 1.0);
        assert_eq!(varphi_ell(&spec, 1, 1.0), 1.0);
        assert!((varphi_ell(&spec, 2, 1.0) - 0.5).abs() < 1e-15);
        for id in FamilyId::ALL {
            let spec = FamilySpec::default_for(id);
            for l in 0..5 {
                for x in 0..4 {
                    let a = varphi_ell(&spec, l, x as f64);
                    let b = varphi_ell_product(&spec, l, x as f64);
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{id} l={l} x={x}");
                }
            }
        }
    }

    #[test]
    fn single_polynomial_is_itself() {
        let spec = FamilySpec::default_for(FamilyId::Hahn);
        let r = casoratian_of_polynomials(&spec, &[3], 2).unwrap();
        assert_eq!(r.prefactor, 1.0);
        assert!((r.normalized - spec.poly(3, 2.0)).abs() < 1e-14);
        assert!((casoratian_of_polynomials(&spec, &[3], 0).unwrap().normalized - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coincident_levels_rejected() {
        let spec = FamilySpec::default_for(FamilyId::Hahn);
        assert_eq!(
            casoratian_of_polynomials(&spec, &[2, 2], 0),
            Err(DqmError::ZeroPrefactor(vec![2, 2]))
        );
    }

    #[test]
    fn normalized_at_origin_and_degree() {
        for id in FamilyId::ALL {
            let spec = FamilySpec::default_for(id);
            for levels in [&[1usize, 2][..], &[2, 3], &[1, 3], &[1, 2, 3], &[0, 2, 3]] {
                let r = casoratian_of_polynomials(&spec, levels, 0).unwrap();
                assert!((r.normalized - 1.0).abs() <= 1e-10, "{id} {levels:?}: {}", r.normalized);
                let m = levels.len();
                let expected = levels.iter().sum::<usize>() - m * (m - 1) / 2;
                let vals: Vec<f64> = (0..expected as i64 + 4)
                    .map(|x| casoratian_of_polynomials(&spec, levels, x).unwrap().normalized)
                    .collect();
                assert_eq!(
                    degree_in_eta(&spec, m - 1, &vals, 1e-8),
                    Some(expected),
                    "{id} {levels:?}"
                );
            }
        }
    }

    #[test]
    fn ground_block_is_constant() {
        for id in FamilyId::ALL {
            let spec = FamilySpec::default_for(id);
            for l in 1..4usize {
                let levels: Vec<usize> = (0..=l).collect();
                let r0 = casoratian_of_polynomials(&spec, &levels, 0).unwrap();
                for x in 1..5 {
                    let r = casoratian_of_polynomials(&spec, &levels, x).unwrap();
                    let a = r.value / r.varphi;
                    let b = r0.value / r0.varphi;
                    assert!((a - b).abs() <= 1e-10 * b.abs(), "{id} l={l}");
                }
            }
        }
    }

    #[test]
    fn eta_closure() {
        for id in FamilyId::ALL {
            let spec = FamilySpec::default_for(id);
            for alpha in [1.0, 2.0] {
                let (s, p) = eta_closure_residuals(&spec, alpha, 2, 8);
                assert!(s <= 1e-10 && p <= 1e-10, "{id}: {s} {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn swap_flips_sign(seed in any::<u64>(), x in -2i64..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fs: Vec<SampledFunction> = (0..3).map(|_| random_cubic(&mut rng)).collect();
            let swapped = vec![fs[1].clone(), fs[0].clone(), fs[2].clone()];
            prop_assert_eq!(casoratian(&fs, x).unwrap(), -casoratian(&swapped, x).unwrap());
        }
    }
}
