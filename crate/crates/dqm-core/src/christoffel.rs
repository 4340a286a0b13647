//! Dual polynomials and the dual Christoffel transformation.
//!
//! The dual polynomial `Q_x(E)` is generated in `x` by
//! `B(x)(Q_x - Q_{x+1}) + D(x)(Q_x - Q_{x-1}) = E Q_x` with `Q_0 = 1`,
//! `Q_{-1} = 0`. Run on the rates of a deleted system with `0` not deleted,
//! it produces the deformed duals whose orthogonality weights are the
//! original ones multiplied by `prod_j (E(n) - E(d_j))`.
//!
//! The inverse (Geronimus) transformation is realized the same way after a
//! redefinition of the parameters; no separate operation is exposed for it.

use serde::Serialize;

use crate::adler::{DeformedPolynomials, DeletedSystem};
use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::params::{GridSpec, NumericPolicy};

/// `Q_x(E)` for `x = 0..b.len()`.
pub fn dual_recurrence(b: &[f64], d: &[f64], e: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let mut q = Vec::with_capacity(n);
    if n == 0 {
        return Ok(q);
    }
    q.push(1.0);
    let mut prev = 0.0;
    for x in 0..n - 1 {
        if b[x] == 0.0 {
            return Err(DqmError::ZeroLeadingCoefficient(x));
        }
        let cur = q[x];
        let next = cur + (d[x] * (cur - prev) - e * cur) / b[x];
        prev = cur;
        q.push(next);
    }
    Ok(q)
}

/// Columns `Q_.(E_k)` for a list of energies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualTable {
    pub energies: Vec<f64>,
    /// `values[x][k] = Q_x(energies[k])`.
    pub values: Vec<Vec<f64>>,
}

impl DualTable {
    pub fn build(b: &[f64], d: &[f64], energies: &[f64]) -> Result<Self> {
        let cols = energies
            .iter()
            .map(|&e| dual_recurrence(b, d, e))
            .collect::<Result<Vec<_>>>()?;
        let values = (0..b.len()).map(|x| cols.iter().map(|c| c[x]).collect()).collect();
        Ok(DualTable {
            energies: energies.to_vec(),
            values,
        })
    }

    /// Rows `x`, columns `E(n)`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for e in &self.energies {
            out.push_str(&format!(",{e:.16e}"));
        }
        out.push('\n');
        for (x, row) in self.values.iter().enumerate() {
            out.push_str(&x.to_string());
            for v in row {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// `max |P_n(eta(x)) - Q_x(E(n))| / max(1, |P_n(eta(x))|)`.
    pub max_deviation: f64,
    /// `max |sum_n d_n^2 Q_x Q_y phi_0(x) phi_0(y) - delta_xy|`.
    pub dual_orthogonality: f64,
    pub pass: bool,
}

/// Duality between the eigenpolynomials and the dual polynomials of the
/// same rates, with the dual orthogonality relation. `d_n^2` comes from
/// direct summation.
pub fn duality_check(spec: &FamilySpec, grid: &GridSpec, policy: &NumericPolicy) -> Result<DualityReport> {
    let x_max = grid.x_max();
    let b: Vec<f64> = (0..=x_max).map(|x| spec.b(x as f64)).collect();
    let d: Vec<f64> = (0..=x_max).map(|x| spec.d(x as f64)).collect();
    let energies: Vec<f64> = (0..=grid.n_max()).map(|n| spec.energy(n)).collect();
    let table = DualTable::build(&b, &d, &energies)?;
    let mut dev = 0.0f64;
    for (x, row) in table.values.iter().enumerate() {
        for (n, q) in row.iter().enumerate() {
            let p = spec.poly(n, x as f64);
            dev = dev.max((p - q).abs() / p.abs().max(1.0));
        }
    }
    let phi0_sq: Vec<f64> = (0..=x_max).map(|x| spec.ground_state_sq(x)).collect();
    let d_sq: Vec<f64> = (0..energies.len())
        .map(|n| {
            1.0 / (0..=x_max)
                .map(|x| phi0_sq[x] * spec.poly(n, x as f64).powi(2))
                .sum::<f64>()
        })
        .collect();
    let mut ortho = 0.0f64;
    if grid.is_finite() {
        for x in 0..=x_max {
            for y in 0..=x_max {
                let s: f64 = (0..energies.len())
                    .map(|n| d_sq[n] * table.values[x][n] * table.values[y][n])
                    .sum();
                let target = if x == y { 1.0 } else { 0.0 };
                ortho = ortho.max((s * (phi0_sq[x] * phi0_sq[y]).sqrt() - target).abs());
            }
        }
    }
    Ok(DualityReport {
        max_deviation: dev,
        dual_orthogonality: ortho,
        pass: dev <= policy.identity_tol && ortho <= 1e-8,
    })
}

/// `(-1)^l prod_j (E(n) - E(d_j)) / E(d_j)`.
pub fn deformed_dual_prefactor(energies: &[f64], deleted: &[usize], n: usize) -> f64 {
    let sign = if deleted.len() % 2 == 0 { 1.0 } else { -1.0 };
    sign * deleted
        .iter()
        .map(|&d| (energies[n] - energies[d]) / energies[d])
        .product::<f64>()
}

#[derive(Clone, Debug, Serialize)]
pub struct DeformedDualityReport {
    pub levels: Vec<usize>,
    /// `(n, p_n)` from the closed product.
    pub prefactors: Vec<(usize, f64)>,
    /// Largest relative gap between the closed `p_n` and `P_n(0)/P_0(0)`.
    pub prefactor_deviation: f64,
    /// `max |P_n/P_0 - p_n Q_x(E(n))|`, relative to `max(1, |p_n Q|)`.
    pub duality_deviation: f64,
    /// `max_x |Q_x(0) - 1|`.
    pub zero_energy_deviation: f64,
    /// Deformed dual orthogonality, normalized to the identity.
    pub orthogonality_deviation: f64,
    pub pass: bool,
}

/// Deformed duality for a deleted system with `mu = 0` and an even number
/// of deleted levels.
pub fn deformed_duality_check(
    ds: &DeletedSystem,
    polys: &DeformedPolynomials,
    policy: &NumericPolicy,
) -> Result<DeformedDualityReport> {
    let levels = ds.deletion.levels.clone();
    if ds.deletion.contains_zero {
        return Err(DqmError::PreconditionViolated("the deleted set contains 0".into()));
    }
    if levels.len() % 2 == 1 {
        return Err(DqmError::PreconditionViolated(format!(
            "deformed duality needs an even number of deleted levels, got {}",
            levels.len()
        )));
    }
    let energies = &ds.original_energies;
    let p0 = polys
        .row(0)
        .ok_or_else(|| DqmError::PreconditionViolated("P_0 missing".into()))?;
    let x_bar = ds.x_max();
    let mut prefactors = Vec::new();
    let mut pre_dev = 0.0f64;
    let mut dual_dev = 0.0f64;
    let mut cols = Vec::new();
    for &n in &ds.levels {
        let pn_table = match polys.row(n) {
            Some(r) => r,
            None => continue,
        };
        let p_n = deformed_dual_prefactor(energies, &levels, n);
        prefactors.push((n, p_n));
        pre_dev = pre_dev.max((pn_table[0] / p0[0] - p_n).abs() / p_n.abs().max(1.0));
        let q = dual_recurrence(&ds.b_bar, &ds.d_bar, energies[n])?;
        for x in 0..=x_bar {
            let lhs = pn_table[x] / p0[x];
            let rhs = p_n * q[x];
            dual_dev = dual_dev.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
        cols.push((n, q));
    }
    let q0 = dual_recurrence(&ds.b_bar, &ds.d_bar, 0.0)?;
    let zero_dev = q0.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ortho = deformed_orthogonality(ds, &cols)?;
    let pass = pre_dev <= 1e-8 && dual_dev <= 1e-8 && zero_dev <= policy.identity_tol && ortho <= 1e-8;
    Ok(DeformedDualityReport {
        levels,
        prefactors,
        prefactor_deviation: pre_dev,
        duality_deviation: dual_dev,
        zero_energy_deviation: zero_dev,
        orthogonality_deviation: ortho,
        pass,
    })
}

/// `sum_{n not in D} d_n^2 prod_j(E(n)-E(d_j)) Q_x Q_y` against
/// `prod_j E(d_j)^2 / phi_bar_0(x)^2 delta_xy`, scaled to the identity.
fn deformed_orthogonality(ds: &DeletedSystem, cols: &[(usize, Vec<f64>)]) -> Result<f64> {
    let phi0 = ds
        .phi(0)
        .ok_or_else(|| DqmError::PreconditionViolated("phi_bar_0 missing".into()))?;
    let e = &ds.original_energies;
    let edsq: f64 = ds.deletion.levels.iter().map(|&d| e[d] * e[d]).product();
    let weights: Vec<f64> = cols
        .iter()
        .map(|(n, _)| ds.original_d_sq[*n] * ds.weight_factor(*n))
        .collect();
    let x_bar = ds.x_max();
    let mut dev = 0.0f64;
    for x in 0..=x_bar {
        for y in 0..=x_bar {
            let s: f64 = cols.iter().zip(&weights).map(|((_, q), w)| w * q[x] * q[y]).sum();
            let scaled = s * phi0[x] * phi0[y] / edsq;
            let target = if x == y { 1.0 } else { 0.0 };
            dev = dev.max((scaled - target).abs());
        }
    }
    Ok(dev)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightEntry {
    pub n: usize,
    pub d_sq: f64,
    pub factor: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightTransformationReport {
    pub weights: Vec<WeightEntry>,
    pub all_positive: bool,
    pub orthogonality_deviation: f64,
}

/// New dual weights `d_n^2 prod_j (E(n) - E(d_j))`, confirmed by recomputing
/// the deformed dual orthogonality.
pub fn weight_transformation_report(ds: &DeletedSystem) -> Result<WeightTransformationReport> {
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    for &n in &ds.levels {
        let factor = ds.weight_factor(n);
        let d_sq = ds.original_d_sq[n];
        weights.push(WeightEntry {
            n,
            d_sq,
            factor,
            weight: d_sq * factor,
        });
        cols.push((n, dual_recurrence(&ds.b_bar, &ds.d_bar, ds.original_energies[n])?));
    }
    let orthogonality_deviation = if ds.deletion.contains_zero {
        f64::NAN
    } else {
        deformed_orthogonality(ds, &cols)?
    };
    Ok(WeightTransformationReport {
        all_positive: weights.iter().all(|w| w.weight > 0.0),
        weights,
        orthogonality_deviation,
    })
}

/// Kernel polynomial `(P_{n+1}(y) - A_n P_n(y)) / (y - a)` with
/// `A_n = P_{n+1}(a) / P_n(a)`, evaluated at `ys`. At `y = a` the removable
/// singularity is resolved by a symmetric difference quotient.
pub fn elementary_christoffel(p: &dyn Fn(usize, f64) -> f64, a: f64, n: usize, ys: &[f64]) -> Result<Vec<f64>> {
    let pa = p(n, a);
    if pa == 0.0 {
        return Err(DqmError::NodeZero { n });
    }
    let an = p(n + 1, a) / pa;
    let num = |y: f64| p(n + 1, y) - an * p(n, y);
    let h = 1e-4 * a.abs().max(1.0);
    Ok(ys
        .iter()
        .map(|&y| {
            if (y - a).abs() <= h {
                (num(a + h) - num(a - h)) / (2.0 * h)
            } else {
                num(y) / (y - a)
            }
        })
        .collect())
}

/// Successive elementary transformations at `nodes`, yielding the
/// polynomial of degree `n` orthogonal for the weight multiplied by
/// `prod (y - a_j)`.
pub fn christoffel_chain(p: &dyn Fn(usize, f64) -> f64, nodes: &[f64], n: usize, y: f64) -> Result<f64> {
    match nodes.split_last() {
        None => Ok(p(n, y)),
        Some((&a, rest)) => {
            let inner = |m: usize, z: f64| christoffel_chain(p, rest, m, z).unwrap_or(f64::NAN);
            let v = elementary_christoffel(&inner, a, n, &[y])?[0];
            if v.is_nan() {
                return Err(DqmError::NodeZero { n });
            }
            Ok(v)
        }
    }
}
