use serde::Serialize;

use super::FamilySpec;
use crate::christoffel::dual_recurrence;
use crate::error::{DqmError, Result};
use crate::params::{GridSpec, NumericPolicy};

/// `B` and `D` sampled on the extended grid `[-1, x_max + extra + 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PotentialPair {
    pub x_lo: i64,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
}

impl PotentialPair {
    pub fn b_at(&self, x: i64) -> f64 {
        self.b[(x - self.x_lo) as usize]
    }

    pub fn d_at(&self, x: i64) -> f64 {
        self.d[(x - self.x_lo) as usize]
    }

    /// Restriction to `[0, x_max]`.
    pub fn on_grid(&self, x_max: usize) -> (Vec<f64>, Vec<f64>) {
        let lo = (-self.x_lo) as usize;
        (self.b[lo..=lo + x_max].to_vec(), self.d[lo..=lo + x_max].to_vec())
    }
}

/// Samples `B` and `D` on `[-1, x_max + extra + 1]`. Points outside the
/// physical grid carry the values of the closed forms there.
pub fn eval_potentials(spec: &FamilySpec, grid: &GridSpec, extra: usize) -> Result<PotentialPair> {
    let hi = (grid.x_max() + extra + 1) as i64;
    let mut b = Vec::new();
    let mut d = Vec::new();
    for x in -1..=hi {
        let (bx, dx) = (spec.b(x as f64), spec.d(x as f64));
        if !bx.is_finite() || !dx.is_finite() {
            return Err(DqmError::EvaluationSingularity(x));
        }
        b.push(bx);
        d.push(dx);
    }
    Ok(PotentialPair { x_lo: -1, b, d })
}

/// Values `P_n(eta(x))` for a set of levels on `[0, x_max]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialTable {
    pub levels: Vec<usize>,
    /// `values[i][x]` for level `levels[i]`.
    pub values: Vec<Vec<f64>>,
    /// Largest `|P_n(0) - 1|` over the table.
    pub normalization_residual: f64,
    /// Largest relative deviation from the series evaluator.
    pub series_deviation: f64,
}

impl PolynomialTable {
    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == n)
            .map(|i| self.values[i].as_slice())
    }
}

/// Builds the table from the dual three-term recurrence run in `x` at
/// `E = E(n)` and cross-checks it against the hypergeometric series.
/// The polynomial is the minimal solution of that recurrence, so on long
/// truncated grids the forward run loses accuracy geometrically.
pub fn polynomial_table(
    spec: &FamilySpec,
    levels: &[usize],
    grid: &GridSpec,
    policy: &NumericPolicy,
) -> Result<PolynomialTable> {
    let x_max = grid.x_max();
    let b: Vec<f64> = (0..=x_max).map(|x| spec.b(x as f64)).collect();
    let d: Vec<f64> = (0..=x_max).map(|x| spec.d(x as f64)).collect();
    let mut values = Vec::with_capacity(levels.len());
    let mut norm_res = 0.0f64;
    let mut series_dev = 0.0f64;
    for &n in levels {
        let row = dual_recurrence(&b, &d, spec.energy(n))?;
        norm_res = norm_res.max((row[0] - 1.0).abs());
        for (x, v) in row.iter().enumerate() {
            let s = spec.poly(n, x as f64);
            series_dev = series_dev.max((v - s).abs() / s.abs().max(1.0));
        }
        values.push(row);
    }
    if norm_res > policy.identity_tol {
        return Err(DqmError::PreconditionViolated(format!(
            "P_n(0) = 1 fails by {norm_res:e}"
        )));
    }
    Ok(PolynomialTable {
        levels: levels.to_vec(),
        values,
        normalization_residual: norm_res,
        series_deviation: series_dev,
    })
}
