//! Krein-Adler deletion of an admissible set of eigenlevels.
//!
//! Three constructions of the deleted ("barred") system are provided and
//! are expected to agree:
//!
//! - [`adler_chain`] deletes the levels one at a time. Intermediate systems
//!   may be non-hermitian, so the chain works in a real gauge where only
//!   the products `B(x) D(x+1)` enter and no square root is taken until the
//!   final stage.
//! - [`barred_system_casoratian`] evaluates the Casoratian formulas in the
//!   eigenfunctions directly.
//! - [`polynomial_fast_path`] uses Casoratians of the eigenpolynomials, which
//!   never see the zeros of the ground state outside the grid.

use serde::Serialize;

use crate::casorati::{casoratian_by, varphi_ell};
use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::hamiltonian::{ground_state, JacobiSystem};
use crate::linalg::fitted_degree;
use crate::params::{GridSpec, NumericPolicy};

/// A set of levels to delete, in the order given and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeletionSet {
    pub levels: Vec<usize>,
    pub order: Vec<usize>,
    pub admissible: bool,
    pub mu: usize,
    pub contains_zero: bool,
}

/// `prod_j (m - d_j) >= 0` for every `m >= 0`. Checking `m <= max + 1`
/// suffices since the sign is constant beyond the largest level.
pub fn is_admissible(levels: &[usize]) -> bool {
    let top = levels.iter().copied().max().unwrap_or(0);
    (0..=top + 1).all(|m| {
        let neg = levels.iter().filter(|&&d| m < d).count();
        levels.contains(&m) || neg % 2 == 0
    })
}

/// Checks level range and distinctness; admissibility is recorded, not
/// enforced.
pub fn validate_deletion(levels: &[usize], n_max: usize) -> Result<DeletionSet> {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(DqmError::PreconditionViolated(format!("level {} repeated", w[0])));
    }
    if let Some(&level) = sorted.iter().find(|&&l| l > n_max) {
        return Err(DqmError::LevelOutOfRange { level, n_max });
    }
    let mu = (0..=n_max)
        .find(|n| !sorted.contains(n))
        .ok_or_else(|| DqmError::PreconditionViolated("every level deleted".into()))?;
    Ok(DeletionSet {
        admissible: is_admissible(&sorted),
        contains_zero: sorted.first() == Some(&0),
        levels: sorted,
        order: levels.to_vec(),
        mu,
    })
}

impl DeletionSet {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `sum_j d_j`.
    pub fn total(&self) -> usize {
        self.levels.iter().sum()
    }

    /// Same set, deleted in another order.
    pub fn reordered(&self, order: &[usize]) -> Self {
        let mut s = self.clone();
        s.order = order.to_vec();
        s
    }

    fn require_admissible(&self, allow_unsafe: bool) -> Result<()> {
        if self.admissible || allow_unsafe {
            Ok(())
        } else {
            Err(DqmError::Inadmissible {
                levels: self.levels.clone(),
            })
        }
    }
}

/// Rates and eigenfunctions `phi_n = phi_0 P_n` of an undeleted system.
#[derive(Clone, Debug)]
pub struct EigenTables {
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub energies: Vec<f64>,
    /// `phi[n][x]` on `[0, x_max]`.
    pub phi: Vec<Vec<f64>>,
}

impl EigenTables {
    pub fn from_family(spec: &FamilySpec, grid: &GridSpec) -> Self {
        let x_max = grid.x_max();
        let g = ground_state(spec, grid);
        let phi = (0..=grid.n_max())
            .map(|n| (0..=x_max).map(|x| g.values[x] * spec.poly(n, x as f64)).collect())
            .collect();
        EigenTables {
            b: (0..=x_max).map(|x| spec.b(x as f64)).collect(),
            d: (0..=x_max).map(|x| spec.d(x as f64)).collect(),
            energies: (0..=grid.n_max()).map(|n| spec.energy(n)).collect(),
            phi,
        }
    }

    pub fn x_max(&self) -> usize {
        self.b.len() - 1
    }

    /// `d_n^2 = 1 / sum_x phi_n(x)^2`.
    pub fn d_sq(&self) -> Vec<f64> {
        self.phi
            .iter()
            .map(|p| 1.0 / p.iter().map(|v| v * v).sum::<f64>())
            .collect()
    }

    fn phi_ext(&self, n: usize, x: i64) -> f64 {
        if x < 0 || x as usize > self.x_max() {
            0.0
        } else {
            self.phi[n][x as usize]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Stepwise,
    Casoratian,
    PolynomialFastPath,
    Special,
}

/// The system left after deleting a level set.
#[derive(Clone, Debug, Serialize)]
pub struct DeletedSystem {
    pub deletion: DeletionSet,
    pub route: Route,
    pub b_bar: Vec<f64>,
    pub d_bar: Vec<f64>,
    /// `E(mu)`, the constant in `H_bar = A_bar^T A_bar + E(mu)`.
    pub energy_offset: f64,
    /// Surviving levels, ascending.
    pub levels: Vec<usize>,
    /// `phi_bar[i]` belongs to `levels[i]`.
    pub phi_bar: Vec<Vec<f64>>,
    pub original_energies: Vec<f64>,
    pub original_d_sq: Vec<f64>,
    /// `prod_k B_{d_1..d_k}(x)`: accumulated from the chain on the stepwise
    /// route, from the Casoratian product formula on the Casoratian route.
    pub step_products: Option<Vec<f64>>,
}

impl DeletedSystem {
    pub fn x_max(&self) -> usize {
        self.b_bar.len() - 1
    }

    pub fn phi(&self, n: usize) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == n)
            .map(|i| self.phi_bar[i].as_slice())
    }

    /// `prod_j (E(n) - E(d_j))`.
    pub fn weight_factor(&self, n: usize) -> f64 {
        let e = &self.original_energies;
        self.deletion.levels.iter().map(|&d| e[n] - e[d]).product()
    }

    /// Expected `(phi_bar_n, phi_bar_n) = prod_j (E(n) - E(d_j)) / d_n^2`.
    pub fn norm_factor(&self, n: usize) -> f64 {
        self.weight_factor(n) / self.original_d_sq[n]
    }

    pub fn hamiltonian(&self, policy: &NumericPolicy) -> Result<JacobiSystem> {
        JacobiSystem::from_potentials(self.b_bar.clone(), self.d_bar.clone(), self.energy_offset, policy)
    }

    /// `max |H_bar phi_bar_n - E(n) phi_bar_n|` relative to
    /// `max(1, E(n)) max |phi_bar_n|`.
    pub fn eigen_residual(&self, policy: &NumericPolicy) -> Result<f64> {
        self.eigen_residual_upto(policy, self.levels.len())
    }

    /// [`Self::eigen_residual`] over the lowest `keep` surviving levels.
    pub fn eigen_residual_upto(&self, policy: &NumericPolicy, keep: usize) -> Result<f64> {
        let h = self.hamiltonian(policy)?;
        let mut worst = 0.0f64;
        for (i, &n) in self.levels.iter().enumerate().take(keep) {
            let v = &self.phi_bar[i];
            let hv = h.apply(v);
            let e = self.original_energies[n];
            let scale = e.abs().max(1.0) * v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            for (a, b) in hv.iter().zip(v) {
                worst = worst.max((a - e * b).abs() / scale);
            }
        }
        Ok(worst)
    }

    /// Gram matrix of the `phi_bar` against `diag(norm_factor)`, normalized
    /// to the identity.
    pub fn orthogonality_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &n) in self.levels.iter().enumerate() {
            for (j, &m) in self.levels.iter().enumerate() {
                let g: f64 = self.phi_bar[i].iter().zip(&self.phi_bar[j]).map(|(a, b)| a * b).sum();
                let scale = (self.norm_factor(n) * self.norm_factor(m)).abs().sqrt();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g / scale - target).abs());
            }
        }
        worst
    }

    /// Eigenvalues of `H_bar` against `{E(n) : n not in D}`.
    pub fn spectrum_deviation(&self, policy: &NumericPolicy) -> Result<f64> {
        self.spectrum_deviation_upto(policy, self.levels.len())
    }

    /// [`Self::spectrum_deviation`] over the lowest `keep` eigenvalues.
    pub fn spectrum_deviation_upto(&self, policy: &NumericPolicy, keep: usize) -> Result<f64> {
        let h = self.hamiltonian(policy)?;
        let eig = h.eigensystem()?;
        let expected: Vec<f64> = self.levels.iter().map(|&n| self.original_energies[n]).collect();
        if eig.values.len() != expected.len() {
            return Ok(f64::INFINITY);
        }
        Ok(eig
            .values
            .iter()
            .zip(&expected)
            .take(keep)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max))
    }

    /// Largest relative difference of `B_bar`, `D_bar` to another system.
    pub fn potential_deviation(&self, other: &DeletedSystem) -> f64 {
        rel_dev(&self.b_bar, &other.b_bar).max(rel_dev(&self.d_bar, &other.d_bar))
    }

    /// Largest relative difference of the shared eigenfunctions.
    pub fn eigenfunction_deviation(&self, other: &DeletedSystem) -> f64 {
        self.eigenfunction_deviation_upto(other, self.levels.len())
    }

    /// [`Self::eigenfunction_deviation`] over the lowest `keep` levels.
    pub fn eigenfunction_deviation_upto(&self, other: &DeletedSystem, keep: usize) -> f64 {
        let mut worst = 0.0f64;
        for (i, &n) in self.levels.iter().enumerate().take(keep) {
            if let Some(o) = other.phi(n) {
                let scale = self.phi_bar[i].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                for (a, b) in self.phi_bar[i].iter().zip(o) {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        worst
    }
}

/// `max |a - b| / max(1, |b|)`, infinite on a length mismatch.
pub(crate) fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Options for the stepwise construction.
#[derive(Clone, Copy, Debug, Default)]
pub struct ChainOptions {
    /// Run inadmissible sets anyway, to demonstrate the failure modes.
    pub allow_inadmissible: bool,
}

/// Stepwise deletion in the order `set.order`.
///
/// In the gauge `u_n = phi_n sqrt(prod_{y<x} B(y) D(y+1))` the current
/// Hamiltonian acts as `a(x) u(x) - u(x+1) - pi(x-1) u(x-1)`. Deleting the
/// level with function `u` uses `beta(x) = u(x+1)/u(x)` (the signed
/// `B_{d_1..d_s}`) and `delta(x) = pi(x-1) u(x-1)/u(x)`, maps every
/// surviving `u_n` to `beta u_n - u_n(.+1)` and sets
/// `pi'(x) = beta(x+1) delta(x+1)`. The final factorization at `mu` gives
/// `B_bar = beta`, `D_bar = delta`.
pub fn adler_chain(tables: &EigenTables, set: &DeletionSet, opts: ChainOptions) -> Result<DeletedSystem> {
    set.require_admissible(opts.allow_inadmissible)?;
    let x_max = tables.x_max();
    if set.len() > x_max {
        return Err(DqmError::PreconditionViolated(format!(
            "cannot delete {} levels from a grid of {} sites",
            set.len(),
            x_max + 1
        )));
    }
    let mut top = x_max;
    let mut pi: Vec<f64> = (0..top).map(|x| tables.b[x] * tables.d[x + 1]).collect();
    let mut log_g = 0.0f64;
    let mut gauge = vec![1.0];
    for p in &pi {
        log_g += 0.5 * p.ln();
        gauge.push(log_g.exp());
    }
    let mut u: Vec<(usize, Vec<f64>)> = (0..tables.phi.len())
        .map(|n| (n, tables.phi[n].iter().zip(&gauge).map(|(p, g)| p * g).collect()))
        .collect();
    let mut norm = 1.0f64;
    let mut products = vec![1.0; x_max + 1 - set.len()];
    let factor = |ud: &[f64], pi: &[f64], top: usize, step: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(x) = ud.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(DqmError::IntermediateBreakdown { step, x });
        }
        let mut beta: Vec<f64> = (0..top).map(|x| ud[x + 1] / ud[x]).collect();
        beta.push(0.0);
        let mut delta = vec![0.0];
        delta.extend((1..=top).map(|x| pi[x - 1] * ud[x - 1] / ud[x]));
        Ok((beta, delta))
    };
    for (step, &d) in set.order.iter().enumerate() {
        let ud = &u
            .iter()
            .find(|(n, _)| *n == d)
            .ok_or(DqmError::LevelOutOfRange {
                level: d,
                n_max: tables.phi.len() - 1,
            })?
            .1;
        let (beta, delta) = factor(ud, &pi, top, step + 1)?;
        for (x, p) in products.iter_mut().enumerate() {
            *p *= beta[x];
        }
        u = u
            .into_iter()
            .filter(|(n, _)| *n != d)
            .map(|(n, v)| (n, (0..top).map(|x| beta[x] * v[x] - v[x + 1]).collect()))
            .collect();
        norm /= beta[0];
        top -= 1;
        pi = (0..top).map(|x| beta[x + 1] * delta[x + 1]).collect();
    }
    let u_mu = &u
        .iter()
        .find(|(n, _)| *n == set.mu)
        .expect("mu survives the deletion")
        .1;
    let (b_bar, d_bar) = factor(u_mu, &pi, top, set.len() + 1)?;
    let mut log_inv = 0.0f64;
    let mut inv_gauge = vec![1.0];
    for p in &pi {
        log_inv -= 0.5 * p.abs().ln();
        inv_gauge.push(log_inv.exp());
    }
    let scale = norm.abs().sqrt();
    let mut levels = Vec::new();
    let mut phi_bar = Vec::new();
    for (n, v) in u {
        levels.push(n);
        phi_bar.push(v.iter().zip(&inv_gauge).map(|(a, g)| a * g * scale).collect());
    }
    Ok(DeletedSystem {
        deletion: set.clone(),
        route: Route::Stepwise,
        b_bar,
        d_bar,
        energy_offset: tables.energies[set.mu],
        levels,
        phi_bar,
        original_energies: tables.energies.clone(),
        original_d_sq: tables.d_sq(),
        step_products: Some(products),
    })
}

/// Casoratian formulas in the eigenfunctions, with `phi = 0` outside the
/// grid.
pub fn barred_system_casoratian(tables: &EigenTables, set: &DeletionSet) -> Result<DeletedSystem> {
    set.require_admissible(false)?;
    let l = set.len();
    let x_max = tables.x_max();
    let x_bar = x_max - l;
    let dl = &set.levels;
    let w = |fs: &[usize], x: i64| casoratian_by(fs.len(), x, |k, y| tables.phi_ext(fs[k], y));
    let with = |n: usize| {
        let mut v = dl.clone();
        v.push(n);
        v
    };
    let wd: Vec<f64> = (0..=x_bar as i64 + 1).map(|x| w(dl, x)).collect();
    if let Some(x) = wd.iter().position(|v| *v == 0.0) {
        return Err(DqmError::ZeroDenominator(x as i64));
    }
    let mu_set = with(set.mu);
    let wmu: Vec<f64> = (-1..=x_bar as i64 + 1).map(|x| w(&mu_set, x)).collect();
    let wmu_at = |x: i64| wmu[(x + 1) as usize];
    let (b, d) = (&tables.b, &tables.d);
    let mut b_bar = Vec::with_capacity(x_bar + 1);
    let mut d_bar = Vec::with_capacity(x_bar + 1);
    for x in 0..=x_bar {
        if wmu_at(x as i64) == 0.0 {
            return Err(DqmError::ZeroDenominator(x as i64));
        }
        let d_next = if x + l < x_max { d[x + l + 1] } else { 0.0 };
        b_bar.push((b[x + l] * d_next).sqrt() * wd[x] / wd[x + 1] * wmu_at(x as i64 + 1) / wmu_at(x as i64));
        d_bar.push(if x == 0 {
            0.0
        } else {
            (b[x - 1] * d[x]).sqrt() * wd[x + 1] / wd[x] * wmu_at(x as i64 - 1) / wmu_at(x as i64)
        });
    }
    let pre = |x: usize| (1..=l).map(|k| b[x + k - 1] * d[x + k]).product::<f64>();
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let mut levels = Vec::new();
    let mut phi_bar = Vec::new();
    for n in 0..tables.phi.len() {
        if dl.contains(&n) {
            continue;
        }
        let set_n = with(n);
        let row = (0..=x_bar)
            .map(|x| sign * pre(x).powf(0.25) * (wd[x + 1] / wd[x]).sqrt() * w(&set_n, x as i64) / wd[x + 1])
            .collect();
        levels.push(n);
        phi_bar.push(row);
    }
    let products = (0..=x_bar).map(|x| pre(x).sqrt() * wd[x + 1] / wd[x]).collect();
    Ok(DeletedSystem {
        deletion: set.clone(),
        route: Route::Casoratian,
        b_bar,
        d_bar,
        energy_offset: tables.energies[set.mu],
        levels,
        phi_bar,
        original_energies: tables.energies.clone(),
        original_d_sq: tables.d_sq(),
        step_products: Some(products),
    })
}

/// Casoratians of the eigenpolynomials, `W_P[levels](x)`.
pub fn polynomial_casoratian(spec: &FamilySpec, levels: &[usize], x: i64) -> f64 {
    casoratian_by(levels.len(), x, |k, y| spec.poly(levels[k], y as f64))
}

/// Deleted system from polynomial Casoratians:
/// `B_bar = B(x+l) W(x)/W(x+1) W_mu(x+1)/W_mu(x)`,
/// `D_bar = D(x) W(x+1)/W(x) W_mu(x-1)/W_mu(x)` and
/// `phi_bar_n = (-1)^l phi_0 sqrt(prod_k B(x+k-1)) W[D,n] / sqrt(W(x)W(x+1))`,
/// the last carrying the sign of `W` so that it reproduces the eigenfunction
/// route when `W[P_D] < 0`.
pub fn polynomial_fast_path(spec: &FamilySpec, grid: &GridSpec, set: &DeletionSet) -> Result<DeletedSystem> {
    set.require_admissible(false)?;
    let l = set.len();
    let x_max = grid.x_max();
    let x_bar = x_max - l;
    let dl = &set.levels;
    let with = |n: usize| {
        let mut v = dl.clone();
        v.push(n);
        v
    };
    let wp: Vec<f64> = (0..=x_bar as i64 + 1)
        .map(|x| polynomial_casoratian(spec, dl, x))
        .collect();
    for (x, v) in wp.iter().enumerate() {
        if *v == 0.0 {
            return Err(DqmError::ZeroDenominator(x as i64));
        }
    }
    for x in 0..=x_bar {
        let p = wp[x] * wp[x + 1];
        if !(p > 0.0) {
            return Err(DqmError::PositivityFailure { x, value: p });
        }
    }
    let mu_set = with(set.mu);
    let wmu: Vec<f64> = (-1..=x_bar as i64 + 1)
        .map(|x| polynomial_casoratian(spec, &mu_set, x))
        .collect();
    let wmu_at = |x: i64| wmu[(x + 1) as usize];
    let mut b_bar = Vec::with_capacity(x_bar + 1);
    let mut d_bar = Vec::with_capacity(x_bar + 1);
    for x in 0..=x_bar {
        let xi = x as i64;
        b_bar.push(spec.b((x + l) as f64) * wp[x] / wp[x + 1] * wmu_at(xi + 1) / wmu_at(xi));
        d_bar.push(if x == 0 {
            0.0
        } else {
            spec.d(x as f64) * wp[x + 1] / wp[x] * wmu_at(xi - 1) / wmu_at(xi)
        });
    }
    if grid.is_finite() {
        b_bar[x_bar] = 0.0;
    }
    let phi0 = ground_state(spec, grid);
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let wsign = wp[0].signum();
    let mut levels = Vec::new();
    let mut phi_bar = Vec::new();
    for n in 0..=grid.n_max() {
        if dl.contains(&n) {
            continue;
        }
        let set_n = with(n);
        let row = (0..=x_bar)
            .map(|x| {
                let pre: f64 = (1..=l).map(|k| spec.b((x + k - 1) as f64)).product();
                sign * wsign * phi0.values[x] * pre.sqrt() * polynomial_casoratian(spec, &set_n, x as i64)
                    / (wp[x] * wp[x + 1]).sqrt()
            })
            .collect();
        levels.push(n);
        phi_bar.push(row);
    }
    let tables_energies: Vec<f64> = (0..=grid.n_max()).map(|n| spec.energy(n)).collect();
    let d_sq = direct_d_sq(spec, grid);
    Ok(DeletedSystem {
        deletion: set.clone(),
        route: Route::PolynomialFastPath,
        b_bar,
        d_bar,
        energy_offset: tables_energies[set.mu],
        levels,
        phi_bar,
        original_energies: tables_energies,
        original_d_sq: d_sq,
        step_products: None,
    })
}

/// `d_n^2` by direct summation of `phi_0^2 P_n^2`.
pub fn direct_d_sq(spec: &FamilySpec, grid: &GridSpec) -> Vec<f64> {
    let w: Vec<f64> = (0..=grid.x_max()).map(|x| spec.ground_state_sq(x)).collect();
    (0..=grid.n_max())
        .map(|n| {
            1.0 / w
                .iter()
                .enumerate()
                .map(|(x, w)| w * spec.poly(n, x as f64).powi(2))
                .sum::<f64>()
        })
        .collect()
}

/// The deforming polynomial, the deformed eigenpolynomials and the deformed
/// weight of a deleted system.
#[derive(Clone, Debug, Serialize)]
pub struct DeformedPolynomials {
    /// `W[P_D](x) / varphi_l(x)` on `[0, x_bar + 1]`, a polynomial in
    /// `eta(x; lambda + (l-1) delta)`.
    pub deformer: Vec<f64>,
    pub deformer_degree: usize,
    /// Sign-definiteness of the deformer on `[0, x_bar + 1]`.
    pub deformer_sign_definite: bool,
    pub levels: Vec<usize>,
    /// `W[P_D, P_n](x) / varphi_{l+1}(x)` on `[0, x_bar]`, polynomials in
    /// `eta(x; lambda + l delta)`.
    pub rows: Vec<Vec<f64>>,
    pub row_degrees: Vec<usize>,
    /// `psi_bar = phi_bar_mu / P_mu`.
    pub psi_bar: Vec<f64>,
    /// Orthogonality of the rows under `psi_bar^2`, normalized to the
    /// identity.
    pub orthogonality_deviation: f64,
}

impl DeformedPolynomials {
    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == n)
            .map(|i| self.rows[i].as_slice())
    }
}

const DEGREE_TOL: f64 = 1e-8;
const MAX_CHECKED_DEGREE: usize = 6;

fn check_degree(spec: &FamilySpec, shift: usize, expected: usize, f: &dyn Fn(i64) -> f64) -> Result<()> {
    if expected > MAX_CHECKED_DEGREE {
        return Ok(());
    }
    let count = expected + 4;
    let xs: Vec<f64> = (0..count).map(|x| spec.eta_shifted(x as f64, shift)).collect();
    let ys: Vec<f64> = (0..count as i64).map(f).collect();
    match fitted_degree(&xs, &ys, DEGREE_TOL) {
        Some(fitted) if fitted != expected => Err(DqmError::DegreeMismatch { expected, fitted }),
        _ => Ok(()),
    }
}

/// Deformed polynomials for `levels` (surviving levels, `mu` included),
/// with their degrees checked by least-squares fits in the appropriate
/// sinusoidal coordinate and their orthogonality under `psi_bar^2`.
pub fn deformed_polynomials(
    spec: &FamilySpec,
    grid: &GridSpec,
    set: &DeletionSet,
    levels: &[usize],
) -> Result<DeformedPolynomials> {
    let l = set.len();
    let x_bar = grid.x_max() - l;
    let dl = &set.levels;
    let with = |n: usize| {
        let mut v = dl.clone();
        v.push(n);
        v
    };
    let deformer_at = |x: i64| polynomial_casoratian(spec, dl, x) / varphi_ell(spec, l, x as f64);
    let row_at = |n: usize, x: i64| polynomial_casoratian(spec, &with(n), x) / varphi_ell(spec, l + 1, x as f64);
    let deformer_degree = set.total() - l * l.saturating_sub(1) / 2;
    if l > 0 {
        check_degree(spec, l - 1, deformer_degree, &deformer_at)?;
    }
    let deformer: Vec<f64> = (0..=x_bar as i64 + 1).map(deformer_at).collect();
    let deformer_sign_definite = deformer.iter().all(|v| *v > 0.0) || deformer.iter().all(|v| *v < 0.0);
    let mut rows = Vec::new();
    let mut row_degrees = Vec::new();
    for &n in levels {
        let expected = set.total() + n - l * (l + 1) / 2;
        check_degree(spec, l, expected, &|x| row_at(n, x))?;
        rows.push((0..=x_bar as i64).map(|x| row_at(n, x)).collect::<Vec<f64>>());
        row_degrees.push(expected);
    }
    let fast = polynomial_fast_path(spec, grid, set)?;
    let phi_mu = fast.phi(set.mu).expect("mu survives");
    let p_mu: Vec<f64> = (0..=x_bar as i64).map(|x| row_at(set.mu, x)).collect();
    let psi_bar: Vec<f64> = phi_mu.iter().zip(&p_mu).map(|(a, b)| a / b).collect();
    let mut ortho = 0.0f64;
    for (i, &n) in levels.iter().enumerate() {
        for (j, &m) in levels.iter().enumerate() {
            let s: f64 = (0..=x_bar).map(|x| psi_bar[x].powi(2) * rows[i][x] * rows[j][x]).sum();
            let scale = (fast.norm_factor(n) * fast.norm_factor(m)).abs().sqrt();
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((s / scale - target).abs());
        }
    }
    Ok(DeformedPolynomials {
        deformer,
        deformer_degree,
        deformer_sign_definite,
        levels: levels.to_vec(),
        rows,
        row_degrees,
        psi_bar,
        orthogonality_deviation: ortho,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HermiticityReport {
    /// A negative `B_bar(x) D_bar(x+1)` forces an off-diagonal pair of
    /// opposite sign in any real realization; this is twice the largest such
    /// magnitude (zero when hermitian).
    pub asymmetry: f64,
    pub min_b: f64,
    pub min_d: f64,
    pub min_product: f64,
    pub eigenfunctions_real: bool,
    pub pass: bool,
}

/// Hermiticity and positivity margins of a deleted system.
pub fn hermiticity_report(ds: &DeletedSystem, policy: &NumericPolicy) -> HermiticityReport {
    let x_bar = ds.x_max();
    let min_b = ds.b_bar[..x_bar].iter().copied().fold(f64::INFINITY, f64::min);
    let min_d = ds.d_bar[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let products: Vec<f64> = (0..x_bar).map(|x| ds.b_bar[x] * ds.d_bar[x + 1]).collect();
    let min_product = products.iter().copied().fold(f64::INFINITY, f64::min);
    let asymmetry = products
        .iter()
        .filter(|p| **p < 0.0)
        .map(|p| 2.0 * p.abs().sqrt())
        .fold(0.0, f64::max);
    let eigenfunctions_real = ds.phi_bar.iter().flatten().all(|v| v.is_finite());
    let tol = policy.identity_tol;
    HermiticityReport {
        asymmetry,
        min_b,
        min_d,
        min_product,
        eigenfunctions_real,
        pass: asymmetry <= tol && min_b > 0.0 && min_d > 0.0 && eigenfunctions_real,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeletionReport {
    pub family: String,
    pub lambda: Vec<f64>,
    pub levels: Vec<usize>,
    pub admissible: bool,
    pub route: Route,
    pub spectrum_before: Vec<f64>,
    pub spectrum_after: Option<Vec<f64>>,
    pub max_residual: f64,
    pub hermiticity: HermiticityReport,
    pub norm_factors: Vec<(usize, f64)>,
}

/// Stepwise deletion followed by eigensolves before and after. On a
/// truncated grid only the resolved levels enter the residual.
pub fn deletion_report(
    spec: &FamilySpec,
    grid: &GridSpec,
    set: &DeletionSet,
    opts: ChainOptions,
    policy: &NumericPolicy,
) -> Result<DeletionReport> {
    let tables = EigenTables::from_family(spec, grid);
    let before = JacobiSystem::build(spec, grid, policy)?.eigensystem()?.values.clone();
    // An exact node of an intermediate eigenfunction stops the chain; the
    // Casoratian route does not divide by it.
    let ds = match adler_chain(&tables, set, opts) {
        Err(DqmError::IntermediateBreakdown { .. }) if set.admissible => barred_system_casoratian(&tables, set)?,
        other => other?,
    };
    let hermiticity = hermiticity_report(&ds, policy);
    let (after, residual) = if hermiticity.pass {
        let h = ds.hamiltonian(policy)?;
        let vals = h.eigensystem()?.values.clone();
        // Truncation only resolves the low-lying part of the spectrum.
        let keep = if grid.is_finite() {
            ds.levels.len()
        } else {
            grid.resolved_levels().saturating_sub(set.len()).min(ds.levels.len())
        };
        let res = ds
            .spectrum_deviation_upto(policy, keep)?
            .max(ds.eigen_residual_upto(policy, keep)?);
        (Some(vals), res)
    } else {
        (None, f64::NAN)
    };
    Ok(DeletionReport {
        family: spec.id().to_string(),
        lambda: spec.params().values(),
        levels: set.levels.clone(),
        admissible: set.admissible,
        route: ds.route,
        spectrum_before: before,
        spectrum_after: after,
        max_residual: residual,
        hermiticity,
        norm_factors: ds.levels.iter().map(|&n| (n, ds.norm_factor(n))).collect(),
    })
}
