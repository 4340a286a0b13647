//! Deletion of the contiguous block `D = {1, ..., l}`.
//!
//! For this set the deforming polynomial `xi_l` has a closed form and the
//! deleted system is itself built from the shifted family `lambda + l delta`:
//!
//! - `B_l(x) = kappa^l B(x; lambda + l delta) xi_l(x) / xi_l(x+1)`
//! - `D_l(x) = kappa^l D(x; lambda + l delta) xi_l(x+1) / xi_l(x)`
//!
//! The eigenfunctions are `phi_{l,0} P_{l,n}` where `P_{l,n}` follows from a
//! single application of the shifted backward operator to
//! `P_{n-l-1}(x; lambda + (l+1) delta)`. Only even `l` gives a hermitian
//! system; odd `l` is reported as a positivity failure.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::adler::{direct_d_sq, validate_deletion, DeletedSystem, Route};
use crate::casorati::casoratian_of_polynomials;
use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::hamiltonian::{factorize, JacobiSystem};
use crate::linalg::inf_norm;
use crate::params::{GridSpec, NumericPolicy};

/// `xi_l(x)`, from the closed form when the family has one and from the
/// normalized Casoratian `P_(1..l)` otherwise.
pub fn xi_ell(spec: &FamilySpec, l: usize, x: i64) -> Result<f64> {
    match spec.xi_closed(l, x as f64) {
        Err(DqmError::NotImplementedForFamily { .. }) => xi_casoratian(spec, l, x),
        other => other,
    }
}

/// `P_(1..l)(x)` from the Casoratian of `P_1..P_l`.
pub fn xi_casoratian(spec: &FamilySpec, l: usize, x: i64) -> Result<f64> {
    if l == 0 {
        return Ok(1.0);
    }
    let levels: Vec<usize> = (1..=l).collect();
    Ok(casoratian_of_polynomials(spec, &levels, x)?.normalized)
}

/// Residuals of the two identities tying `xi_l` to its neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XiRecurrenceCheck {
    /// `B(0; l') xi_{l+1} = B(x; l') varphi(x; l') xi_l(x) - D(x; l') varphi(x-1; l') xi_l(x+1)`
    /// with `l' = lambda + l delta`, relative to the largest term.
    pub recurrence: f64,
    /// `|xi_l - P_{l-1,l}|` with the right side from the Casoratian.
    pub modified_identity: f64,
}

pub fn xi_recurrence_check(spec: &FamilySpec, l: usize, x: i64) -> Result<XiRecurrenceCheck> {
    let sl = spec.shifted(l);
    let xf = x as f64;
    let xi = xi_ell(spec, l, x)?;
    let xi_next = xi_ell(spec, l, x + 1)?;
    let lhs = sl.b(0.0) * xi_ell(spec, l + 1, x)?;
    let t1 = sl.b(xf) * sl.varphi(xf) * xi;
    let t2 = sl.d(xf) * sl.varphi(xf - 1.0) * xi_next;
    let scale = lhs.abs().max(t1.abs()).max(t2.abs()).max(f64::MIN_POSITIVE);
    let recurrence = (lhs - (t1 - t2)).abs() / scale;
    let modified_identity = if l == 0 {
        (xi - 1.0).abs()
    } else {
        let mut levels: Vec<usize> = (1..l).collect();
        levels.push(l);
        let p = casoratian_of_polynomials(spec, &levels, x)?.normalized;
        (xi - p).abs() / xi.abs().max(1.0)
    };
    Ok(XiRecurrenceCheck {
        recurrence,
        modified_identity,
    })
}

/// `C(l, lambda) = sqrt(B(0; lambda + l delta)) (-1)^l kappa^{-l(l-1)/4}
/// prod_{j=1}^l E(j) / sqrt(B(0; lambda + (j-1) delta))`.
pub fn c_l_lambda(spec: &FamilySpec, l: usize) -> f64 {
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let mut acc = sign * spec.shifted(l).b(0.0).sqrt() * spec.kappa().powf(-((l * l.saturating_sub(1)) as f64) / 4.0);
    for j in 1..=l {
        acc *= spec.energy(j) / spec.shifted(j - 1).b(0.0).sqrt();
    }
    acc
}

/// `phi_0(x)` with `phi_0(0) = 1` on `[0, x_max]`, zero past the first
/// vanishing birth rate.
fn ground_values(spec: &FamilySpec, x_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x_max + 1);
    let mut acc = 0.0f64;
    out.push(1.0);
    for y in 0..x_max {
        acc += 0.5 * (spec.b(y as f64) / spec.d(y as f64 + 1.0)).ln();
        out.push(if acc.is_nan() { 0.0 } else { acc.exp() });
    }
    out
}

fn grid_size_after(grid: &GridSpec, l: usize) -> Result<usize> {
    if l > grid.n_max() {
        return Err(DqmError::LevelOutOfRange {
            level: l,
            n_max: grid.n_max(),
        });
    }
    Ok(grid.x_max() - l)
}

/// `P_{l,n}(x)` on `[0, x_max - l]` from the shifted backward operator:
/// `B(0; l') P_{l,n} = B(x; l') xi_l(x) varphi(x; l') P_{n-l-1}(x; l'')
///  - D(x; l') xi_l(x+1) varphi(x-1; l') P_{n-l-1}(x-1; l'')`.
///
/// `P_{l,0} = 1` and `P_{l,n} = 0` for `1 <= n <= l`.
pub fn modified_polynomials(spec: &FamilySpec, grid: &GridSpec, l: usize, n: usize) -> Result<Vec<f64>> {
    let x_bar = grid_size_after(grid, l)?;
    if n > grid.n_max() {
        return Err(DqmError::LevelOutOfRange {
            level: n,
            n_max: grid.n_max(),
        });
    }
    if n == 0 {
        return Ok(vec![1.0; x_bar + 1]);
    }
    if n <= l {
        return Ok(vec![0.0; x_bar + 1]);
    }
    let xi = xi_table(spec, l, x_bar)?;
    Ok(modified_row(spec, l, n, &xi))
}

fn modified_row(spec: &FamilySpec, l: usize, n: usize, xi: &[f64]) -> Vec<f64> {
    let (s1, s2) = (spec.shifted(l), spec.shifted(l + 1));
    let m = n - l - 1;
    let b0 = s1.b(0.0);
    (0..xi.len() - 1)
        .map(|x| {
            let xf = x as f64;
            let up = s1.b(xf) * xi[x] * s1.varphi(xf) * s2.poly(m, xf);
            let down = if x == 0 {
                0.0
            } else {
                s1.d(xf) * xi[x + 1] * s1.varphi(xf - 1.0) * s2.poly(m, xf - 1.0)
            };
            (up - down) / b0
        })
        .collect()
}

/// `P_{l,n} = P_(1..l, n)` from the polynomial Casoratian.
pub fn modified_polynomials_casoratian(spec: &FamilySpec, grid: &GridSpec, l: usize, n: usize) -> Result<Vec<f64>> {
    let x_bar = grid_size_after(grid, l)?;
    if n == 0 {
        return Ok(vec![1.0; x_bar + 1]);
    }
    if n <= l {
        return Ok(vec![0.0; x_bar + 1]);
    }
    let mut levels: Vec<usize> = (1..=l).collect();
    levels.push(n);
    (0..=x_bar as i64)
        .map(|x| casoratian_of_polynomials(spec, &levels, x).map(|c| c.normalized))
        .collect()
}

/// `xi_l` on the extended grid `[0, x_bar + 1]`.
fn xi_table(spec: &FamilySpec, l: usize, x_bar: usize) -> Result<Vec<f64>> {
    (0..=x_bar as i64 + 1).map(|x| xi_ell(spec, l, x)).collect()
}

/// The system left after deleting `1..=l`.
#[derive(Clone, Debug, Serialize)]
pub struct SpecialDeletedSystem {
    pub l: usize,
    /// `xi_l` on `[0, x_bar + 1]`.
    pub xi: Vec<f64>,
    pub b_l: Vec<f64>,
    pub d_l: Vec<f64>,
    pub phi_l0: Vec<f64>,
    pub c_l_lambda: f64,
    /// `0, l+1, ..., n_max`.
    pub levels: Vec<usize>,
    /// `modified[i]` is `P_{l, levels[i]}` on `[0, x_bar]`.
    pub modified: Vec<Vec<f64>>,
    /// `d_{l,n}^2 = d_n^2 prod_j (E(n) - E(j)) / E(j)^2`.
    pub d_l_sq: Vec<f64>,
    pub energies: Vec<f64>,
    pub original_d_sq: Vec<f64>,
}

impl SpecialDeletedSystem {
    pub fn x_max(&self) -> usize {
        self.b_l.len() - 1
    }

    /// Smallest `xi_l` on the extended grid.
    pub fn xi_positivity_margin(&self) -> f64 {
        self.xi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn hamiltonian(&self, policy: &NumericPolicy) -> Result<JacobiSystem> {
        JacobiSystem::from_potentials(self.b_l.clone(), self.d_l.clone(), 0.0, policy)
    }

    /// `phi_{l,n} = phi_{l,0} (-1)^l prod_j (E(n) - E(j)) / E(j) P_{l,n}`.
    pub fn eigenfunction(&self, n: usize) -> Option<Vec<f64>> {
        let i = self.levels.iter().position(|&m| m == n)?;
        let l = self.l;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let ratio: f64 = (1..=l)
            .map(|j| (self.energies[n] - self.energies[j]) / self.energies[j])
            .product();
        Some(
            self.phi_l0
                .iter()
                .zip(&self.modified[i])
                .map(|(g, p)| sign * ratio * g * p)
                .collect(),
        )
    }

    /// The same system in the form produced by the other deletion routes.
    pub fn to_deleted_system(&self) -> Result<DeletedSystem> {
        let set = validate_deletion(&(1..=self.l).collect::<Vec<_>>(), self.energies.len() - 1)?;
        let phi_bar = self
            .levels
            .iter()
            .map(|&n| self.eigenfunction(n).expect("level is present"))
            .collect();
        Ok(DeletedSystem {
            deletion: set,
            route: Route::Special,
            b_bar: self.b_l.clone(),
            d_bar: self.d_l.clone(),
            energy_offset: self.energies[0],
            levels: self.levels.clone(),
            phi_bar,
            original_energies: self.energies.clone(),
            original_d_sq: self.original_d_sq.clone(),
            step_products: None,
        })
    }
}

/// Builds the `D = {1..l}` system from the closed forms.
///
/// Fails with `PositivityFailure` when `xi_l` is not positive on the
/// extended grid (always the case for odd `l`), and with
/// `PreconditionViolated` when `D_l(0)` or, on finite grids,
/// `B_l(x_bar)` does not vanish.
pub fn build_special(
    spec: &FamilySpec,
    grid: &GridSpec,
    l: usize,
    policy: &NumericPolicy,
) -> Result<SpecialDeletedSystem> {
    let x_bar = grid_size_after(grid, l)?;
    let xi = xi_table(spec, l, x_bar)?;
    if let Some((x, &value)) = xi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(DqmError::PositivityFailure { x, value });
    }
    let (b_l, d_l) = special_rates(spec, grid, l, &xi, policy)?;
    let s1 = spec.shifted(l);
    let c = c_l_lambda(spec, l);
    let g = ground_values(&s1, x_bar);
    let pref = c / s1.b(0.0).sqrt();
    let phi_l0 = (0..=x_bar).map(|x| pref * g[x] / (xi[x] * xi[x + 1]).sqrt()).collect();
    let levels: Vec<usize> = std::iter::once(0).chain(l + 1..=grid.n_max()).collect();
    let modified = crate::batch::map(&levels, |&n| {
        if n == 0 {
            vec![1.0; x_bar + 1]
        } else {
            modified_row(spec, l, n, &xi)
        }
    });
    let original_d_sq = direct_d_sq(spec, grid);
    let energies: Vec<f64> = (0..=grid.n_max()).map(|n| spec.energy(n)).collect();
    let d_l_sq = levels
        .iter()
        .map(|&n| {
            original_d_sq[n]
                * (1..=l)
                    .map(|j| (energies[n] - energies[j]) / (energies[j] * energies[j]))
                    .product::<f64>()
        })
        .collect();
    Ok(SpecialDeletedSystem {
        l,
        xi,
        b_l,
        d_l,
        phi_l0,
        c_l_lambda: c,
        levels,
        modified,
        d_l_sq,
        energies,
        original_d_sq,
    })
}

/// `B_l`, `D_l` from a `xi_l` table, with the boundary checks.
fn special_rates(
    spec: &FamilySpec,
    grid: &GridSpec,
    l: usize,
    xi: &[f64],
    policy: &NumericPolicy,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x_bar = xi.len() - 2;
    let s1 = spec.shifted(l);
    let kl = spec.kappa().powi(l as i32);
    let mut b_l: Vec<f64> = (0..=x_bar).map(|x| kl * s1.b(x as f64) * xi[x] / xi[x + 1]).collect();
    let d_l: Vec<f64> = (0..=x_bar).map(|x| kl * s1.d(x as f64) * xi[x + 1] / xi[x]).collect();
    if d_l[0].abs() > policy.positivity_tol {
        return Err(DqmError::PreconditionViolated(format!("D_l(0) = {:e}", d_l[0])));
    }
    if grid.is_finite() {
        let top = b_l[x_bar];
        if top.abs() > policy.positivity_tol {
            return Err(DqmError::PreconditionViolated(format!("B_l(x_max) = {top:e}")));
        }
    }
    // A truncated grid is closed by a reflecting top, as on the other routes.
    b_l[x_bar] = 0.0;
    Ok((b_l, d_l))
}

/// Residuals of the shift-operator relations of a special system at level
/// `n > l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftOperatorReport {
    pub l: usize,
    pub n: usize,
    /// `|f_{l,n} b_{l,n-1} - E(n)|` relative to `E(n)`.
    pub factor_product: f64,
    /// `E(n) = kappa^{l+1} E(n-l-1; lambda'') + E(l+1)`.
    pub energy_relation: f64,
    /// `|A_l A_l^T - kappa^{l+1} H(lambda'') - E(l+1)|_inf`, relative.
    pub partner_hamiltonian: f64,
    /// `A_l (phi_{l,0} P_{l,n}) = f_{l,n} phi_{n-l-1}(lambda'')`.
    pub forward: f64,
    /// `A_l^T phi_{n-l-1}(lambda'') = b_{l,n-1} phi_{l,0} P_{l,n}`.
    pub backward: f64,
}

impl ShiftOperatorReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.factor_product,
            self.energy_relation,
            self.partner_hamiltonian,
            self.forward,
            self.backward,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

pub fn shift_operator_checks(
    spec: &FamilySpec,
    grid: &GridSpec,
    l: usize,
    n: usize,
    policy: &NumericPolicy,
) -> Result<ShiftOperatorReport> {
    if n <= l || n > grid.n_max() {
        return Err(DqmError::PreconditionViolated(format!(
            "shift relations need l < n <= n_max, got l = {l}, n = {n}"
        )));
    }
    let sys = build_special(spec, grid, l, policy)?;
    let x_bar = sys.x_max();
    let kappa = spec.kappa();
    let s1 = spec.shifted(l);
    let s2 = spec.shifted(l + 1);
    let m = n - l - 1;
    let (f_n, b_n1) = spec.shift_factors(n);
    let scale = kappa.powf(-(l as f64) / 2.0) * sys.c_l_lambda;
    let f_ln = f_n * scale / s1.b(0.0);
    let b_ln = b_n1 * s1.b(0.0) / scale;
    let e_n = spec.energy(n);
    let factor_product = (f_ln * b_ln - e_n).abs() / e_n.abs().max(1.0);
    let e_ll = spec.energy(l + 1);
    let energy_relation = (kappa.powi(l as i32 + 1) * s2.energy(m) + e_ll - e_n).abs() / e_n.abs().max(1.0);

    let h = sys.hamiltonian(policy)?;
    let a = factorize(&h, policy)?.a;
    // Compare on rows that do not touch the truncation boundary.
    let inner = if grid.is_finite() {
        x_bar
    } else {
        x_bar.saturating_sub(1)
    };
    let partner = &a * a.transpose();
    let mut target = DMatrix::<f64>::zeros(inner, inner);
    let mut got = DMatrix::<f64>::zeros(inner, inner);
    let kl1 = kappa.powi(l as i32 + 1);
    for x in 0..inner {
        let xf = x as f64;
        target[(x, x)] = kl1 * (s2.b(xf) + s2.d(xf)) + e_ll;
        if x + 1 < inner {
            let off = -kl1 * (s2.b(xf) * s2.d(xf + 1.0)).sqrt();
            target[(x, x + 1)] = off;
            target[(x + 1, x)] = off;
        }
        for y in 0..inner {
            got[(x, y)] = partner[(x, y)];
        }
    }
    let partner_hamiltonian = if inner == 0 {
        0.0
    } else {
        inf_norm(&(&got - &target)) / inf_norm(&target).max(1.0)
    };

    // The factors f_{l,n}, b_{l,n-1} belong to the polynomial normalization
    // `phi_{l,0} P_{l,n}`, without the energy ratio carried by `eigenfunction`.
    let i = sys.levels.iter().position(|&k| k == n).expect("n > l is kept");
    let phi_ln: Vec<f64> = sys.phi_l0.iter().zip(&sys.modified[i]).map(|(g, p)| g * p).collect();
    let g2 = ground_values(&s2, x_bar);
    let psi: Vec<f64> = (0..=x_bar).map(|x| g2[x] * s2.poly(m, x as f64)).collect();
    let a_phi = &a * nalgebra::DVector::from_column_slice(&phi_ln);
    let fwd_scale = (f_ln.abs() * max_abs(&psi[..inner])).max(f64::MIN_POSITIVE);
    let forward = (0..inner)
        .map(|x| (a_phi[x] - f_ln * psi[x]).abs() / fwd_scale)
        .fold(0.0, f64::max);
    let mut psi_cut = psi.clone();
    if grid.is_finite() {
        psi_cut[x_bar] = 0.0;
    }
    let at_psi = a.transpose() * nalgebra::DVector::from_column_slice(&psi_cut);
    let bwd_rows = if grid.is_finite() { x_bar + 1 } else { inner };
    let bwd_scale = (b_ln.abs() * max_abs(&phi_ln)).max(f64::MIN_POSITIVE);
    let backward = (0..bwd_rows)
        .map(|x| (at_psi[x] - b_ln * phi_ln[x]).abs() / bwd_scale)
        .fold(0.0, f64::max);

    Ok(ShiftOperatorReport {
        l,
        n,
        factor_product,
        energy_relation,
        partner_hamiltonian,
        forward,
        backward,
    })
}

/// Closed-form `d_{l,n}^2` against `1 / sum_x phi_{l,0}^2 P_{l,n}^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpecialNorm {
    pub n: usize,
    pub d_sq: f64,
    pub d_sq_direct: f64,
    /// `d_{l,n}^2 / d_n^2`.
    pub factor: f64,
    pub deviation: f64,
}

pub fn special_norms(
    spec: &FamilySpec,
    grid: &GridSpec,
    l: usize,
    n: usize,
    policy: &NumericPolicy,
) -> Result<SpecialNorm> {
    let sys = build_special(spec, grid, l, policy)?;
    let i = sys
        .levels
        .iter()
        .position(|&m| m == n)
        .ok_or(DqmError::LevelOutOfRange {
            level: n,
            n_max: grid.n_max(),
        })?;
    let sum: f64 = sys
        .phi_l0
        .iter()
        .zip(&sys.modified[i])
        .map(|(g, p)| (g * p).powi(2))
        .sum();
    let d_sq = sys.d_l_sq[i];
    let d_sq_direct = 1.0 / sum;
    Ok(SpecialNorm {
        n,
        d_sq,
        d_sq_direct,
        factor: d_sq / sys.original_d_sq[n],
        deviation: (d_sq - d_sq_direct).abs() / d_sq.abs(),
    })
}

/// Summary of a special deletion.
#[derive(Clone, Debug, Serialize)]
pub struct SpecialReport {
    pub family: String,
    pub lambda: Vec<f64>,
    pub l: usize,
    #[serde(rename = "C_l_lambda")]
    pub c_l_lambda: f64,
    pub xi_positivity_margin: f64,
    pub hermitian: bool,
    /// Why the hermiticity-dependent checks did not run.
    pub skipped: Option<String>,
    pub b_l: Vec<f64>,
    pub d_l: Vec<f64>,
    pub levels: Vec<usize>,
    pub spectrum: Vec<f64>,
    pub spectrum_deviation: f64,
    pub max_norm_deviation: f64,
}

/// Builds and checks the `D = {1..l}` system. Odd `l` is refused unless
/// `allow_odd` is set; the report then carries the signed rates and
/// states why the spectral and norm checks were skipped.
pub fn special_report(
    spec: &FamilySpec,
    grid: &GridSpec,
    l: usize,
    allow_odd: bool,
    policy: &NumericPolicy,
) -> Result<SpecialReport> {
    if l % 2 == 1 && allow_odd {
        let x_bar = grid_size_after(grid, l)?;
        let xi = xi_table(spec, l, x_bar)?;
        let (b_l, d_l) = special_rates(spec, grid, l, &xi, policy)?;
        let margin = xi.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(SpecialReport {
            family: spec.id().to_string(),
            lambda: spec.params().values(),
            l,
            c_l_lambda: c_l_lambda(spec, l),
            xi_positivity_margin: margin,
            hermitian: false,
            skipped: Some(format!(
                "odd l = {l}: the set 1..=l is inadmissible, xi_l changes sign (min {margin:e}) and the system is not hermitian"
            )),
            b_l,
            d_l,
            levels: std::iter::once(0).chain(l + 1..=grid.n_max()).collect(),
            spectrum: Vec::new(),
            spectrum_deviation: f64::NAN,
            max_norm_deviation: f64::NAN,
        });
    }
    let sys = build_special(spec, grid, l, policy)?;
    let h = sys.hamiltonian(policy)?;
    let spectrum = h.eigensystem()?.values.clone();
    let keep = if grid.is_finite() {
        spectrum.len()
    } else {
        grid.resolved_levels().saturating_sub(l).min(spectrum.len())
    };
    let spectrum_deviation = spectrum
        .iter()
        .zip(&sys.levels)
        .take(keep)
        .map(|(e, &n)| (e - sys.energies[n]).abs() / sys.energies[n].abs().max(1.0))
        .fold(0.0, f64::max);
    let max_norm_deviation = sys
        .levels
        .iter()
        .enumerate()
        .take(keep)
        .map(|(i, _)| {
            let sum: f64 = sys
                .phi_l0
                .iter()
                .zip(&sys.modified[i])
                .map(|(g, p)| (g * p).powi(2))
                .sum();
            (sys.d_l_sq[i] * sum - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(SpecialReport {
        family: spec.id().to_string(),
        lambda: spec.params().values(),
        l,
        c_l_lambda: sys.c_l_lambda,
        xi_positivity_margin: sys.xi_positivity_margin(),
        hermitian: true,
        skipped: None,
        b_l: sys.b_l.clone(),
        d_l: sys.d_l.clone(),
        levels: sys.levels.clone(),
        spectrum,
        spectrum_deviation,
        max_norm_deviation,
    })
}

#[cfg(test)]
mod tests;
