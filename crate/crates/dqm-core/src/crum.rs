//! Crum chains: repeated deletion of the ground state.
//!
//! One step maps `H = A^T A + E(s)` to `A A^T + E(s)`, refactorized about
//! its new ground state. Eigenfunctions are carried along by
//! `phi^{[s+1]}_n = A^{[s]} phi^{[s]}_n`; the rates of the next system are
//! read off from the new ground state:
//!
//! - `B^{[s+1]}(x) = sqrt(B_s(x+1) D_s(x+1)) phi(x+1)/phi(x)`
//! - `D^{[s+1]}(x) = sqrt(B_s(x) D_s(x)) phi(x-1)/phi(x)`, with
//!   `D^{[s+1]}(0) = 0` imposed at the boundary.

use serde::Serialize;

use crate::adler::EigenTables;
use crate::casorati::casoratian_by;
use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::hamiltonian::{apply_a, factorize, ground_state, JacobiSystem, WaveFunction};
use crate::linalg::{inf_norm, poly_fit_residual};
use crate::params::{GridSpec, NumericPolicy};

/// The system after `s` ground-state deletions.
#[derive(Clone, Debug, Serialize)]
pub struct CrumChainState {
    pub s: usize,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    /// Surviving levels `s, s+1, ...`.
    pub levels: Vec<usize>,
    /// `phi[i]` belongs to `levels[i]`.
    pub phi: Vec<Vec<f64>>,
    /// All original energies, indexed by level.
    pub energies: Vec<f64>,
}

impl CrumChainState {
    pub fn initial(tables: &EigenTables) -> Self {
        CrumChainState {
            s: 0,
            b: tables.b.clone(),
            d: tables.d.clone(),
            levels: (0..tables.phi.len()).collect(),
            phi: tables.phi.clone(),
            energies: tables.energies.clone(),
        }
    }

    pub fn from_family(spec: &FamilySpec, grid: &GridSpec) -> Self {
        Self::initial(&EigenTables::from_family(spec, grid))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn energy_offset(&self) -> f64 {
        self.energies[self.s]
    }

    pub fn phi_of(&self, n: usize) -> Option<&[f64]> {
        self.levels.iter().position(|&l| l == n).map(|i| self.phi[i].as_slice())
    }

    pub fn hamiltonian(&self, policy: &NumericPolicy) -> Result<JacobiSystem> {
        JacobiSystem::from_potentials(self.b.clone(), self.d.clone(), self.energy_offset(), policy)
    }

    /// `(phi_n, phi_m)` against `prod_{j<s}(E(n)-E(j)) / d_n^2 delta_nm`,
    /// normalized to the identity. `d_sq` are the original constants.
    /// Only the first `keep` surviving levels are compared.
    pub fn norm_deviation(&self, d_sq: &[f64], keep: usize) -> f64 {
        let factor = |n: usize| {
            (0..self.s)
                .map(|j| self.energies[n] - self.energies[j])
                .product::<f64>()
                / d_sq[n]
        };
        let mut worst = 0.0f64;
        for (i, &n) in self.levels.iter().enumerate().take(keep) {
            for (j, &m) in self.levels.iter().enumerate().take(keep) {
                let g: f64 = self.phi[i].iter().zip(&self.phi[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g / (factor(n) * factor(m)).sqrt() - target).abs());
            }
        }
        worst
    }
}

/// One ground-state deletion.
pub fn crum_step(state: &CrumChainState) -> Result<CrumChainState> {
    let dim = state.dim();
    if dim == 0 || state.levels.is_empty() {
        return Err(DqmError::PreconditionViolated("the chain is already empty".into()));
    }
    let step = state.s + 1;
    let new_dim = dim - 1;
    let levels: Vec<usize> = state.levels[1..].to_vec();
    let phi: Vec<Vec<f64>> = state.phi[1..]
        .iter()
        .map(|p| {
            let full = apply_a(&state.b, &state.d, p);
            full[..new_dim].to_vec()
        })
        .collect();
    let (b, d) = &(state.b.clone(), state.d.clone());
    let mut nb = Vec::with_capacity(new_dim);
    let mut nd = Vec::with_capacity(new_dim);
    if let Some(g) = phi.first() {
        for x in 0..new_dim {
            if !(g[x] > 0.0) {
                return Err(DqmError::NonPositivePotential { step, x, value: g[x] });
            }
        }
        for x in 0..new_dim {
            let up = if x + 1 < new_dim { g[x + 1] / g[x] } else { 0.0 };
            nb.push((b[x + 1] * d[x + 1]).sqrt() * up);
            nd.push(if x == 0 {
                0.0
            } else {
                (b[x] * d[x]).sqrt() * g[x - 1] / g[x]
            });
        }
        for x in 0..new_dim.saturating_sub(1) {
            if !(nb[x] > 0.0) {
                return Err(DqmError::NonPositivePotential { step, x, value: nb[x] });
            }
        }
        for x in 1..new_dim {
            if !(nd[x] > 0.0) {
                return Err(DqmError::NonPositivePotential { step, x, value: nd[x] });
            }
        }
    }
    Ok(CrumChainState {
        s: step,
        b: nb,
        d: nd,
        levels,
        phi,
        energies: state.energies.clone(),
    })
}

/// `s` successive steps from `initial`.
pub fn crum_chain(initial: &CrumChainState, s: usize) -> Result<Vec<CrumChainState>> {
    let mut out = vec![initial.clone()];
    for _ in 0..s {
        let next = crum_step(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// `||A_r H - H^{[s+1]} A_r||_inf`, with `A_r` the factor of `state`
/// without its last row and `H^{[s+1]}` assembled from the rates of `next`.
pub fn intertwining_residual(state: &CrumChainState, next: &CrumChainState, policy: &NumericPolicy) -> Result<f64> {
    let h = state.hamiltonian(policy)?;
    let fac = factorize(&h, policy)?;
    let n = h.dim();
    let a_r = fac.a.rows(0, n - 1).into_owned();
    let h1 = next.hamiltonian(policy)?.matrix();
    Ok(inf_norm(&(&a_r * h.matrix() - h1 * &a_r)))
}

/// Prefactor choice in the determinant formula for `phi^{[s]}_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DeterminantVariant {
    /// `(-1)^s prod_k sqrt(B^{[k]}(x)) W[phi_0..phi_{s-1}, phi_n](x) / W[phi_0..phi_{s-1}](x+1)`.
    Birth,
    /// `(-1)^s prod_k sqrt(D^{[k]}(x+s-k)) W[phi_0..phi_{s-1}, phi_n](x) / W[phi_0..phi_{s-1}](x)`.
    Death,
}

/// `phi^{[s]}_n(x)` from Casoratians of the original eigenfunctions (zero
/// outside the grid). The intermediate rates come from shape invariance,
/// `B^{[k]}(x) = kappa^k B(x; lambda + k delta)`, so this route shares no
/// arithmetic with [`crum_step`].
pub fn crum_determinant_eigenfunction(
    spec: &FamilySpec,
    tables: &EigenTables,
    s: usize,
    n: usize,
    x: usize,
    variant: DeterminantVariant,
) -> Result<f64> {
    if n < s {
        return Err(DqmError::PreconditionViolated(format!(
            "level {n} deleted after {s} steps"
        )));
    }
    let x_max = tables.x_max() as i64;
    let phi = |k: usize, y: i64| {
        if y < 0 || y > x_max {
            0.0
        } else {
            tables.phi[k][y as usize]
        }
    };
    let mut fs: Vec<usize> = (0..s).collect();
    let den_at = match variant {
        DeterminantVariant::Birth => x as i64 + 1,
        DeterminantVariant::Death => x as i64,
    };
    let den = casoratian_by(s, den_at, |k, y| phi(fs[k], y));
    if den == 0.0 {
        return Err(DqmError::ZeroDenominator(den_at));
    }
    fs.push(n);
    let num = casoratian_by(s + 1, x as i64, |k, y| phi(fs[k], y));
    let kappa = spec.kappa();
    let mut pre = 1.0;
    for k in 0..s {
        let shifted = spec.shifted(k);
        let scale = kappa.powi(k as i32);
        pre *= match variant {
            DeterminantVariant::Birth => (scale * shifted.b(x as f64)).sqrt(),
            DeterminantVariant::Death => (scale * shifted.d((x + s - k) as f64)).sqrt(),
        };
    }
    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * pre * num / den)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeInvarianceReport {
    /// `max |B^{[1]}(x) - kappa B(x; lambda + delta)|` and the same for `D`,
    /// relative to `max(1, |kappa B|)`.
    pub bd_shape_deviation: f64,
    /// `B(x+1) D(x+1)` against `kappa^2 B(x; lambda + delta) D(x+1; lambda + delta)`,
    /// relative to `max(1, |B D|)`.
    pub cond1_deviation: f64,
    pub cond2_deviation: f64,
    /// `max_n |E(n) - sum_{s<n} kappa^s E(1; lambda + s delta)|` relative.
    pub energy_sum_deviation: f64,
    pub pass: bool,
}

/// Shape invariance of a family on `grid`. `perturbation` is added to the
/// shifted reference rates, for checking that the report is sensitive.
pub fn verify_shape_invariance(
    spec: &FamilySpec,
    grid: &GridSpec,
    policy: &NumericPolicy,
    perturbation: f64,
) -> Result<ShapeInvarianceReport> {
    let state = CrumChainState::from_family(spec, grid);
    let next = crum_step(&state)?;
    let shifted = spec.shifted(1);
    let kappa = spec.kappa();
    let x_top = next.dim() - 1;
    // On a truncated grid the last birth rate is cut off by the truncation.
    let b_range = if grid.is_finite() {
        x_top
    } else {
        x_top.saturating_sub(1)
    };
    let mut bd = 0.0f64;
    for x in 0..=x_top {
        let xf = x as f64;
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
        if x <= b_range {
            bd = bd.max(rel(next.b[x], kappa * shifted.b(xf) + perturbation));
        }
        bd = bd.max(rel(next.d[x], kappa * shifted.d(xf) + perturbation));
    }
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for x in 0..grid.x_max() {
        let xf = x as f64;
        // Squared, since both sides vanish at the top of a finite grid and a
        // square root would turn rounding there into sqrt(eps).
        let lhs1 = spec.b(xf + 1.0) * spec.d(xf + 1.0);
        let rhs1 = kappa * kappa * shifted.b(xf) * shifted.d(xf + 1.0) + perturbation;
        c1 = c1.max((lhs1 - rhs1).abs() / lhs1.abs().max(1.0));
        let lhs2 = spec.b(xf) + spec.d(xf + 1.0);
        let rhs2 = kappa * (shifted.b(xf) + shifted.d(xf)) + spec.energy(1) + perturbation;
        c2 = c2.max((lhs2 - rhs2).abs());
    }
    let mut es = 0.0f64;
    for n in 0..=grid.n_max().min(12) {
        let sum: f64 = (0..n).map(|s| kappa.powi(s as i32) * spec.shifted(s).energy(1)).sum();
        let e = spec.energy(n);
        es = es.max((e - sum).abs() / e.abs().max(1.0));
    }
    let tol = policy.identity_tol;
    Ok(ShapeInvarianceReport {
        bd_shape_deviation: bd,
        cond1_deviation: c1,
        cond2_deviation: c2,
        energy_sum_deviation: es,
        pass: bd <= tol && c1 <= tol && c2 <= tol && es <= tol,
    })
}

/// `(A^T f)(x) = sqrt(B(x)) f(x) - sqrt(D(x)) f(x-1)` on a grid one site
/// longer than `f` (which is zero-padded).
fn apply_a_dag(spec: &FamilySpec, f: &[f64]) -> Vec<f64> {
    let n = f.len() + 1;
    (0..n)
        .map(|x| {
            let here = if x < f.len() { f[x] } else { 0.0 };
            let below = if x > 0 { f[x - 1] } else { 0.0 };
            spec.b(x as f64).sqrt() * here - spec.d(x as f64).sqrt() * below
        })
        .collect()
}

/// `phi_n ∝ A(lambda)^T A(lambda + delta)^T .. A(lambda + (n-1) delta)^T phi_0(.; lambda + n delta)`.
pub fn rodrigues_wavefunction(spec: &FamilySpec, grid: &GridSpec, n: usize) -> Result<WaveFunction> {
    let x_max = grid.x_max();
    if n > x_max {
        return Err(DqmError::LevelOutOfRange { level: n, n_max: x_max });
    }
    let top = spec.shifted(n);
    let inner = GridSpec::finite(x_max - n);
    let mut f = ground_state(&top, &inner).values;
    for k in (0..n).rev() {
        f = apply_a_dag(&spec.shifted(k), &f);
    }
    Ok(WaveFunction::new(f))
}

/// Residual of `A phi_n = f_n / sqrt(B(0)) phi_{n-1}(.; lambda + delta)` with
/// `phi_n = phi_0 P_n`, relative to `max |phi_{n-1}|`.
pub fn forward_shift_residual(spec: &FamilySpec, grid: &GridSpec, n: usize) -> f64 {
    let g = ground_state(spec, grid).values;
    let phi: Vec<f64> = (0..grid.dim()).map(|x| g[x] * spec.poly(n, x as f64)).collect();
    let b: Vec<f64> = (0..grid.dim()).map(|x| spec.b(x as f64)).collect();
    let d: Vec<f64> = (0..grid.dim()).map(|x| spec.d(x as f64)).collect();
    let lhs = apply_a(&b, &d, &phi);
    let shifted = spec.shifted(1);
    let inner = GridSpec::finite(grid.x_max() - 1);
    let gs = ground_state(&shifted, &inner).values;
    let (f_n, _) = spec.shift_factors(n);
    let c = f_n / spec.b(0.0).sqrt();
    let rhs: Vec<f64> = (0..grid.x_max())
        .map(|x| c * gs[x] * shifted.poly(n - 1, x as f64))
        .collect();
    let top = if grid.is_finite() {
        grid.x_max()
    } else {
        grid.x_max() - 1
    };
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    (0..top.min(rhs.len()))
        .map(|x| (lhs[x] - rhs[x]).abs() / scale)
        .fold(0.0, f64::max)
}

/// Polynomial parts of a Crum chain: `P^{[s]}_n` and `eta^{[s]}`.
#[derive(Clone, Debug, Serialize)]
pub struct CrumPolynomialTables {
    pub s: usize,
    pub levels: Vec<usize>,
    /// `values[i][x]` for level `levels[i]` on `[0, x_max - s]`.
    pub values: Vec<Vec<f64>>,
    /// `eta^{[s]}(x) = sum_{k<=s} eta(x+k)`.
    pub eta: Vec<f64>,
    /// Largest relative spread of the normalizing divided difference, which
    /// must be constant in `x`.
    pub normalizer_spread: f64,
}

impl CrumPolynomialTables {
    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == n)
            .map(|i| self.values[i].as_slice())
    }
}

fn eta_level(spec: &FamilySpec, s: usize, x: f64) -> f64 {
    (0..=s).map(|k| spec.eta(x + k as f64)).sum()
}

/// `P^{[s]}_n` by the divided-difference recurrence
/// `P^{[s]}_n(x) = [Δ P^{[s-1]}_n / Δ eta^{[s-1]}](x) / [Δ P^{[s-1]}_s / Δ eta^{[s-1]}]`,
/// starting from `P^{[0]}_n = P_n(eta(x))`.
pub fn crum_polynomial_tables(
    spec: &FamilySpec,
    grid: &GridSpec,
    s: usize,
    levels: &[usize],
    policy: &NumericPolicy,
) -> Result<CrumPolynomialTables> {
    let x_max = grid.x_max();
    check_affine(spec, grid, policy)?;
    let top_level = levels.iter().copied().max().unwrap_or(0).max(s);
    let mut rows: Vec<Vec<f64>> = (0..=top_level)
        .map(|n| (0..=x_max).map(|x| spec.poly(n, x as f64)).collect())
        .collect();
    let mut spread = 0.0f64;
    for level in 1..=s {
        let len = x_max + 1 - level;
        let eta: Vec<f64> = (0..=len).map(|x| eta_level(spec, level - 1, x as f64)).collect();
        let diff = |row: &[f64], x: usize| (row[x] - row[x + 1]) / (eta[x] - eta[x + 1]);
        let norm: Vec<f64> = (0..len).map(|x| diff(&rows[level], x)).collect();
        let n0 = norm[0];
        spread = spread.max(norm.iter().map(|v| (v - n0).abs() / n0.abs()).fold(0.0, f64::max));
        rows = rows
            .iter()
            .enumerate()
            .map(|(n, row)| {
                if n < level {
                    Vec::new()
                } else {
                    (0..len).map(|x| diff(row, x) / n0).collect()
                }
            })
            .collect();
    }
    let values = levels
        .iter()
        .map(|&n| {
            if n < s {
                Err(DqmError::PreconditionViolated(format!(
                    "level {n} deleted after {s} steps"
                )))
            } else {
                Ok(rows[n].clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrumPolynomialTables {
        s,
        levels: levels.to_vec(),
        values,
        eta: (0..=x_max - s).map(|x| eta_level(spec, s, x as f64)).collect(),
        normalizer_spread: spread,
    })
}

/// `phi_1 / phi_0 = P_1` must be affine in `eta`.
fn check_affine(spec: &FamilySpec, grid: &GridSpec, policy: &NumericPolicy) -> Result<()> {
    let xs: Vec<f64> = (0..=grid.x_max()).map(|x| spec.eta(x as f64)).collect();
    let ys: Vec<f64> = (0..=grid.x_max()).map(|x| spec.poly(1, x as f64)).collect();
    let r = poly_fit_residual(&xs, &ys, 1);
    if r > policy.identity_tol {
        return Err(DqmError::AffineCheckFailed(r));
    }
    Ok(())
}

/// `B^{[s]}`, `D^{[s]}` from `B^{[s-1]}`, `D^{[s-1]}` by ratios of
/// `eta^{[s-1]}` differences:
/// `B^{[s]}(x) = B^{[s-1]}(x+1) Δeta(x+1)/Δeta(x)`,
/// `D^{[s]}(x) = D^{[s-1]}(x) Δeta(x-1)/Δeta(x)`,
/// with `Δeta(x) = eta^{[s-1]}(x) - eta^{[s-1]}(x+1)`.
pub fn rates_from_eta(spec: &FamilySpec, s: usize, b_prev: &[f64], d_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let len = b_prev.len() - 1;
    let de = |x: i64| eta_level(spec, s - 1, x as f64) - eta_level(spec, s - 1, x as f64 + 1.0);
    let b = (0..len)
        .map(|x| b_prev[x + 1] * de(x as i64 + 1) / de(x as i64))
        .collect();
    let d = (0..len)
        .map(|x| {
            if x == 0 {
                0.0
            } else {
                d_prev[x] * de(x as i64 - 1) / de(x as i64)
            }
        })
        .collect();
    (b, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStepReport {
    pub s: usize,
    pub spectrum: Vec<f64>,
    pub spectrum_deviation: f64,
    pub eigen_residual: f64,
    pub norm_deviation: f64,
    pub min_b: f64,
    pub min_d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub family: String,
    pub steps: Vec<ChainStepReport>,
}

/// Per-step spectra, residuals and positivity margins of a chain.
pub fn chain_report(spec: &FamilySpec, grid: &GridSpec, s: usize, policy: &NumericPolicy) -> Result<ChainReport> {
    let tables = EigenTables::from_family(spec, grid);
    let d_sq = tables.d_sq();
    let chain = crum_chain(&CrumChainState::initial(&tables), s)?;
    let mut steps = Vec::new();
    for st in &chain {
        let h = st.hamiltonian(policy)?;
        let spectrum = h.eigensystem()?.values.clone();
        // A truncated grid only reproduces the lower half of the spectrum and
        // its top row carries the truncation.
        let (keep, rows) = if grid.is_finite() {
            (st.levels.len(), st.dim())
        } else {
            (grid.resolved_levels().saturating_sub(st.s), st.dim() - 1)
        };
        let expected: Vec<f64> = st.levels[..keep].iter().map(|&n| st.energies[n]).collect();
        let spectrum_deviation = spectrum
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        let mut eigen_residual = 0.0f64;
        for (i, &n) in st.levels.iter().enumerate().take(keep) {
            let hv = h.apply(&st.phi[i]);
            let e = st.energies[n];
            let scale = e.max(1.0) * st.phi[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in hv.iter().zip(&st.phi[i]).take(rows) {
                eigen_residual = eigen_residual.max((a - e * b).abs() / scale);
            }
        }
        let top = st.dim().saturating_sub(1);
        steps.push(ChainStepReport {
            s: st.s,
            spectrum,
            spectrum_deviation,
            eigen_residual,
            norm_deviation: st.norm_deviation(&d_sq, keep),
            min_b: st.b[..top].iter().copied().fold(f64::INFINITY, f64::min),
            min_d: st.d.iter().skip(1).copied().fold(f64::INFINITY, f64::min),
        });
    }
    Ok(ChainReport {
        family: spec.id().to_string(),
        steps,
    })
}
