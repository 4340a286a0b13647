//! Jacobi-matrix Hamiltonians built from rate pairs `(B, D)`.
//!
//! The Hamiltonian acting on `[0, x_max]` has diagonal `B(x) + D(x)` (plus an
//! optional constant offset) and off-diagonal `-sqrt(B(x) D(x+1))`. It
//! factorizes as `A^T A` with `A` upper bidiagonal, `A[x][x] = sqrt(B(x))`,
//! `A[x][x+1] = -sqrt(D(x+1))`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{DqmError, Result};
use crate::families::FamilySpec;
use crate::linalg::{inf_norm, tridiagonal_eigen};
use crate::params::{GridSpec, NumericPolicy};

/// Values on `[0, x_max]`, optionally with the log magnitudes they were
/// exponentiated from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveFunction {
    pub values: Vec<f64>,
    pub log_scale: Option<Vec<f64>>,
}

impl WaveFunction {
    pub fn new(values: Vec<f64>) -> Self {
        WaveFunction {
            values,
            log_scale: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `1 - |cos|` of the angle to `other`.
    pub fn misalignment(&self, other: &[f64]) -> f64 {
        let dot: f64 = self.values.iter().zip(other).map(|(a, b)| a * b).sum();
        let nb: f64 = other.iter().map(|v| v * v).sum();
        1.0 - dot.abs() / (self.norm_sq() * nb).sqrt()
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors as matrix columns,
/// each column signed so that its entry at `x = 0` is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

/// Symmetric tridiagonal Hamiltonian with lazily computed eigenpairs.
#[derive(Debug)]
pub struct JacobiSystem {
    b: Vec<f64>,
    d: Vec<f64>,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    offset: f64,
    zero_window: f64,
    eigen: OnceLock<Result<Eigensystem>>,
}

impl Clone for JacobiSystem {
    fn clone(&self) -> Self {
        JacobiSystem {
            b: self.b.clone(),
            d: self.d.clone(),
            diag: self.diag.clone(),
            offdiag: self.offdiag.clone(),
            offset: self.offset,
            zero_window: self.zero_window,
            eigen: OnceLock::new(),
        }
    }
}

impl JacobiSystem {
    /// Assembles `H = A^T A + offset` from rates sampled on `[0, x_max]`.
    /// `offdiag[x] = -sqrt(B(x) D(x+1))`; a negative product beyond
    /// `positivity_tol` is reported rather than clamped.
    pub fn from_potentials(b: Vec<f64>, d: Vec<f64>, offset: f64, policy: &NumericPolicy) -> Result<Self> {
        assert_eq!(b.len(), d.len(), "B and D must share the grid");
        let n = b.len();
        let mut diag = Vec::with_capacity(n);
        for x in 0..n {
            diag.push(b[x] + d[x] + offset);
        }
        let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
        for x in 0..n.saturating_sub(1) {
            let prod = b[x] * d[x + 1];
            if prod < -policy.positivity_tol {
                return Err(DqmError::NegativePotential { x, value: prod });
            }
            offdiag.push(-prod.max(0.0).sqrt());
        }
        Ok(JacobiSystem {
            b,
            d,
            diag,
            offdiag,
            offset,
            zero_window: policy.identity_tol,
            eigen: OnceLock::new(),
        })
    }

    /// `H` for a validated family on `grid`.
    pub fn build(spec: &FamilySpec, grid: &GridSpec, policy: &NumericPolicy) -> Result<Self> {
        let x_max = grid.x_max();
        let b = (0..=x_max).map(|x| spec.b(x as f64)).collect();
        let d = (0..=x_max).map(|x| spec.d(x as f64)).collect();
        Self::from_potentials(b, d, 0.0, policy)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.diag[r]
            } else if r + 1 == c {
                self.offdiag[r]
            } else if c + 1 == r {
                self.offdiag[c]
            } else {
                0.0
            }
        })
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|x| {
                let mut acc = self.diag[x] * v[x];
                if x + 1 < n {
                    acc += self.offdiag[x] * v[x + 1];
                }
                if x > 0 {
                    acc += self.offdiag[x - 1] * v[x - 1];
                }
                acc
            })
            .collect()
    }

    /// Eigenpairs, computed once even under concurrent first access.
    pub fn eigensystem(&self) -> Result<&Eigensystem> {
        self.eigen
            .get_or_init(|| {
                let (mut values, mut vectors) = tridiagonal_eigen(&self.diag, &self.offdiag)?;
                for v in values.iter_mut() {
                    if v.abs() <= self.zero_window {
                        *v = 0.0;
                    }
                }
                for k in 0..vectors.ncols() {
                    let lead = vectors.column(k).iter().copied().find(|v| *v != 0.0).unwrap_or(1.0);
                    if lead < 0.0 {
                        vectors.column_mut(k).neg_mut();
                    }
                }
                Ok(Eigensystem { values, vectors })
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// `phi_0(x) = sqrt(prod_{y<x} B(y)/D(y+1))` accumulated in log space.
pub fn ground_state(spec: &FamilySpec, grid: &GridSpec) -> WaveFunction {
    let mut logs = Vec::with_capacity(grid.dim());
    let mut acc = 0.0f64;
    logs.push(0.0);
    for y in 0..grid.x_max() {
        acc += 0.5 * (spec.b(y as f64) / spec.d(y as f64 + 1.0)).ln();
        logs.push(acc);
    }
    WaveFunction {
        values: logs.iter().map(|l| l.exp()).collect(),
        log_scale: Some(logs),
    }
}

/// `A` and `A^T` as dense matrices.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub a: DMatrix<f64>,
    pub a_dag: DMatrix<f64>,
}

impl Factorization {
    /// `||A^T A + offset - H||_inf`.
    pub fn reassembly_residual(&self, sys: &JacobiSystem) -> f64 {
        let n = sys.dim();
        let h = &self.a_dag * &self.a + DMatrix::identity(n, n) * sys.offset();
        inf_norm(&(h - sys.matrix()))
    }
}

pub fn factorize(sys: &JacobiSystem, policy: &NumericPolicy) -> Result<Factorization> {
    let n = sys.dim();
    let root = |v: f64, x: usize| {
        if v < -policy.positivity_tol {
            Err(DqmError::NegativePotential { x, value: v })
        } else {
            Ok(v.max(0.0).sqrt())
        }
    };
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = root(sys.b()[x], x)?;
        if x + 1 < n {
            a[(x, x + 1)] = -root(sys.d()[x + 1], x + 1)?;
        }
    }
    let a_dag = a.transpose();
    Ok(Factorization { a, a_dag })
}

/// `A f` with `f` zero beyond the grid.
pub fn apply_a(b: &[f64], d: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|x| {
            let next = if x + 1 < n { d[x + 1].sqrt() * f[x + 1] } else { 0.0 };
            b[x].sqrt() * f[x] - next
        })
        .collect()
}

/// The similarity-transformed operator `phi_0^{-1} H phi_0`, acting on
/// functions by `B(x)(f(x) - f(x+1)) + D(x)(f(x) - f(x-1))`.
#[derive(Clone, Debug)]
pub struct SimilarityTransformed {
    b: Vec<f64>,
    d: Vec<f64>,
}

impl SimilarityTransformed {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.b.len();
        (0..n)
            .map(|x| {
                let up = if x + 1 < n { f[x] - f[x + 1] } else { f[x] };
                let down = if x > 0 { f[x] - f[x - 1] } else { f[x] };
                self.b[x] * up + self.d[x] * down
            })
            .collect()
    }

    /// Dense form: diagonal `B + D`, `[x][x+1] = -B(x)`, `[x][x-1] = -D(x)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.b.len();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.b[r] + self.d[r]
            } else if r + 1 == c {
                -self.b[r]
            } else if c + 1 == r {
                -self.d[r]
            } else {
                0.0
            }
        })
    }
}

/// `phi_0^{-1} H phi_0` for a system whose ground state is `phi0`. The rates
/// are recovered from the system; `phi0` is only checked for positivity.
pub fn similarity_transform(sys: &JacobiSystem, phi0: &WaveFunction) -> Result<SimilarityTransformed> {
    if let Some((x, &v)) = phi0.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(DqmError::PositivityFailure { x, value: v });
    }
    Ok(SimilarityTransformed {
        b: sys.b().to_vec(),
        d: sys.d().to_vec(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub family: String,
    pub lambda: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub max_residual: f64,
}

/// Eigenvalues of the assembled matrix against `E(n)`; the residual is
/// relative to `max(1, |E(n)|)`.
pub fn spectrum_report(spec: &FamilySpec, grid: &GridSpec, policy: &NumericPolicy) -> Result<SpectrumReport> {
    let sys = JacobiSystem::build(spec, grid, policy)?;
    let eig = sys.eigensystem()?;
    let closed: Vec<f64> = (0..sys.dim()).map(|n| spec.energy(n)).collect();
    let max_residual = if grid.is_finite() {
        eig.values
            .iter()
            .zip(&closed)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    } else {
        // Truncation only resolves the low-lying part of the spectrum.
        eig.values
            .iter()
            .zip(&closed)
            .take(grid.resolved_levels())
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    };
    Ok(SpectrumReport {
        family: spec.id().to_string(),
        lambda: spec.params().values(),
        n: grid.x_max(),
        eigenvalues: eig.values.clone(),
        closed_form: closed,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dqqk() -> (FamilySpec, GridSpec) {
        let spec = FamilySpec::default_for(FamilyId::DualQuantumQKrawtchouk);
        let grid = spec.validated(&NumericPolicy::default()).unwrap();
        (spec, grid)
    }

    #[test]
    fn dqqk_spectrum() {
        let (spec, grid) = dqqk();
        let sys = JacobiSystem::build(&spec, &grid, &NumericPolicy::default()).unwrap();
        let eig = sys.eigensystem().unwrap();
        for (v, e) in eig.values.iter().zip([0.0, 1.0, 3.0, 7.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_site_is_zero() {
        let policy = NumericPolicy::default();
        let sys = JacobiSystem::from_potentials(vec![0.0], vec![0.0], 0.0, &policy).unwrap();
        assert_eq!(sys.matrix(), DMatrix::zeros(1, 1));
        assert_eq!(sys.eigensystem().unwrap().values, vec![0.0]);
    }

    #[test]
    fn boundary_offdiag_nonzero() {
        let (spec, grid) = dqqk();
        let sys = JacobiSystem::build(&spec, &grid, &NumericPolicy::default()).unwrap();
        assert!(sys.offdiag()[grid.x_max() - 1] != 0.0);
        assert!(spec.d(grid.x_max() as f64) > 0.0);
    }

    #[test]
    fn toy_factorization() {
        let policy = NumericPolicy::default();
        let sys = JacobiSystem::from_potentials(vec![1.0, 0.0], vec![0.0, 1.0], 0.0, &policy).unwrap();
        let f = factorize(&sys, &policy).unwrap();
        assert_eq!(f.a, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]));
        assert_eq!(f.reassembly_residual(&sys), 0.0);
    }

    #[test]
    fn partner_loses_last_entry() {
        let (spec, grid) = dqqk();
        let policy = NumericPolicy::default();
        let sys = JacobiSystem::build(&spec, &grid, &policy).unwrap();
        let f = factorize(&sys, &policy).unwrap();
        let partner = &f.a * &f.a_dag;
        let n = sys.dim();
        assert!(partner[(n - 1, n - 1)].abs() <= 1e-10);
        assert!(f.reassembly_residual(&sys) <= 1e-10);
    }

    #[test]
    fn ground_state_is_zero_mode() {
        let (spec, grid) = dqqk();
        let policy = NumericPolicy::default();
        let sys = JacobiSystem::build(&spec, &grid, &policy).unwrap();
        let g = ground_state(&spec, &grid);
        assert_eq!(g.values[0], 1.0);
        let a = apply_a(sys.b(), sys.d(), &g.values);
        assert!(a.iter().all(|v| v.abs() <= 1e-10));
        assert!(sys.apply(&g.values).iter().all(|v| v.abs() <= 1e-10));
        let eig = sys.eigensystem().unwrap();
        assert!(g.misalignment(&eig.vector(0)) < 1e-12);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let spec = FamilySpec::default_for(FamilyId::Hahn);
        let policy = NumericPolicy::default();
        let grid = spec.validated(&policy).unwrap();
        let sys = JacobiSystem::build(&spec, &grid, &policy).unwrap();
        let v = &sys.eigensystem().unwrap().vectors;
        let gram = v.transpose() * v;
        assert!((gram - DMatrix::identity(sys.dim(), sys.dim())).amax() <= 1e-10);
    }

    #[test]
    fn similarity_transform_acts_on_polynomials() {
        let spec = FamilySpec::default_for(FamilyId::Racah);
        let policy = NumericPolicy::default();
        let grid = spec.validated(&policy).unwrap();
        let sys = JacobiSystem::build(&spec, &grid, &policy).unwrap();
        let ht = similarity_transform(&sys, &ground_state(&spec, &grid)).unwrap();
        let ones = vec![1.0; sys.dim()];
        assert!(ht.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        for n in 1..4 {
            let p: Vec<f64> = (0..sys.dim()).map(|x| spec.poly(n, x as f64)).collect();
            let hp = ht.apply(&p);
            let e = spec.energy(n);
            for (a, b) in hp.iter().zip(&p) {
                assert!((a - e * b).abs() <= 1e-10 * e.max(1.0) * b.abs().max(1.0));
            }
        }
        let mut ev: Vec<f64> = ht.matrix().complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&sys.eigensystem().unwrap().values) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn spectrum_report_serializes() {
        let (spec, grid) = dqqk();
        let r = spectrum_report(&spec, &grid, &NumericPolicy::default()).unwrap();
        assert!(r.max_residual <= 1e-10);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["N"], 3);
        assert_eq!(json["family"], "dual_quantum_q_krawtchouk");
    }

    #[test]
    fn eigensystem_is_shared_across_threads() {
        let (spec, grid) = dqqk();
        let sys = JacobiSystem::build(&spec, &grid, &NumericPolicy::default()).unwrap();
        let ptrs: Vec<usize> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..4)
                .map(|_| s.spawn(|| sys.eigensystem().unwrap() as *const Eigensystem as usize))
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(ptrs.windows(2).all(|w| w[0] == w[1]));
    }

    proptest! {
        #[test]
        fn finite_spectra_match_energies(family in 0usize..5, n in 2usize..=12) {
            let id = [FamilyId::Krawtchouk, FamilyId::Hahn, FamilyId::Racah,
                      FamilyId::QRacah, FamilyId::DualQuantumQKrawtchouk][family];
            let base = FamilySpec::default_for(id);
            let spec = match id {
                FamilyId::DualQuantumQKrawtchouk => base.with_override("N", n as f64).unwrap()
                    .with_override("p", 2f64.powi(n as i32) * 4.0).unwrap(),
                FamilyId::QRacah => base.with_override("N", n as f64).unwrap(),
                FamilyId::Racah => base.with_override("N", n as f64).unwrap()
                    .with_override("b", n as f64 + 3.5).unwrap(),
                _ => base.with_override("N", n as f64).unwrap(),
            };
            let policy = NumericPolicy::default();
            let grid = spec.validated(&policy).unwrap();
            let r = spectrum_report(&spec, &grid, &policy).unwrap();
            prop_assert!(r.max_residual <= 1e-8, "{id}: {}", r.max_residual);
            let sys = JacobiSystem::build(&spec, &grid, &policy).unwrap();
            let f = factorize(&sys, &policy).unwrap();
            prop_assert!(f.reassembly_residual(&sys) <= 1e-10);
            let g = ground_state(&spec, &grid);
            prop_assert!(g.values.iter().all(|v| *v > 0.0));
        }
    }
}
