//! Birth-and-death processes driven by a Jacobi system.
//!
//! The rates `B(x)` (birth) and `D(x)` (death) define the generator
//! `L f(x) = B(x)(f(x+1) - f(x)) + D(x)(f(x-1) - f(x))`. Its rows sum to zero,
//! which fixes `L = -H~` with `H~ = phi_0^{-1} (H - E_0) phi_0` the
//! ground-state similarity transform of the Hamiltonian. The transition
//! kernel `p(x, y; t) = (e^{tL})_{xy}` is computed twice:
//!
//! - spectrally, `sum_n e^{-t (E_n - E_0)} v_n(x) v_n(y) phi_0(y) / phi_0(x)`
//!   from the tridiagonal eigenpairs `v_n` of `H`;
//! - by the scaled-and-squared matrix exponential of `tL`, assembled
//!   directly from the rates.
//!
//! On truncated grids the top site is made reflecting (`B(x_max) = 0`) so
//! that probability is conserved.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::adler::{hermiticity_report, DeletedSystem};
use crate::error::{DqmError, Result};
use crate::hamiltonian::JacobiSystem;
use crate::linalg::{inf_norm, tridiagonal_eigen};
use crate::params::NumericPolicy;
use crate::report::{Cell, Table};

/// A chain with nonnegative rates, irreducible on `[0, x_max]`.
#[derive(Clone, Debug)]
pub struct BirthDeathProcess {
    b: Vec<f64>,
    d: Vec<f64>,
    /// `ln phi_0(x)` with `phi_0(0) = 1`.
    log_ground: Vec<f64>,
    energies: Vec<f64>,
    /// Columns are the normalized eigenvectors of `H - E_0`.
    vectors: DMatrix<f64>,
}

impl BirthDeathProcess {
    pub fn new(mut b: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if b.len() != d.len() || b.is_empty() {
            return Err(DqmError::InvalidGrid(
                "B and D must be non-empty and share the grid".into(),
            ));
        }
        let n = b.len();
        b[n - 1] = 0.0;
        for x in 0..n {
            if b[x] < 0.0 || d[x] < 0.0 || !b[x].is_finite() || !d[x].is_finite() {
                return Err(DqmError::NonHermitianSystem(format!(
                    "rates must be finite and nonnegative, B({x}) = {:e}, D({x}) = {:e}",
                    b[x], d[x]
                )));
            }
        }
        if let Some(x) = (0..n - 1).find(|&x| b[x] == 0.0 || d[x + 1] == 0.0) {
            return Err(DqmError::PreconditionViolated(format!(
                "chain is reducible: B({x}) D({}) = 0",
                x + 1
            )));
        }
        let mut log_ground = Vec::with_capacity(n);
        let mut acc = 0.0f64;
        log_ground.push(0.0);
        for x in 0..n - 1 {
            acc += 0.5 * (b[x] / d[x + 1]).ln();
            log_ground.push(acc);
        }
        let diag: Vec<f64> = (0..n).map(|x| b[x] + d[x]).collect();
        let off: Vec<f64> = (0..n - 1).map(|x| -(b[x] * d[x + 1]).sqrt()).collect();
        let (mut energies, vectors) = tridiagonal_eigen(&diag, &off)?;
        // The exact ground energy is zero; the eigensolver's value is noise.
        let e0 = energies[0];
        for e in &mut energies {
            *e -= e0;
        }
        Ok(BirthDeathProcess {
            b,
            d,
            log_ground,
            energies,
            vectors,
        })
    }

    /// The rates of a hermitian Jacobi system.
    pub fn from_system(sys: &JacobiSystem) -> Result<Self> {
        Self::new(sys.b().to_vec(), sys.d().to_vec())
    }

    /// The rates of a deleted system; fails unless the system passes its
    /// hermiticity report.
    pub fn from_deleted(ds: &DeletedSystem, policy: &NumericPolicy) -> Result<Self> {
        let h = hermiticity_report(ds, policy);
        if !h.pass {
            return Err(DqmError::NonHermitianSystem(format!(
                "deleted system fails hermiticity (min B D product {:e}, asymmetry {:e})",
                h.min_product, h.asymmetry
            )));
        }
        Self::new(ds.b_bar.clone(), ds.d_bar.clone())
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Decay rates `E_n - E_0`, ascending; the first is zero.
    pub fn rates(&self) -> &[f64] {
        &self.energies
    }

    /// Rate matrix `L` with `L[x][x+1] = B(x)`, `L[x][x-1] = D(x)` and zero
    /// row sums.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut l = DMatrix::zeros(n, n);
        for x in 0..n {
            l[(x, x)] = -(self.b[x] + self.d[x]);
            if x + 1 < n {
                l[(x, x + 1)] = self.b[x];
            }
            if x > 0 {
                l[(x, x - 1)] = self.d[x];
            }
        }
        l
    }

    /// `pi(y) = phi_0(y)^2 / sum phi_0^2`.
    pub fn stationary(&self) -> Vec<f64> {
        let top = self.log_ground.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_ground.iter().map(|l| (2.0 * (l - top)).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn spectral_kernel(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let decay: Vec<f64> = self.energies.iter().map(|e| (-t * e).exp()).collect();
        DMatrix::from_fn(n, n, |x, y| {
            let s: f64 = (0..n)
                .map(|k| decay[k] * self.vectors[(x, k)] * self.vectors[(y, k)])
                .sum();
            s * (self.log_ground[y] - self.log_ground[x]).exp()
        })
    }

    pub fn expm_kernel(&self, t: f64) -> DMatrix<f64> {
        (self.generator() * t).exp()
    }

    /// The kernel at time `t` from the exponential route, with the spectral
    /// route's deviation attached.
    pub fn transition_kernel(&self, t: f64) -> Result<TransitionKernel> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(DqmError::PreconditionViolated(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        let p = self.expm_kernel(t);
        let spectral = self.spectral_kernel(t);
        let spectral_deviation = max_abs_diff(&p, &spectral);
        Ok(TransitionKernel {
            t,
            p,
            spectral_deviation,
        })
    }

    /// Kernels for several times, evaluated independently.
    pub fn kernels(&self, times: &[f64]) -> Result<Vec<TransitionKernel>> {
        crate::batch::try_map(times, |&t| self.transition_kernel(t))
    }

    /// `max |p(t) p(s) - p(t+s)|`.
    pub fn chapman_kolmogorov(&self, t: f64, s: f64) -> Result<f64> {
        let a = self.transition_kernel(t)?;
        let b = self.transition_kernel(s)?;
        let c = self.transition_kernel(t + s)?;
        Ok(max_abs_diff(&(&a.p * &b.p), &c.p))
    }

    /// Log-linear fit of `p(x, x; t) - pi(x)` over `times`, whose slope is
    /// minus the slowest surviving decay rate at state `x`.
    pub fn fit_decay_rate(&self, x: usize, times: &[f64]) -> Result<DecayRateReport> {
        if times.len() < 2 || x >= self.dim() {
            return Err(DqmError::PreconditionViolated(
                "need two times and x on the grid".into(),
            ));
        }
        let pi = self.stationary();
        let mut ts = Vec::with_capacity(times.len());
        let mut ys = Vec::with_capacity(times.len());
        for &t in times {
            let excess = self.expm_kernel(t)[(x, x)] - pi[x];
            if !(excess > 0.0) {
                return Err(DqmError::PreconditionViolated(format!(
                    "p(x,x;t) - pi(x) = {excess:e} at t = {t}; choose shorter times"
                )));
            }
            ts.push(t);
            ys.push(excess.ln());
        }
        let m = ts.len() as f64;
        let tm = ts.iter().sum::<f64>() / m;
        let ym = ys.iter().sum::<f64>() / m;
        let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
        let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = ym - slope * tm;
        let fit_residual = ts
            .iter()
            .zip(&ys)
            .map(|(t, y)| (y - intercept - slope * t).abs())
            .fold(0.0, f64::max);
        // The slowest mode that actually appears at x.
        let expected = (1..self.dim())
            .find(|&k| self.vectors[(x, k)].abs() > 1e-12)
            .map(|k| self.energies[k])
            .unwrap_or(0.0);
        Ok(DecayRateReport {
            x,
            times: times.to_vec(),
            rate: -slope,
            expected,
            spectrum: self.energies.clone(),
            fit_residual,
        })
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionKernel {
    pub t: f64,
    #[serde(serialize_with = "rows")]
    pub p: DMatrix<f64>,
    /// `max |p_expm - p_spectral|`.
    pub spectral_deviation: f64,
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<Vec<f64>> = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
    v.serialize(s)
}

impl TransitionKernel {
    pub fn row_sum_deviation(&self) -> f64 {
        (0..self.p.nrows())
            .map(|r| (self.p.row(r).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Whether all entries lie in `[-tol, 1 + tol]`.
    pub fn entries_in_range(&self, tol: f64) -> bool {
        self.p.iter().all(|v| *v >= -tol && *v <= 1.0 + tol)
    }

    /// `||p - I||_inf`, useful at `t = 0`.
    pub fn identity_deviation(&self) -> f64 {
        let n = self.p.nrows();
        inf_norm(&(&self.p - DMatrix::identity(n, n)))
    }

    /// Long-format `t,x,y,p` table.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["t", "x", "y", "p"]);
        for x in 0..self.p.nrows() {
            for y in 0..self.p.ncols() {
                table.push(vec![Cell::Num(self.t), x.into(), y.into(), Cell::Num(self.p[(x, y)])]);
            }
        }
        table
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRateReport {
    pub x: usize,
    pub times: Vec<f64>,
    pub rate: f64,
    /// The smallest nonzero rate of a mode present at `x`.
    pub expected: f64,
    pub spectrum: Vec<f64>,
    pub fit_residual: f64,
}
