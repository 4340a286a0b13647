//! Catalog of polynomial families of a discrete variable.
//!
//! Each [`FamilySpec`] carries closed forms for the rates `B(x)`, `D(x)`, the
//! energies `E(n)`, the sinusoidal coordinate `eta(x)`, the auxiliary
//! function `varphi(x)`, the eigenpolynomials `P_n(eta(x))` normalized by
//! `P_n(0) = 1`, and where available the deforming polynomials `xi_l` and the
//! normalization constants `d_n^2`.

mod catalog;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DqmError, Result};
use crate::hyper::{hyp_sum, poch, qhyp_sum, qpoch, qpoch_inf};
use crate::params::{GridSpec, NumericPolicy, Parameter, ParameterSet};

pub use catalog::{
    catalog_document, catalog_list, stub_list, CatalogDocument, CatalogEntry, ParameterDoc, RecurrenceMeta, StubEntry,
};
pub use table::{eval_potentials, polynomial_table, PolynomialTable, PotentialPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    Krawtchouk,
    Hahn,
    Racah,
    QRacah,
    Meixner,
    Charlier,
    DualQuantumQKrawtchouk,
    DualLittleQJacobi,
    DualAlternativeQCharlier,
}

impl FamilyId {
    pub const ALL: [FamilyId; 9] = [
        FamilyId::Krawtchouk,
        FamilyId::Hahn,
        FamilyId::Racah,
        FamilyId::QRacah,
        FamilyId::Meixner,
        FamilyId::Charlier,
        FamilyId::DualQuantumQKrawtchouk,
        FamilyId::DualLittleQJacobi,
        FamilyId::DualAlternativeQCharlier,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyId::Krawtchouk => "krawtchouk",
            FamilyId::Hahn => "hahn",
            FamilyId::Racah => "racah",
            FamilyId::QRacah => "q_racah",
            FamilyId::Meixner => "meixner",
            FamilyId::Charlier => "charlier",
            FamilyId::DualQuantumQKrawtchouk => "dual_quantum_q_krawtchouk",
            FamilyId::DualLittleQJacobi => "dual_little_q_jacobi",
            FamilyId::DualAlternativeQCharlier => "dual_alternative_q_charlier",
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(
            self,
            FamilyId::Krawtchouk
                | FamilyId::Hahn
                | FamilyId::Racah
                | FamilyId::QRacah
                | FamilyId::DualQuantumQKrawtchouk
        )
    }

    pub fn finite() -> impl Iterator<Item = FamilyId> {
        FamilyId::ALL.into_iter().filter(|f| f.is_finite())
    }

    /// Entries negated by the twist used in the deforming-polynomial closed
    /// form, for families where that closed form is a twisted eigenpolynomial.
    pub fn twist_mask(&self) -> Option<&'static [bool]> {
        match self {
            FamilyId::Racah | FamilyId::QRacah => Some(&[true, true, true, true]),
            FamilyId::Hahn => Some(&[true, true, true]),
            FamilyId::Krawtchouk => Some(&[false, true]),
            FamilyId::Meixner => Some(&[true, false]),
            FamilyId::Charlier => Some(&[true]),
            _ => None,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = DqmError;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| DqmError::UnknownFamily(s.to_string()))
    }
}

/// A family together with a concrete parameter set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilySpec {
    id: FamilyId,
    params: ParameterSet,
    #[serde(skip)]
    v: Vec<f64>,
    #[serde(skip)]
    q: f64,
}

impl FamilySpec {
    /// Builds a spec after checking the parameter vector has the family's
    /// shape. Domain constraints are checked by [`FamilySpec::validate`].
    pub fn new(id: FamilyId, params: ParameterSet) -> Result<Self> {
        let expected = default_params(id);
        let names: Vec<&str> = params.entries().iter().map(|p| p.name.as_str()).collect();
        let want: Vec<&str> = expected.entries().iter().map(|p| p.name.as_str()).collect();
        if names != want {
            return Err(DqmError::out_of_domain(
                id.as_str(),
                format!("expected parameters {want:?}, got {names:?}"),
            ));
        }
        if params.q().is_some() != expected.q().is_some() {
            return Err(DqmError::out_of_domain("q", "base q presence must match family"));
        }
        let spec = FamilySpec::unchecked(id, params);
        if let Some(n) = spec.declared_size_raw() {
            if !(n >= 0.0 && n.fract() == 0.0) {
                return Err(DqmError::out_of_domain("N", "N must be a non-negative integer"));
            }
        }
        Ok(spec)
    }

    fn unchecked(id: FamilyId, params: ParameterSet) -> Self {
        let v = params.values();
        let q = params.q().unwrap_or(1.0);
        FamilySpec { id, params, v, q }
    }

    /// Documented default parameters.
    pub fn default_for(id: FamilyId) -> Self {
        FamilySpec::unchecked(id, default_params(id))
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa()
    }

    pub fn q(&self) -> Option<f64> {
        self.params.q()
    }

    pub fn is_finite(&self) -> bool {
        self.id.is_finite()
    }

    /// `lambda + s * delta`.
    pub fn shifted(&self, s: usize) -> Self {
        FamilySpec::unchecked(self.id, self.params.shifted(s))
    }

    fn declared_size_raw(&self) -> Option<f64> {
        let p = &self.params;
        match self.id {
            FamilyId::Krawtchouk => Some(p.raw(1)),
            FamilyId::Hahn => Some(p.raw(2)),
            FamilyId::Racah | FamilyId::QRacah => Some(-p.raw(0)),
            FamilyId::DualQuantumQKrawtchouk => Some(p.raw(1)),
            _ => None,
        }
    }

    /// `N` for finite families.
    pub fn finite_size(&self) -> Option<usize> {
        self.declared_size_raw().map(|n| n.round().max(0.0) as usize)
    }

    fn qp(&self, e: f64) -> f64 {
        self.q.powf(e)
    }

    /// Birth rate `B(x)`.
    pub fn b(&self, x: f64) -> f64 {
        let v = &self.v;
        match self.id {
            FamilyId::Racah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                -(x + a) * (x + b) * (x + c) * (x + d) / ((2.0 * x + d) * (2.0 * x + 1.0 + d))
            }
            FamilyId::Hahn => (x + v[0]) * (v[2] - x),
            FamilyId::Krawtchouk => v[0] * (v[1] - x),
            FamilyId::QRacah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                let qx = self.qp(x);
                -(1.0 - a * qx) * (1.0 - b * qx) * (1.0 - c * qx) * (1.0 - d * qx)
                    / ((1.0 - d * qx * qx) * (1.0 - d * qx * qx * self.q))
            }
            FamilyId::Meixner => v[1] * (x + v[0]) / (1.0 - v[1]),
            FamilyId::Charlier => v[0],
            FamilyId::DualQuantumQKrawtchouk => {
                let (p, qn) = (v[0], v[1]);
                self.qp(-x - 1.0) / (qn * p) * (1.0 - qn * self.qp(-x))
            }
            FamilyId::DualLittleQJacobi => {
                let (a, b) = (v[0], v[1]);
                let ab = a * b;
                a * self.qp(2.0 * x + 1.0) * (1.0 - b * self.qp(x + 1.0)) * (1.0 - ab * self.qp(x + 1.0))
                    / ((1.0 - ab * self.qp(2.0 * x + 1.0)) * (1.0 - ab * self.qp(2.0 * x + 2.0)))
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                a * self.qp(3.0 * x + 1.0) * (1.0 + a * self.qp(x))
                    / ((1.0 + a * self.qp(2.0 * x)) * (1.0 + a * self.qp(2.0 * x + 1.0)))
            }
        }
    }

    /// Death rate `D(x)`.
    pub fn d(&self, x: f64) -> f64 {
        let v = &self.v;
        match self.id {
            FamilyId::Racah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                -(x + d - a) * (x + d - b) * (x + d - c) * x / ((2.0 * x - 1.0 + d) * (2.0 * x + d))
            }
            FamilyId::Hahn => x * (v[1] + v[2] - x),
            FamilyId::Krawtchouk => (1.0 - v[0]) * x,
            FamilyId::QRacah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                let at = a * b * c / (d * self.q);
                let qx = self.qp(x);
                -at * (1.0 - d * qx / a) * (1.0 - d * qx / b) * (1.0 - d * qx / c) * (1.0 - qx)
                    / ((1.0 - d * qx * qx / self.q) * (1.0 - d * qx * qx))
            }
            FamilyId::Meixner => x / (1.0 - v[1]),
            FamilyId::Charlier => x,
            FamilyId::DualQuantumQKrawtchouk => {
                let p = v[0];
                let qmx = self.qp(-x);
                qmx * (1.0 - self.qp(x)) * (1.0 - qmx / p)
            }
            FamilyId::DualLittleQJacobi => {
                let (a, b) = (v[0], v[1]);
                let ab = a * b;
                (1.0 - self.qp(x)) * (1.0 - a * self.qp(x))
                    / ((1.0 - ab * self.qp(2.0 * x)) * (1.0 - ab * self.qp(2.0 * x + 1.0)))
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                (1.0 - self.qp(x)) / ((1.0 + a * self.qp(2.0 * x - 1.0)) * (1.0 + a * self.qp(2.0 * x)))
            }
        }
    }

    /// Energy `E(n)`.
    pub fn energy(&self, n: usize) -> f64 {
        let v = &self.v;
        let nf = n as f64;
        match self.id {
            FamilyId::Racah => nf * (nf + v[0] + v[1] + v[2] - v[3] - 1.0),
            FamilyId::Hahn => nf * (nf + v[0] + v[1] - 1.0),
            FamilyId::Krawtchouk | FamilyId::Meixner | FamilyId::Charlier => nf,
            FamilyId::QRacah => {
                let at = v[0] * v[1] * v[2] / (v[3] * self.q);
                (self.qp(-nf) - 1.0) * (1.0 - at * self.qp(nf))
            }
            FamilyId::DualQuantumQKrawtchouk => self.qp(-nf) - 1.0,
            FamilyId::DualLittleQJacobi | FamilyId::DualAlternativeQCharlier => 1.0 - self.qp(nf),
        }
    }

    /// Sinusoidal coordinate `eta(x)`.
    pub fn eta(&self, x: f64) -> f64 {
        let v = &self.v;
        match self.id {
            FamilyId::Racah => x * (x + v[3]),
            FamilyId::Hahn | FamilyId::Krawtchouk | FamilyId::Meixner | FamilyId::Charlier => x,
            FamilyId::QRacah => (self.qp(-x) - 1.0) * (1.0 - v[3] * self.qp(x)),
            FamilyId::DualQuantumQKrawtchouk => 1.0 - self.qp(x),
            FamilyId::DualLittleQJacobi => (self.qp(-x) - 1.0) * (1.0 - v[0] * v[1] * self.qp(x + 1.0)),
            FamilyId::DualAlternativeQCharlier => (self.qp(-x) - 1.0) * (1.0 + v[0] * self.qp(x)),
        }
    }

    /// `eta(x; lambda + s delta)`.
    pub fn eta_shifted(&self, x: f64, s: usize) -> f64 {
        if s == 0 {
            self.eta(x)
        } else {
            self.shifted(s).eta(x)
        }
    }

    /// Coefficient of `eta` in `P_1(eta)`.
    pub fn c1(&self) -> f64 {
        (self.poly(1, 1.0) - 1.0) / self.eta(1.0)
    }

    /// `phi_0(x)^2 = prod_{y<x} B(y)/D(y+1)`, accumulated in log space.
    pub fn ground_state_sq(&self, x: usize) -> f64 {
        (0..x)
            .map(|y| (self.b(y as f64) / self.d(y as f64 + 1.0)).ln())
            .sum::<f64>()
            .exp()
    }

    /// Auxiliary function `varphi(x) = (eta(x+1) - eta(x)) / eta(1)` in
    /// closed form.
    pub fn varphi(&self, x: f64) -> f64 {
        let v = &self.v;
        match self.id {
            FamilyId::Racah => (2.0 * x + v[3] + 1.0) / (v[3] + 1.0),
            FamilyId::Hahn | FamilyId::Krawtchouk | FamilyId::Meixner | FamilyId::Charlier => 1.0,
            FamilyId::QRacah => {
                let d = v[3];
                self.qp(-x) * (1.0 - d * self.qp(2.0 * x + 1.0)) / (1.0 - d * self.q)
            }
            FamilyId::DualQuantumQKrawtchouk => self.qp(x),
            FamilyId::DualLittleQJacobi => {
                let ab = v[0] * v[1];
                (self.qp(-x) - ab * self.qp(x + 2.0)) / (1.0 - ab * self.q * self.q)
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                (self.qp(-x) + a * self.qp(x + 1.0)) / (1.0 + a * self.q)
            }
        }
    }

    /// Eigenpolynomial `P_n(eta(x))` from its terminating hypergeometric
    /// series, normalized so that the value at `x = 0` is one.
    pub fn poly(&self, n: usize, x: f64) -> f64 {
        let v = &self.v;
        let nf = n as f64;
        let q = self.q;
        match self.id {
            FamilyId::Racah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                let at = a + b + c - d - 1.0;
                hyp_sum(&[-nf, nf + at, -x, x + d], &[a, b, c], 1.0, n)
            }
            FamilyId::Hahn => {
                let (a, b, big_n) = (v[0], v[1], v[2]);
                hyp_sum(&[-nf, nf + a + b - 1.0, -x], &[a, -big_n], 1.0, n)
            }
            FamilyId::Krawtchouk => hyp_sum(&[-nf, -x], &[-v[1]], 1.0 / v[0], n),
            FamilyId::QRacah => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                let at = a * b * c / (d * q);
                qhyp_sum(
                    &[self.qp(-nf), at * self.qp(nf), self.qp(-x), d * self.qp(x)],
                    &[a, b, c],
                    q,
                    q,
                    n,
                )
            }
            FamilyId::Meixner => hyp_sum(&[-nf, -x], &[v[0]], 1.0 - 1.0 / v[1], n),
            FamilyId::Charlier => hyp_sum(&[-nf, -x], &[], -1.0 / v[0], n),
            FamilyId::DualQuantumQKrawtchouk => {
                let (p, qn) = (v[0], v[1]);
                qhyp_sum(&[self.qp(-nf), self.qp(-x)], &[1.0 / qn], q, p * self.qp(x + 1.0), n)
            }
            FamilyId::DualLittleQJacobi => {
                let (a, b) = (v[0], v[1]);
                qhyp_sum(
                    &[self.qp(-nf), self.qp(-x), a * b * self.qp(x + 1.0)],
                    &[b * q],
                    q,
                    self.qp(nf) / a,
                    n,
                )
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                qhyp_sum(
                    &[self.qp(-nf), self.qp(-x), -a * self.qp(x)],
                    &[],
                    q,
                    -self.qp(nf) / a,
                    n,
                )
            }
        }
    }

    /// Closed-form deforming polynomial `xi_l(x)` for the deletion of levels
    /// `1..=l`.
    pub fn xi_closed(&self, l: usize, x: f64) -> Result<f64> {
        if l == 0 {
            return Ok(1.0);
        }
        if let Some(mask) = self.id.twist_mask() {
            let base = self.params.shifted(l - 1).twisted(mask);
            let twisted = FamilySpec::unchecked(self.id, base);
            return Ok(twisted.poly(l, -x));
        }
        let v = &self.v;
        let q = self.q;
        let lf = l as f64;
        let ql = self.qp(-lf);
        match self.id {
            FamilyId::DualQuantumQKrawtchouk => {
                let (p, qn) = (v[0], v[1]);
                Ok(qhyp_sum(&[ql, self.qp(x)], &[qn * self.qp(1.0 - lf)], q, p * qn * q, l))
            }
            FamilyId::DualLittleQJacobi => {
                let (a, b) = (v[0], v[1]);
                Ok(qhyp_sum(
                    &[ql, self.qp(x), self.qp(-x - lf) / (a * b)],
                    &[ql / b, 0.0],
                    q,
                    q,
                    l,
                ))
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                Ok(qhyp_sum(
                    &[ql, self.qp(x), -self.qp(1.0 - x - lf) / a],
                    &[0.0, 0.0],
                    q,
                    q,
                    l,
                ))
            }
            _ => Err(DqmError::NotImplementedForFamily {
                family: self.id.to_string(),
                what: "deforming polynomial closed form".into(),
            }),
        }
    }

    /// Closed-form `d_n^2`, when known.
    pub fn d_sq_closed(&self, n: usize, policy: &NumericPolicy) -> Option<f64> {
        let v = &self.v;
        let q = self.q;
        let nf = n as f64;
        let tol = policy.tail_tol * 1e-4;
        match self.id {
            FamilyId::Krawtchouk => {
                let (p, big_n) = (v[0], v[1]);
                let nn = self.finite_size()?;
                (n <= nn).then(|| binomial(nn, n) * (p / (1.0 - p)).powi(n as i32) * (1.0 - p).powf(big_n))
            }
            FamilyId::Meixner => {
                let (beta, c) = (v[0], v[1]);
                Some(poch(beta, n) * c.powi(n as i32) / factorial(n) * (1.0 - c).powf(beta))
            }
            FamilyId::Charlier => {
                let a = v[0];
                Some(a.powi(n as i32) / factorial(n) * (-a).exp())
            }
            FamilyId::DualQuantumQKrawtchouk => {
                let p = v[0];
                let nn = self.finite_size()?;
                if n > nn {
                    return None;
                }
                let big_n = nn as f64;
                let base = 1.0 / (p * self.qp(big_n));
                Some(
                    qpoch(q, q, nn) / (qpoch(q, q, n) * qpoch(q, q, nn - n))
                        * p.powf(-nf)
                        * self.qp(nf * (nf - 1.0 - big_n))
                        / qpoch(base, q, n)
                        * qpoch(base, q, nn),
                )
            }
            FamilyId::DualLittleQJacobi => {
                let (a, b) = (v[0], v[1]);
                Some(
                    qpoch(b * q, q, n) / qpoch(q, q, n) * (a * q).powi(n as i32) * qpoch_inf(a * q, q, tol)
                        / qpoch_inf(a * b * q * q, q, tol),
                )
            }
            FamilyId::DualAlternativeQCharlier => {
                let a = v[0];
                Some(a.powi(n as i32) * self.qp(nf * (nf + 1.0) / 2.0) / qpoch(q, q, n) / qpoch_inf(-a * q, q, tol))
            }
            _ => None,
        }
    }

    /// Forward and backward shift factors `(f_n, b_{n-1})`. With the
    /// normalization `P_n(0) = 1` the difference equation at `x = 0` forces
    /// `f_n = E(n)` and `b_{n-1} = 1` for every family in the catalog.
    pub fn shift_factors(&self, n: usize) -> (f64, f64) {
        (self.energy(n), 1.0)
    }

    /// Checks the family's parameter domain together with the positivity of
    /// the rates on `grid`.
    pub fn validate(&self, grid: &GridSpec, policy: &NumericPolicy) -> Result<()> {
        self.validate_named()?;
        if self.is_finite() != grid.is_finite() {
            return Err(DqmError::InvalidGrid(format!(
                "{} requires a {} grid",
                self.id,
                if self.is_finite() { "finite" } else { "truncated" }
            )));
        }
        if let Some(n) = self.finite_size() {
            if grid.x_max() != n {
                return Err(DqmError::InvalidGrid(format!(
                    "finite grid size {} differs from N = {n}",
                    grid.x_max()
                )));
            }
        }
        let x_max = grid.x_max();
        if self.d(0.0).abs() > policy.positivity_tol {
            return Err(DqmError::out_of_domain("D", "D(0) = 0"));
        }
        for x in 0..x_max {
            let b = self.b(x as f64);
            if !(b > 0.0) || !b.is_finite() {
                return Err(DqmError::out_of_domain(
                    "B",
                    format!("B(x) > 0 for 0 <= x < x_max (fails at x = {x}, B = {b:e})"),
                ));
            }
        }
        for x in 1..=x_max {
            let d = self.d(x as f64);
            if !(d > 0.0) || !d.is_finite() {
                return Err(DqmError::out_of_domain(
                    "D",
                    format!("D(x) > 0 for 1 <= x <= x_max (fails at x = {x}, D = {d:e})"),
                ));
            }
        }
        if grid.is_finite() {
            let top = self.b(x_max as f64);
            if top.abs() > policy.positivity_tol * self.b(0.0).abs().max(1.0) {
                return Err(DqmError::out_of_domain("B", "B(x_max) = 0 on a finite grid"));
            }
        }
        for n in 0..grid.n_max() {
            if !(self.energy(n + 1) > self.energy(n)) {
                return Err(DqmError::out_of_domain(
                    "E",
                    format!("E(n) strictly increasing (fails at n = {n})"),
                ));
            }
        }
        Ok(())
    }

    fn validate_named(&self) -> Result<()> {
        let v = &self.v;
        let positive = |name: &str, val: f64| {
            if val > 0.0 {
                Ok(())
            } else {
                Err(DqmError::out_of_domain(name, format!("{name} > 0")))
            }
        };
        match self.id {
            FamilyId::Krawtchouk => {
                if !(v[0] > 0.0 && v[0] < 1.0) {
                    return Err(DqmError::out_of_domain("p", "0 < p < 1"));
                }
            }
            FamilyId::Hahn => {
                positive("a", v[0])?;
                positive("b", v[1])?;
            }
            FamilyId::Racah | FamilyId::QRacah => {}
            FamilyId::Meixner => {
                positive("beta", v[0])?;
                if !(v[1] > 0.0 && v[1] < 1.0) {
                    return Err(DqmError::out_of_domain("c", "0 < c < 1"));
                }
            }
            FamilyId::Charlier => positive("a", v[0])?,
            FamilyId::DualQuantumQKrawtchouk => {
                let bound = 1.0 / v[1];
                if !(v[0] > bound) {
                    return Err(DqmError::out_of_domain("p", format!("p > q^-N = {bound}")));
                }
            }
            FamilyId::DualLittleQJacobi => {
                if !(v[0] > 0.0 && v[0] * self.q < 1.0) {
                    return Err(DqmError::out_of_domain("a", "0 < a < 1/q"));
                }
                if !(v[1] > 0.0 && v[1] * self.q < 1.0) {
                    return Err(DqmError::out_of_domain("b", "0 < b < 1/q"));
                }
            }
            FamilyId::DualAlternativeQCharlier => positive("a", v[0])?,
        }
        Ok(())
    }

    /// Natural grid: `N` for finite families, otherwise the smallest cutoff
    /// (at least [`crate::params::MIN_CUTOFF`]) beyond which the ground-state
    /// weight, inflated by `(1 + |eta|)^(2 TAIL_DEGREE)` so that low-degree
    /// polynomial moments are resolved too, is below `tail_tol` relative to
    /// the accumulated total.
    pub fn default_grid(&self, policy: &NumericPolicy) -> Result<GridSpec> {
        if let Some(n) = self.finite_size() {
            return Ok(GridSpec::finite(n));
        }
        const CAP: usize = 4000;
        let mut log_w = 0.0f64;
        let mut total = 1.0f64;
        for x in 0..CAP {
            log_w += (self.b(x as f64) / self.d(x as f64 + 1.0)).ln();
            let w = log_w.exp();
            total += w;
            let cutoff = x + 1;
            let moment = (1.0 + self.eta(cutoff as f64).abs()).powi(2 * crate::params::TAIL_DEGREE as i32);
            if cutoff >= crate::params::MIN_CUTOFF && w * moment / total <= policy.tail_tol {
                return GridSpec::truncated(cutoff);
            }
        }
        Err(DqmError::InvalidGrid(format!(
            "ground-state tail of {} does not fall below {} within {CAP} sites",
            self.id, policy.tail_tol
        )))
    }

    /// Validated spec on its natural grid.
    pub fn validated(&self, policy: &NumericPolicy) -> Result<GridSpec> {
        let grid = self.default_grid(policy)?;
        self.validate(&grid, policy)?;
        Ok(grid)
    }

    /// Changes one user-facing parameter. `N` addresses the size parameter of
    /// finite families, `q` the base (other q-power entries keep their value,
    /// the size exponent keeps its integer).
    pub fn with_override(&self, name: &str, value: f64) -> Result<Self> {
        let p = &self.params;
        let mut next;
        match (self.id, name) {
            (_, "q") => {
                if p.q().is_none() {
                    return Err(DqmError::out_of_domain("q", format!("{} has no base q", self.id)));
                }
                let kappa = kappa_for(self.id, value);
                let values = p.values();
                next = p.with_q(value, kappa)?;
                for (i, e) in p.entries().iter().enumerate() {
                    let keeps_exponent = matches!(
                        (self.id, e.name.as_str()),
                        (FamilyId::QRacah, "a") | (FamilyId::DualQuantumQKrawtchouk, "qN")
                    );
                    if matches!(e.value, crate::params::ParamValue::QPower { .. }) && !keeps_exponent {
                        next = next.with_value(i, values[i])?;
                    }
                }
            }
            (FamilyId::Racah, "N") => next = p.with_raw(0, -value),
            (FamilyId::QRacah, "N") => next = p.with_raw(0, -value),
            (FamilyId::DualQuantumQKrawtchouk, "N") => next = p.with_raw(1, value),
            _ => {
                let i = p.index_of(name).ok_or_else(|| {
                    DqmError::out_of_domain(
                        name,
                        format!(
                            "not a parameter of {} (parameters: {})",
                            self.id,
                            self.user_parameter_names().join(", ")
                        ),
                    )
                })?;
                next = p.with_value(i, value)?;
            }
        }
        FamilySpec::new(self.id, next)
    }

    /// Names accepted by [`FamilySpec::with_override`].
    pub fn user_parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .params
            .entries()
            .iter()
            .filter(|e| e.name != "qN")
            .map(|e| e.name.clone())
            .collect();
        if matches!(
            self.id,
            FamilyId::Racah | FamilyId::QRacah | FamilyId::DualQuantumQKrawtchouk
        ) {
            names.push("N".into());
        }
        if self.params.q().is_some() {
            names.push("q".into());
        }
        names
    }
}

fn kappa_for(id: FamilyId, q: f64) -> f64 {
    match id {
        FamilyId::QRacah | FamilyId::DualQuantumQKrawtchouk => 1.0 / q,
        FamilyId::DualLittleQJacobi | FamilyId::DualAlternativeQCharlier => q,
        _ => 1.0,
    }
}

fn default_params(id: FamilyId) -> ParameterSet {
    let half = 0.5f64;
    let build = |q: Option<f64>, entries: Vec<Parameter>| {
        let kappa = q.map_or(1.0, |q| kappa_for(id, q));
        ParameterSet::new(q, entries, kappa).expect("default parameters are well formed")
    };
    match id {
        FamilyId::Krawtchouk => build(
            None,
            vec![Parameter::real("p", 0.3, 0.0), Parameter::real("N", 8.0, -1.0)],
        ),
        FamilyId::Hahn => build(
            None,
            vec![
                Parameter::real("a", 1.5, 1.0),
                Parameter::real("b", 2.7, 1.0),
                Parameter::real("N", 8.0, -1.0),
            ],
        ),
        FamilyId::Racah => build(
            None,
            vec![
                Parameter::real("a", -8.0, 1.0),
                Parameter::real("b", 11.5, 1.0),
                Parameter::real("c", 0.7, 1.0),
                Parameter::real("d", 0.6, 1.0),
            ],
        ),
        // q near 1 keeps the terminating series well conditioned on the
        // whole grid; with q = 1/2 its terms reach 1e9 near x = N.
        FamilyId::QRacah => build(
            Some(0.9),
            vec![
                Parameter::q_power("a", -8.0, 1.0),
                Parameter::q_power("b", 40.0, 1.0),
                Parameter::q_power("c", 1.0, 1.0),
                Parameter::q_power("d", 8.0, 1.0),
            ],
        ),
        FamilyId::Meixner => build(
            None,
            vec![Parameter::real("beta", 1.5, 1.0), Parameter::real("c", 0.4, 0.0)],
        ),
        FamilyId::Charlier => build(None, vec![Parameter::real("a", 1.3, 0.0)]),
        FamilyId::DualQuantumQKrawtchouk => build(
            Some(half),
            vec![Parameter::real("p", 10.0, 0.0), Parameter::q_power("qN", 3.0, -1.0)],
        ),
        FamilyId::DualLittleQJacobi => build(
            Some(half),
            vec![Parameter::real("a", 0.5, 0.0), Parameter::q_power("b", 1.0, 1.0)],
        ),
        FamilyId::DualAlternativeQCharlier => build(Some(half), vec![Parameter::q_power("a", 1.0, 1.0)]),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Validates a family and parameter set on its natural grid.
pub fn validate_parameters(
    id: FamilyId,
    params: ParameterSet,
    policy: &NumericPolicy,
) -> Result<(FamilySpec, GridSpec)> {
    let spec = FamilySpec::new(id, params)?;
    let grid = spec.validated(policy)?;
    Ok((spec, grid))
}
