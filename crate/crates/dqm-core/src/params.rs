//! Parameter sets, grids and the numeric policy shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{DqmError, Result};

/// Raw storage of one parameter. `QPower` keeps the exponent so that shifts
/// act additively and exactly; the value `q^exponent` is formed on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamValue {
    Real { value: f64 },
    QPower { exponent: f64 },
}

impl ParamValue {
    pub fn raw(&self) -> f64 {
        match *self {
            ParamValue::Real { value } => value,
            ParamValue::QPower { exponent } => exponent,
        }
    }

    fn with_raw(&self, raw: f64) -> Self {
        match self {
            ParamValue::Real { .. } => ParamValue::Real { value: raw },
            ParamValue::QPower { .. } => ParamValue::QPower { exponent: raw },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: ParamValue,
    /// Per-step increment of the raw value (the exponent for `QPower`).
    pub shift: f64,
}

impl Parameter {
    pub fn real(name: &str, value: f64, shift: f64) -> Self {
        Parameter {
            name: name.to_string(),
            value: ParamValue::Real { value },
            shift,
        }
    }

    pub fn q_power(name: &str, exponent: f64, shift: f64) -> Self {
        Parameter {
            name: name.to_string(),
            value: ParamValue::QPower { exponent },
            shift,
        }
    }
}

/// A family's parameter vector together with its shift and the scale `kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    q: Option<f64>,
    entries: Vec<Parameter>,
    kappa: f64,
}

impl ParameterSet {
    pub fn new(q: Option<f64>, entries: Vec<Parameter>, kappa: f64) -> Result<Self> {
        if let Some(q) = q {
            if !(q > 0.0 && q < 1.0) {
                return Err(DqmError::out_of_domain("q", "0 < q < 1"));
            }
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(DqmError::out_of_domain("kappa", "kappa > 0"));
        }
        for p in &entries {
            if matches!(p.value, ParamValue::QPower { .. }) && q.is_none() {
                return Err(DqmError::out_of_domain(
                    p.name.clone(),
                    "q-power parameter requires a base q",
                ));
            }
            if !p.value.raw().is_finite() {
                return Err(DqmError::out_of_domain(p.name.clone(), "finite value"));
            }
        }
        Ok(ParameterSet { q, entries, kappa })
    }

    pub fn q(&self) -> Option<f64> {
        self.q
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn entries(&self) -> &[Parameter] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn shift_vector(&self) -> Vec<f64> {
        self.entries.iter().map(|p| p.shift).collect()
    }

    pub fn raw(&self, i: usize) -> f64 {
        self.entries[i].value.raw()
    }

    /// Evaluated value of entry `i`.
    pub fn value(&self, i: usize) -> f64 {
        match self.entries[i].value {
            ParamValue::Real { value } => value,
            ParamValue::QPower { exponent } => self.q.expect("checked in new").powf(exponent),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.entries.len()).map(|i| self.value(i)).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.value(i))
    }

    pub fn with_raw(&self, i: usize, raw: f64) -> Self {
        let mut out = self.clone();
        out.entries[i].value = out.entries[i].value.with_raw(raw);
        out
    }

    /// Sets entry `i` from an evaluated value, converting to an exponent for
    /// q-power entries.
    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        match self.entries[i].value {
            ParamValue::Real { .. } => Ok(self.with_raw(i, value)),
            ParamValue::QPower { .. } => {
                if !(value > 0.0) {
                    return Err(DqmError::out_of_domain(
                        self.entries[i].name.clone(),
                        "q-power parameter must be positive",
                    ));
                }
                let q = self.q.expect("checked in new");
                Ok(self.with_raw(i, value.ln() / q.ln()))
            }
        }
    }

    pub fn with_q(&self, q: f64, kappa: f64) -> Result<Self> {
        ParameterSet::new(Some(q), self.entries.clone(), kappa)
    }

    /// `lambda + s * delta`, entrywise on raw values.
    pub fn shifted(&self, s: usize) -> Self {
        let mut out = self.clone();
        for p in &mut out.entries {
            let raw = p.value.raw() + s as f64 * p.shift;
            p.value = p.value.with_raw(raw);
        }
        out
    }

    /// Negates the raw entries selected by `mask` (the twist used by some
    /// deforming-polynomial closed forms).
    pub fn twisted(&self, mask: &[bool]) -> Self {
        let mut out = self.clone();
        for (p, &neg) in out.entries.iter_mut().zip(mask) {
            if neg {
                p.value = p.value.with_raw(-p.value.raw());
            }
        }
        out
    }
}

/// Alias kept for callers that think of shifting as an operation.
pub fn shift_parameters(lambda: &ParameterSet, s: usize) -> ParameterSet {
    lambda.shifted(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extent {
    Finite { n: usize },
    Truncated { cutoff: usize, declared_infinite: bool },
}

impl Extent {
    pub fn value(&self) -> usize {
        match *self {
            Extent::Finite { n } => n,
            Extent::Truncated { cutoff, .. } => cutoff,
        }
    }
}

/// Position and level ranges of a system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_max: Extent,
    pub n_max: Extent,
}

/// Smallest cutoff accepted for a truncated infinite grid.
pub const MIN_CUTOFF: usize = 8;

/// Highest polynomial degree a default truncation cutoff is chosen to
/// resolve.
pub const TAIL_DEGREE: usize = 8;

impl GridSpec {
    pub fn finite(n: usize) -> Self {
        let e = Extent::Finite { n };
        GridSpec { x_max: e, n_max: e }
    }

    pub fn truncated(cutoff: usize) -> Result<Self> {
        if cutoff < MIN_CUTOFF {
            return Err(DqmError::InvalidGrid(format!(
                "truncation cutoff {cutoff} below minimum {MIN_CUTOFF}"
            )));
        }
        let e = Extent::Truncated {
            cutoff,
            declared_infinite: true,
        };
        Ok(GridSpec { x_max: e, n_max: e })
    }

    pub fn x_max(&self) -> usize {
        self.x_max.value()
    }

    pub fn n_max(&self) -> usize {
        self.n_max.value()
    }

    pub fn dim(&self) -> usize {
        self.x_max() + 1
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.x_max, Extent::Finite { .. })
    }

    /// Number of low-lying levels the grid represents faithfully: all of
    /// them on a finite grid, at most `TAIL_DEGREE + 1` (and half the sites)
    /// on a truncated one.
    pub fn resolved_levels(&self) -> usize {
        if self.is_finite() {
            self.n_max() + 1
        } else {
            (TAIL_DEGREE + 1).min(self.dim() / 2)
        }
    }
}

/// Tolerances and precision used by verification routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Bits of floating significand actually used (f64 throughout).
    pub working_precision: u32,
    pub identity_tol: f64,
    pub positivity_tol: f64,
    pub tail_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            working_precision: f64::MANTISSA_DIGITS,
            identity_tol: 1e-10,
            positivity_tol: 1e-12,
            tail_tol: 1e-14,
        }
    }
}

impl NumericPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("identity_tol", self.identity_tol),
            ("positivity_tol", self.positivity_tol),
            ("tail_tol", self.tail_tol),
        ] {
            if !(v > 0.0) {
                return Err(DqmError::InvalidPolicy(format!("{name} must be positive")));
            }
        }
        if self.working_precision != f64::MANTISSA_DIGITS {
            return Err(DqmError::InvalidPolicy(format!(
                "only {}-bit significands are supported",
                f64::MANTISSA_DIGITS
            )));
        }
        Ok(())
    }

    /// Policy check that additionally requires `identity_tol >= 1e3 * eps`.
    /// Verification allows tighter tolerances for demonstrating failures, so
    /// this is separate from [`NumericPolicy::validate`].
    pub fn is_attainable(&self) -> bool {
        self.identity_tol >= f64::EPSILON * 1e3
    }

    pub fn with_identity_tol(mut self, tol: f64) -> Self {
        self.identity_tol = tol;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParameterSet {
        ParameterSet::new(
            Some(0.5),
            vec![Parameter::real("p", 10.0, 0.0), Parameter::q_power("qN", 3.0, -1.0)],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn shift_zero_is_identity() {
        let l = sample();
        assert_eq!(l.shifted(0), l);
    }

    #[test]
    fn shift_acts_on_exponent() {
        let l = sample().shifted(1);
        assert_eq!(l.raw(1), 2.0);
        assert_eq!(l.value(0), 10.0);
        assert_eq!(l.value(1), 0.25);
    }

    #[test]
    fn shift_is_associative() {
        let l = sample();
        assert_eq!(l.shifted(2).shifted(1), l.shifted(3));
    }

    #[test]
    fn q_outside_unit_interval_rejected() {
        let r = ParameterSet::new(Some(1.0), vec![], 1.0);
        assert!(matches!(r, Err(DqmError::OutOfDomain { .. })));
    }

    #[test]
    fn q_power_needs_base() {
        let r = ParameterSet::new(None, vec![Parameter::q_power("a", 1.0, 0.0)], 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn with_value_converts_to_exponent() {
        let l = sample().with_value(1, 0.0625).unwrap();
        assert!((l.raw(1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn twist_negates_selected_entries() {
        let l = sample().twisted(&[false, true]);
        assert_eq!(l.raw(0), 10.0);
        assert_eq!(l.raw(1), -3.0);
    }

    #[test]
    fn grid_shapes() {
        let g = GridSpec::finite(3);
        assert_eq!((g.x_max(), g.n_max(), g.dim()), (3, 3, 4));
        assert!(g.is_finite());
        assert!(GridSpec::truncated(7).is_err());
        assert!(!GridSpec::truncated(8).unwrap().is_finite());
    }

    #[test]
    fn default_policy_is_valid() {
        let p = NumericPolicy::default();
        p.validate().unwrap();
        assert!(p.is_attainable());
        assert!(!p.with_identity_tol(1e-16).is_attainable());
    }
}
