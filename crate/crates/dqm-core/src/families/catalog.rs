//! JSON-exportable catalog: implemented families with their parameter
//! metadata, and formula-only stubs for families whose deforming polynomials
//! are recorded but not evaluated.

use serde::Serialize;

use super::{FamilyId, FamilySpec};
use crate::params::ParamValue;

#[derive(Clone, Debug, Serialize)]
pub struct ParameterDoc {
    pub name: String,
    pub default: f64,
    pub shift: f64,
    pub q_power: bool,
}

/// Closure structure functions (metadata only).
#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceMeta {
    pub shifted_variable: &'static str,
    pub r1: &'static str,
    pub r0: &'static str,
    pub r_minus1: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub family: FamilyId,
    pub finite: bool,
    pub q: Option<f64>,
    pub kappa: f64,
    pub parameters: Vec<ParameterDoc>,
    pub energy: &'static str,
    pub eta: &'static str,
    pub twist_mask: Option<Vec<bool>>,
    pub xi_closed_form: &'static str,
    pub d_sq_closed_form: bool,
    pub structure_functions: Option<RecurrenceMeta>,
    pub implemented: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StubEntry {
    pub family: &'static str,
    pub xi_formula: &'static str,
    pub implemented: bool,
    pub most_generic: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogDocument {
    pub families: Vec<CatalogEntry>,
    pub stubs: Vec<StubEntry>,
}

fn formulas(id: FamilyId) -> (&'static str, &'static str, &'static str) {
    match id {
        FamilyId::Krawtchouk => ("n", "x", "P_l(-x; p, -(N-l+1))"),
        FamilyId::Hahn => ("n(n+a+b-1)", "x", "P_l(-x; -(a+l-1), -(b+l-1), -(N-l+1))"),
        FamilyId::Racah => (
            "n(n+a+b+c-d-1)",
            "x(x+d)",
            "P_l(-x; -(a+l-1), -(b+l-1), -(c+l-1), -(d+l-1))",
        ),
        FamilyId::QRacah => (
            "(q^-n - 1)(1 - abc q^(n-1)/d)",
            "(q^-x - 1)(1 - d q^x)",
            "P_l(-x; 1/(a q^(l-1)), 1/(b q^(l-1)), 1/(c q^(l-1)), 1/(d q^(l-1)))",
        ),
        FamilyId::Meixner => ("n", "x", "P_l(-x; -(beta+l-1), c)"),
        FamilyId::Charlier => ("n", "x", "P_l(-x; -a)"),
        FamilyId::DualQuantumQKrawtchouk => ("q^-n - 1", "1 - q^x", "2phi1(q^-l, q^x; q^(N-l+1); q, p q^(N+1))"),
        FamilyId::DualLittleQJacobi => (
            "1 - q^n",
            "(q^-x - 1)(1 - ab q^(x+1))",
            "3phi2(q^-l, q^x, q^(-x-l)/(ab); q^-l/b, 0; q, q)",
        ),
        FamilyId::DualAlternativeQCharlier => (
            "1 - q^n",
            "(q^-x - 1)(1 + a q^x)",
            "3phi2(q^-l, q^x, -q^(1-x-l)/a; 0, 0; q, q)",
        ),
    }
}

/// Structure functions, recorded for the dual families whose data are not
/// in the standard tables. `w = (q^-1/2 - q^1/2)^2`.
fn structure_functions(id: FamilyId) -> Option<RecurrenceMeta> {
    match id {
        FamilyId::DualQuantumQKrawtchouk => Some(RecurrenceMeta {
            shifted_variable: "z' = z + 1",
            r1: "w z'",
            r0: "w z'^2",
            r_minus1: "w (-z'^2 + (1 + p + q^(-N-1)) z'/p - q^-N (1 + 1/q)/p)",
        }),
        FamilyId::DualLittleQJacobi => Some(RecurrenceMeta {
            shifted_variable: "z' = z - 1",
            r1: "w z'",
            r0: "w z'^2",
            r_minus1: "w ((1 + ab q) z'^2 + (1 + a) z')",
        }),
        FamilyId::DualAlternativeQCharlier => Some(RecurrenceMeta {
            shifted_variable: "z' = z - 1",
            r1: "w z'",
            r0: "w z'^2",
            r_minus1: "w ((1 - a) z'^2 + z')",
        }),
        _ => None,
    }
}

pub fn catalog_list() -> Vec<CatalogEntry> {
    FamilyId::ALL
        .into_iter()
        .map(|id| {
            let spec = FamilySpec::default_for(id);
            let p = spec.params();
            let parameters = p
                .entries()
                .iter()
                .enumerate()
                .map(|(i, e)| ParameterDoc {
                    name: e.name.clone(),
                    default: p.value(i),
                    shift: e.shift,
                    q_power: matches!(e.value, ParamValue::QPower { .. }),
                })
                .collect();
            let (energy, eta, xi) = formulas(id);
            CatalogEntry {
                family: id,
                finite: id.is_finite(),
                q: p.q(),
                kappa: p.kappa(),
                parameters,
                energy,
                eta,
                twist_mask: id.twist_mask().map(<[bool]>::to_vec),
                xi_closed_form: xi,
                d_sq_closed_form: spec.d_sq_closed(0, &Default::default()).is_some(),
                structure_functions: structure_functions(id),
                implemented: true,
            }
        })
        .collect()
}

const STUBS: &[(&str, &str)] = &[
    ("dual_hahn", "P_l(-x; t(lambda+(l-1)delta) + (0,2,0)), t = negation"),
    (
        "q_hahn",
        "P_l(x-N+l-1; t(lambda+(l-1)delta)) (-1)^l a^l q^(l(l-1)/2) (b;q)_l/(a;q)_l, t(a,b,N) = -(b,a,N)",
    ),
    (
        "dual_q_hahn",
        "3phi2(q^-l, q^x, q^(-x+2-l)/(ab); q^(1-l)/a, q^(N-l+1); q, b q^N)",
    ),
    (
        "quantum_q_krawtchouk",
        "3phi2(q^-l, 0, q^(-x+N-l+1); q^-l/p, q^(N-l+1); q, q) (pq;q)_l",
    ),
    (
        "q_krawtchouk",
        "P_l(x-N+l-1; t(lambda+(l-1)delta) + (-2,0)) (-1)^l q^(l^2) p^l, t = negation",
    ),
    (
        "dual_q_krawtchouk",
        "3phi1(q^-l, q^x, q^(-x+N-l+1)/c; q^(N-l+1); q, c q^l)",
    ),
    (
        "affine_q_krawtchouk",
        "2phi1(q^-l, q^(-x+N-l+1); q^(N-l+1); q, 1/p) (-1)^l p^l q^(l(l+1)/2)/(pq;q)_l",
    ),
    (
        "alternative_q_hahn",
        "P_l(x-N+l-1; t(lambda+(l-1)delta)) (-1)^l q^(-l(l-1)/2) (a;q)_l/(a^l (b;q)_l), t(a,b,N) = -(b,a,N)",
    ),
    (
        "alternative_q_krawtchouk",
        "P_l(x-N+l-1; t(lambda+(l-1)delta) + (-2,0)) (-1)^l p^-l q^(-l^2), t = negation",
    ),
    (
        "alternative_affine_q_krawtchouk",
        "2phi1(q^-l, q^(-x+N-l+1); q^(N-l+1); q, p q^(x+l+1))/(pq;q)_l",
    ),
    (
        "little_q_jacobi",
        "P_l(x+b'+l; t(lambda+(l-1)delta) - (2,2)) a^-l b^-l q^(-l(l+1)), b = q^b', t = negation",
    ),
    ("q_meixner", "2phi1(q^-l, q^x; q^-l/b; q, -q^(1-x)/(bc))"),
    (
        "little_q_laguerre",
        "1phi1(q^-l; q^-l/a; q, q^x/a) (-1)^l a^-l q^(-l(l+1)/2) (aq;q)_l",
    ),
    ("al_salam_carlitz_ii", "2phi1(q^-l, q^x; 0; q, q^(1-x)/a)"),
    (
        "alternative_q_charlier",
        "2phi0(q^-l, -q^-l/a; -; q, -a q^(x+2l)) (-a)^-l q^(-l^2)",
    ),
    ("q_charlier", "2phi0(q^-l, q^x; -; q, -q^(l+1-x)/a)"),
];

/// Families listed only by their deforming-polynomial formula. The q-Racah
/// entry is implemented; it is included here flagged as the most generic
/// case, from which the others arise as limits.
pub fn stub_list() -> Vec<StubEntry> {
    let mut out = vec![StubEntry {
        family: "q_racah",
        xi_formula: "P_l(-x; t(lambda+(l-1)delta)), t = negation of all exponents",
        implemented: true,
        most_generic: true,
    }];
    out.extend(STUBS.iter().map(|&(family, xi_formula)| StubEntry {
        family,
        xi_formula,
        implemented: false,
        most_generic: false,
    }));
    out
}

pub fn catalog_document() -> CatalogDocument {
    CatalogDocument {
        families: catalog_list(),
        stubs: stub_list(),
    }
}
