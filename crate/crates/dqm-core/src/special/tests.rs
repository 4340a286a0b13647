use super::*;
use crate::adler::{adler_chain, polynomial_fast_path, ChainOptions, EigenTables};
use crate::families::FamilyId;
use crate::linalg::sign_changes;
use proptest::prelude::*;

fn pol() -> NumericPolicy {
    NumericPolicy::default()
}

fn setup(id: FamilyId) -> (FamilySpec, GridSpec) {
    let spec = FamilySpec::default_for(id);
    let grid = spec.validated(&pol()).unwrap();
    (spec, grid)
}

const FINITE: [FamilyId; 4] = [FamilyId::Krawtchouk, FamilyId::Hahn, FamilyId::Racah, FamilyId::QRacah];

#[test]
fn xi_base_cases() {
    for id in FamilyId::ALL {
        let spec = FamilySpec::default_for(id);
        for x in 0..5 {
            assert_eq!(xi_ell(&spec, 0, x).unwrap(), 1.0);
        }
        for l in 1..=spec.finite_size().unwrap_or(4).min(4) {
            assert!((xi_ell(&spec, l, 0).unwrap() - 1.0).abs() < 1e-12, "{id} l={l}");
        }
    }
}

#[test]
fn xi_closed_matches_casoratian() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        for l in 1..=grid.n_max().min(4) {
            for x in 0..=(grid.x_max() - l + 1).min(12) as i64 {
                let a = xi_ell(&spec, l, x).unwrap();
                let b = xi_casoratian(&spec, l, x).unwrap();
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{id} l={l} x={x}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn xi_recurrence_and_modified_identity() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        for l in 0..grid.n_max().min(3) {
            for x in 0..=(grid.x_max() - l).min(10) as i64 {
                let r = xi_recurrence_check(&spec, l, x).unwrap();
                assert!(r.recurrence < 1e-8, "{id} l={l} x={x}: {r:?}");
                assert!(r.modified_identity < 1e-8, "{id} l={l} x={x}: {r:?}");
            }
        }
    }
}

#[test]
fn even_xi_is_positive_odd_fails() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        for l in [2, 4] {
            if l > grid.n_max() {
                continue;
            }
            let sys = build_special(&spec, &grid, l, &pol()).unwrap();
            assert!(sys.xi_positivity_margin() > 0.0, "{id} l={l}");
        }
        for l in [1, 3] {
            if l > grid.n_max() {
                continue;
            }
            let err = build_special(&spec, &grid, l, &pol()).unwrap_err();
            assert!(matches!(err, DqmError::PositivityFailure { .. }), "{id} l={l}: {err:?}");
        }
    }
}

#[test]
fn l_zero_is_the_original_system() {
    let (spec, grid) = setup(FamilyId::Racah);
    let sys = build_special(&spec, &grid, 0, &pol()).unwrap();
    let tables = EigenTables::from_family(&spec, &grid);
    for x in 0..=grid.x_max() {
        assert!((sys.b_l[x] - tables.b[x]).abs() < 1e-12 * tables.b[x].max(1.0));
        assert!((sys.d_l[x] - tables.d[x]).abs() < 1e-12 * tables.d[x].max(1.0));
    }
    for n in 0..=grid.n_max() {
        let phi = sys.eigenfunction(n).unwrap();
        for x in 0..=grid.x_max() {
            assert!((phi[x] - tables.phi[n][x]).abs() < 1e-10, "n={n} x={x}");
        }
    }
    let norm = special_norms(&spec, &grid, 0, 3, &pol()).unwrap();
    assert!((norm.factor - 1.0).abs() < 1e-15);
}

#[test]
fn dqqk_special_two() {
    let (spec, grid) = setup(FamilyId::DualQuantumQKrawtchouk);
    let sys = build_special(&spec, &grid, 2, &pol()).unwrap();
    assert_eq!(sys.levels, vec![0, 3]);
    let eig = sys.hamiltonian(&pol()).unwrap().eigensystem().unwrap().values.clone();
    assert!((eig[0] - 0.0).abs() < 1e-10 && (eig[1] - 7.0).abs() < 1e-10, "{eig:?}");
    // d_{2,0}^2 / d_0^2 = 1 / (E(1) E(2)) = 1/3.
    let norm = special_norms(&spec, &grid, 2, 0, &pol()).unwrap();
    assert!((norm.factor - 1.0 / 3.0).abs() < 1e-12);
    assert!(norm.deviation < 1e-10);
}

#[test]
fn special_matches_other_routes() {
    for id in FINITE {
        let (spec, grid) = setup(id);
        for l in [2, 4] {
            let levels: Vec<usize> = (1..=l).collect();
            let set = validate_deletion(&levels, grid.n_max()).unwrap();
            let special = build_special(&spec, &grid, l, &pol())
                .unwrap()
                .to_deleted_system()
                .unwrap();
            let tables = EigenTables::from_family(&spec, &grid);
            let step = adler_chain(&tables, &set, ChainOptions::default()).unwrap();
            let fast = polynomial_fast_path(&spec, &grid, &set).unwrap();
            for other in [&step, &fast] {
                assert!(
                    special.potential_deviation(other) < 1e-8,
                    "{id} l={l} {:?}",
                    other.route
                );
                assert!(
                    special.eigenfunction_deviation(other) < 1e-8,
                    "{id} l={l} {:?}",
                    other.route
                );
            }
            assert!(special.orthogonality_deviation() < 1e-8, "{id} l={l}");
            assert!(special.spectrum_deviation(&pol()).unwrap() < 1e-8, "{id} l={l}");
        }
    }
}

#[test]
fn modified_polynomials_agree_and_oscillate() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        for l in [2, 4] {
            if l > grid.n_max() {
                continue;
            }
            let top = grid.n_max().min(l + 6);
            assert!(modified_polynomials(&spec, &grid, l, 0)
                .unwrap()
                .iter()
                .all(|v| *v == 1.0));
            assert!(modified_polynomials(&spec, &grid, l, l)
                .unwrap()
                .iter()
                .all(|v| *v == 0.0));
            for n in l + 1..=top {
                let a = modified_polynomials(&spec, &grid, l, n).unwrap();
                let b = modified_polynomials_casoratian(&spec, &grid, l, n).unwrap();
                let window = a.len().min(12);
                for x in 0..window {
                    assert!(
                        (a[x] - b[x]).abs() <= 1e-8 * a[x].abs().max(1.0),
                        "{id} l={l} n={n} x={x}: {} vs {}",
                        a[x],
                        b[x]
                    );
                }
                assert!((a[0] - 1.0).abs() < 1e-10, "{id} l={l} n={n}");
                assert_eq!(sign_changes(&a), n - l, "{id} l={l} n={n}");
            }
        }
    }
}

#[test]
fn shift_operators() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        for l in [0, 2] {
            if l + 1 > grid.n_max() {
                continue;
            }
            for n in l + 1..=grid.n_max().min(l + 4) {
                let r = shift_operator_checks(&spec, &grid, l, n, &pol()).unwrap();
                assert!(r.factor_product < 1e-10, "{id} l={l} n={n}: {r:?}");
                assert!(r.energy_relation < 1e-10, "{id} l={l} n={n}: {r:?}");
                assert!(r.max_residual() < 1e-8, "{id} l={l} n={n}: {r:?}");
            }
        }
    }
}

#[test]
fn norms_by_direct_summation() {
    for id in FamilyId::ALL {
        let (spec, grid) = setup(id);
        let sys = build_special(&spec, &grid, 2.min(grid.n_max()), &pol()).unwrap();
        for &n in sys.levels.iter().take(5) {
            let r = special_norms(&spec, &grid, sys.l, n, &pol()).unwrap();
            assert!(r.deviation < 1e-8, "{id} n={n}: {r:?}");
        }
    }
}

#[test]
fn boundary_conditions_and_errors() {
    let (spec, grid) = setup(FamilyId::Hahn);
    let sys = build_special(&spec, &grid, 2, &pol()).unwrap();
    assert_eq!(sys.d_l[0], 0.0);
    assert_eq!(sys.b_l[sys.x_max()], 0.0);
    assert_eq!(sys.x_max(), grid.x_max() - 2);
    assert_eq!(sys.xi.len(), sys.x_max() + 2);
    assert!(matches!(
        build_special(&spec, &grid, 9, &pol()),
        Err(DqmError::LevelOutOfRange { .. })
    ));
    assert!(matches!(
        shift_operator_checks(&spec, &grid, 2, 2, &pol()),
        Err(DqmError::PreconditionViolated(_))
    ));
}

#[test]
fn report_serializes() {
    let (spec, grid) = setup(FamilyId::Krawtchouk);
    let r = special_report(&spec, &grid, 2, false, &pol()).unwrap();
    assert!(r.hermitian && r.skipped.is_none());
    assert!(r.spectrum_deviation < 1e-8);
    assert!(r.max_norm_deviation < 1e-8);
    let v = serde_json::to_value(&r).unwrap();
    assert!(v["C_l_lambda"].as_f64().unwrap() > 0.0);
    assert!(v["xi_positivity_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn odd_l_is_quarantined() {
    let (spec, grid) = setup(FamilyId::Hahn);
    assert!(matches!(
        special_report(&spec, &grid, 1, false, &pol()),
        Err(DqmError::PositivityFailure { .. })
    ));
    let r = special_report(&spec, &grid, 3, true, &pol()).unwrap();
    assert!(!r.hermitian);
    assert!(r.skipped.as_deref().unwrap().contains("not hermitian"));
    assert!(r.xi_positivity_margin <= 0.0);
    assert!(r.spectrum.is_empty());
    assert_eq!(r.b_l.len(), grid.x_max() - 2);
}

proptest! {
    #[test]
    fn c_l_lambda_sign(l in 0usize..6) {
        let spec = FamilySpec::default_for(FamilyId::Racah);
        let c = c_l_lambda(&spec, l);
        prop_assert_eq!(c > 0.0, l % 2 == 0);
    }

    #[test]
    fn eigenfunction_norms_follow_weight_factor(id in prop::sample::select(FINITE.to_vec()), l in prop::sample::select(vec![2usize, 4])) {
        let (spec, grid) = setup(id);
        let ds = build_special(&spec, &grid, l, &pol()).unwrap().to_deleted_system().unwrap();
        for &n in &ds.levels {
            let got: f64 = ds.phi(n).unwrap().iter().map(|v| v * v).sum();
            let want = ds.norm_factor(n);
            prop_assert!((got - want).abs() <= 1e-8 * want.abs());
        }
    }
}
