//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;

use dqm_core::adler::{
    adler_chain, barred_system_casoratian, deformed_polynomials, hermiticity_report, polynomial_fast_path,
    validate_deletion, ChainOptions, DeletedSystem, EigenTables,
};
use dqm_core::bdp::BirthDeathProcess;
use dqm_core::casorati::random_identity_trials;
use dqm_core::christoffel::{deformed_duality_check, duality_check};
use dqm_core::crum::{
    chain_report, crum_chain, intertwining_residual, rodrigues_wavefunction, verify_shape_invariance, CrumChainState,
};
use dqm_core::hamiltonian::{factorize, JacobiSystem};
use dqm_core::linalg::sign_changes;
use dqm_core::special::{build_special, modified_polynomials, xi_casoratian, xi_ell};
use dqm_core::{FamilyId, FamilySpec, GridSpec, NumericPolicy, Result};

type Outcome = Result<(bool, String)>;

const ADLER_FAMILIES: [FamilyId; 4] = [FamilyId::Krawtchouk, FamilyId::Hahn, FamilyId::Racah, FamilyId::QRacah];
const ADLER_SETS: [&[usize]; 3] = [&[1, 2], &[2, 3], &[1, 2, 3, 4]];

fn pol() -> NumericPolicy {
    NumericPolicy::default()
}

fn setup(spec: &FamilySpec) -> Result<GridSpec> {
    spec.validated(&pol())
}

fn defaults() -> impl Iterator<Item = FamilySpec> {
    FamilyId::ALL.into_iter().map(FamilySpec::default_for)
}

/// Catalog finite families at their defaults, plus `N = 12` variants where
/// the override validates.
fn finite_specs() -> Vec<FamilySpec> {
    let mut out = Vec::new();
    for id in FamilyId::finite() {
        let spec = FamilySpec::default_for(id);
        if let Ok(big) = spec.with_override("N", 12.0) {
            if big.validated(&pol()).is_ok() {
                out.push(big);
            }
        }
        out.push(spec);
    }
    out
}

fn criterion_1() -> Outcome {
    let spec = FamilySpec::default_for(FamilyId::DualQuantumQKrawtchouk);
    let grid = setup(&spec)?;
    let eig = JacobiSystem::build(&spec, &grid, &pol())?.eigensystem()?.values.clone();
    let expected = [0.0, 1.0, 3.0, 7.0];
    let dev = if eig.len() == 4 {
        eig.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok((dev <= 1e-10, format!("eigenvalues {eig:?}, max deviation {dev:.2e}")))
}

fn criterion_2() -> Outcome {
    let mut fact = 0.0f64;
    let mut inter = 0.0f64;
    let specs = finite_specs();
    for spec in &specs {
        let grid = setup(spec)?;
        let sys = JacobiSystem::build(spec, &grid, &pol())?;
        fact = fact.max(factorize(&sys, &pol())?.reassembly_residual(&sys));
        let chain = crum_chain(&CrumChainState::from_family(spec, &grid), 1)?;
        inter = inter.max(intertwining_residual(&chain[0], &chain[1], &pol())?);
    }
    Ok((
        fact <= 1e-10 && inter <= 1e-10,
        format!(
            "{} systems: |H - A^T A| {fact:.2e}, |A H - H1 A| {inter:.2e}",
            specs.len()
        ),
    ))
}

fn criterion_3() -> Outcome {
    let (mut spec_dev, mut norm_dev) = (0.0f64, 0.0f64);
    for spec in defaults() {
        let grid = setup(&spec)?;
        let r = chain_report(&spec, &grid, 3.min(grid.n_max()), &pol())?;
        for st in &r.steps {
            spec_dev = spec_dev.max(st.spectrum_deviation);
            norm_dev = norm_dev.max(st.norm_deviation);
        }
    }
    Ok((
        spec_dev <= 1e-8 && norm_dev <= 1e-8,
        format!("s <= 3 on all families: spectrum {spec_dev:.2e}, norm factors {norm_dev:.2e}"),
    ))
}

fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let (mut asym, mut spec_dev, mut ortho, mut order) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for id in ADLER_FAMILIES {
        let spec = FamilySpec::default_for(id);
        let grid = setup(&spec)?;
        let tables = EigenTables::from_family(&spec, &grid);
        for levels in ADLER_SETS {
            let set = validate_deletion(levels, grid.n_max())?;
            let base = adler_chain(&tables, &set, ChainOptions::default())?;
            let h = hermiticity_report(&base, &pol());
            asym = asym.max(if h.pass { h.asymmetry } else { f64::INFINITY });
            spec_dev = spec_dev.max(base.spectrum_deviation(&pol())?);
            ortho = ortho.max(base.orthogonality_deviation());
            for perm in permutations(levels) {
                let other = adler_chain(&tables, &set.reordered(&perm), ChainOptions::default())?;
                order = order.max(base.potential_deviation(&other));
            }
        }
    }
    Ok((
        asym <= 1e-10 && spec_dev <= 1e-8 && ortho <= 1e-8 && order <= 1e-10,
        format!("asymmetry {asym:.2e}, spectrum {spec_dev:.2e}, orthogonality {ortho:.2e}, ordering {order:.2e}"),
    ))
}

fn pairwise(systems: &[&DeletedSystem]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in systems.iter().enumerate() {
        for b in &systems[i + 1..] {
            worst = worst.max(a.potential_deviation(b)).max(a.eigenfunction_deviation(b));
        }
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut compared = 0;
    for id in ADLER_FAMILIES {
        let spec = FamilySpec::default_for(id);
        let grid = setup(&spec)?;
        let tables = EigenTables::from_family(&spec, &grid);
        for levels in ADLER_SETS {
            let set = validate_deletion(levels, grid.n_max())?;
            let step = adler_chain(&tables, &set, ChainOptions::default())?;
            let cas = barred_system_casoratian(&tables, &set)?;
            let fast = polynomial_fast_path(&spec, &grid, &set)?;
            let contiguous = levels.iter().copied().eq(1..=levels.len());
            let dev = if contiguous {
                let special = build_special(&spec, &grid, levels.len(), &pol())?.to_deleted_system()?;
                pairwise(&[&step, &cas, &fast, &special])
            } else {
                pairwise(&[&step, &cas, &fast])
            };
            worst = worst.max(dev);
            compared += 1;
        }
    }
    Ok((
        worst <= 1e-8,
        format!("{compared} deletions, pairwise max deviation {worst:.2e}"),
    ))
}

fn criterion_6() -> Outcome {
    let (mut dual, mut deformed, mut zero, mut ortho) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for id in ADLER_FAMILIES {
        let spec = FamilySpec::default_for(id);
        let grid = setup(&spec)?;
        dual = dual.max(duality_check(&spec, &grid, &pol())?.max_deviation);
        for levels in ADLER_SETS {
            let set = validate_deletion(levels, grid.n_max())?;
            let ds = polynomial_fast_path(&spec, &grid, &set)?;
            let polys = deformed_polynomials(&spec, &grid, &set, &ds.levels)?;
            let r = deformed_duality_check(&ds, &polys, &pol())?;
            deformed = deformed.max(r.duality_deviation).max(r.prefactor_deviation);
            zero = zero.max(r.zero_energy_deviation);
            ortho = ortho.max(r.orthogonality_deviation);
        }
    }
    Ok((
        dual <= 1e-10 && deformed <= 1e-8 && zero <= 1e-10 && ortho <= 1e-8,
        format!("duality {dual:.2e}, deformed {deformed:.2e}, Q_x(0) {zero:.2e}, orthogonality {ortho:.2e}"),
    ))
}

fn criterion_7() -> Outcome {
    let r = random_identity_trials(20_240_601, 1000)?;
    Ok((
        r.product_rule <= 1e-12 && r.wronskian <= 1e-12,
        format!(
            "1000 trials: product rule {:.2e} (unscaled {:.2e}), Wronskian identity {:.2e}",
            r.product_rule, r.product_rule_unscaled, r.wronskian
        ),
    ))
}

fn criterion_8() -> Outcome {
    let (mut closed, mut families, mut min_xi) = (0.0f64, 0, f64::INFINITY);
    let mut zero_mismatch = Vec::new();
    for spec in defaults() {
        let grid = setup(&spec)?;
        let top_l = grid.n_max().min(4);
        for l in 1..=top_l {
            let x_bar = grid.x_max() - l;
            for x in 0..=(x_bar + 1).min(16) as i64 {
                let a = xi_ell(&spec, l, x)?;
                let b = xi_casoratian(&spec, l, x)?;
                closed = closed.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        families += 1;
        for l in [2usize, 4] {
            if l > grid.n_max() {
                continue;
            }
            let sys = build_special(&spec, &grid, l, &pol())?;
            min_xi = min_xi.min(sys.xi_positivity_margin());
            for n in l + 1..=grid.n_max().min(l + 6) {
                let p = modified_polynomials(&spec, &grid, l, n)?;
                if sign_changes(&p) != n - l {
                    zero_mismatch.push(format!("{} l={l} n={n}", spec.id()));
                }
            }
        }
    }
    Ok((
        closed <= 1e-8 && families >= 6 && min_xi > 0.0 && zero_mismatch.is_empty(),
        format!(
            "{families} families: closed vs Casoratian {closed:.2e}, min even xi {min_xi:.3e}, zero-count mismatches {zero_mismatch:?}"
        ),
    ))
}

fn criterion_9() -> Outcome {
    let (mut shape, mut energy, mut rod) = (0.0f64, 0.0f64, 0.0f64);
    for spec in defaults() {
        let grid = setup(&spec)?;
        let r = verify_shape_invariance(&spec, &grid, &pol(), 0.0)?;
        shape = shape.max(r.bd_shape_deviation);
        energy = energy.max(r.energy_sum_deviation);
        let tables = EigenTables::from_family(&spec, &grid);
        for n in 0..=grid.n_max().min(4) {
            rod = rod.max(rodrigues_wavefunction(&spec, &grid, n)?.misalignment(&tables.phi[n]));
        }
    }
    Ok((
        shape <= 1e-10 && energy <= 1e-10 && rod <= 1e-8,
        format!("BD shape {shape:.2e}, energy sum {energy:.2e}, Rodrigues 1-|cos| {rod:.2e}"),
    ))
}

fn criterion_10() -> Outcome {
    let (mut spectral, mut rows, mut ck) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for spec in finite_specs() {
        let grid = setup(&spec)?;
        if grid.x_max() > 10 {
            continue;
        }
        let p = BirthDeathProcess::from_system(&JacobiSystem::build(&spec, &grid, &pol())?)?;
        for k in p.kernels(&[0.1, 0.5, 1.0])? {
            spectral = spectral.max(k.spectral_deviation);
            rows = rows.max(k.row_sum_deviation());
        }
        for t in [0.1, 0.5] {
            for s in [0.1, 0.5] {
                ck = ck.max(p.chapman_kolmogorov(t, s)?);
            }
        }
        count += 1;
    }
    Ok((
        spectral <= 1e-8 && rows <= 1e-8 && ck <= 1e-8,
        format!("{count} processes: spectral vs expm {spectral:.2e}, row sums {rows:.2e}, Chapman-Kolmogorov {ck:.2e}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spectral reproduction", criterion_1),
        ("factorization and intertwining", criterion_2),
        ("Crum iso-spectrality", criterion_3),
        ("Krein-Adler battery", criterion_4),
        ("path equivalence", criterion_5),
        ("dual Christoffel", criterion_6),
        ("Casoratian identities", criterion_7),
        ("deforming polynomials", criterion_8),
        ("shape invariance", criterion_9),
        ("birth-death kernels", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
