use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use dqm_core::adler::{
    adler_chain, barred_system_casoratian, deformed_polynomials, deletion_report, polynomial_fast_path,
    validate_deletion, ChainOptions, DeletionReport, EigenTables,
};
use dqm_core::christoffel::{
    deformed_duality_check, weight_transformation_report, DeformedDualityReport, WeightTransformationReport,
};
use dqm_core::hamiltonian::spectrum_report;
use dqm_core::report::{envelope, Cell, Table};
use dqm_core::special::{build_special, special_report, SpecialReport};
use dqm_core::{DqmError, FamilySpec, GridSpec, NumericPolicy};

use crate::config::{CommandKind, Format, RunConfig};
use crate::error::CliError;
use crate::suite::run_suite;

/// Default tolerance for agreement between deletion routes.
pub const ROUTE_TOL: f64 = 1e-8;
pub const SPECTRUM_TOL: f64 = 1e-8;

/// What a run wrote, what it wants printed and which checks failed.
#[derive(Debug)]
pub struct Outcome {
    pub path: PathBuf,
    pub messages: Vec<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    /// `Ok` when every verification passed.
    pub fn verdict(&self) -> Result<(), CliError> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Verification(self.failures.clone()))
        }
    }
}

#[derive(Serialize)]
struct Body<'a, T: Serialize> {
    config: &'a RunConfig,
    result: T,
}

fn write_output<T: Serialize>(
    cfg: &RunConfig,
    stem: &str,
    kind: &str,
    result: T,
    table: Table,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("{stem}.{}", cfg.format.extension()));
    match cfg.format {
        Format::Json => {
            let doc: Value = envelope(kind, &Body { config: cfg, result });
            fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        Format::Csv => write_csv(&path, &table)?,
    }
    Ok(path)
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in table.rendered_rows() {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn setup(cfg: &RunConfig) -> Result<(FamilySpec, GridSpec, NumericPolicy), CliError> {
    let policy = cfg.policy();
    let spec = cfg.spec()?;
    let grid = spec.validated(&policy)?;
    Ok((spec, grid, policy))
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        CommandKind::Spectrum => spectrum(cfg),
        CommandKind::Delete => delete(cfg),
        CommandKind::VerifyAll => verify_all(cfg),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (spec, grid, policy) = setup(cfg)?;
    let r = spectrum_report(&spec, &grid, &policy)?;
    let mut table = Table::new(&["n", "energy", "closed_form", "residual"]);
    for (n, (e, c)) in r.eigenvalues.iter().zip(&r.closed_form).enumerate() {
        let res = (e - c).abs() / c.abs().max(1.0);
        table.push(vec![n.into(), (*e).into(), (*c).into(), res.into()]);
    }
    let tol = cfg.tolerance(SPECTRUM_TOL);
    let mut failures = Vec::new();
    if !(r.max_residual <= tol) {
        failures.push(format!("spectrum residual {:.3e} exceeds {tol:.1e}", r.max_residual));
    }
    let messages = vec![format!(
        "{}: {} levels, max residual {:.3e}",
        r.family,
        r.eigenvalues.len(),
        r.max_residual
    )];
    let path = write_output(cfg, &format!("spectrum-{}", spec.id()), "spectrum", &r, table)?;
    Ok(Outcome {
        path,
        messages,
        failures,
    })
}

#[derive(Serialize)]
struct ChristoffelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<WeightTransformationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deformed_duality: Option<DeformedDualityReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped: Vec<String>,
}

#[derive(Serialize)]
struct SpecialSection {
    report: SpecialReport,
    /// Largest deviation of the closed-form route from the generic one.
    route_deviation: Option<f64>,
}

#[derive(Serialize)]
struct DeleteResult {
    deletion: DeletionReport,
    christoffel: ChristoffelSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    special: Option<SpecialSection>,
}

fn christoffel_section(
    spec: &FamilySpec,
    grid: &GridSpec,
    levels: &[usize],
    policy: &NumericPolicy,
) -> Result<ChristoffelSection, CliError> {
    let mut out = ChristoffelSection {
        weights: None,
        deformed_duality: None,
        skipped: Vec::new(),
    };
    let set = validate_deletion(levels, grid.n_max())?;
    if !set.admissible {
        out.skipped
            .push("inadmissible set: no dual Christoffel transformation".into());
        return Ok(out);
    }
    let ds = polynomial_fast_path(spec, grid, &set)?;
    out.weights = Some(weight_transformation_report(&ds)?);
    if !grid.is_finite() {
        out.skipped
            .push("deformed duality needs the complete spectrum of a finite grid".into());
    } else if set.contains_zero || set.len() % 2 == 1 {
        out.skipped
            .push("deformed duality needs an even number of levels, none of them 0".into());
    } else {
        let polys = deformed_polynomials(spec, grid, &set, &ds.levels)?;
        out.deformed_duality = Some(deformed_duality_check(&ds, &polys, policy)?);
    }
    Ok(out)
}

fn delete(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (spec, grid, policy) = setup(cfg)?;
    let set = validate_deletion(&cfg.levels, grid.n_max())?;
    let opts = ChainOptions {
        allow_inadmissible: cfg.allow_unsafe,
    };
    let deletion = deletion_report(&spec, &grid, &set, opts, &policy)?;
    let tol = cfg.tolerance(ROUTE_TOL);
    let mut messages = Vec::new();
    let mut failures = Vec::new();

    if deletion.hermiticity.pass {
        messages.push(format!(
            "deleted {:?} from {}: max residual {:.3e}",
            deletion.levels, deletion.family, deletion.max_residual
        ));
        if !(deletion.max_residual <= tol) {
            failures.push(format!(
                "deleted-system residual {:.3e} exceeds {tol:.1e}",
                deletion.max_residual
            ));
        }
    } else {
        // Only reachable with --unsafe; the broken hermiticity is the point.
        messages.push(format!(
            "deleted {:?} from {}: not hermitian (asymmetry {:.3e}, min B {:.3e}, min D {:.3e})",
            deletion.levels,
            deletion.family,
            deletion.hermiticity.asymmetry,
            deletion.hermiticity.min_b,
            deletion.hermiticity.min_d
        ));
    }

    let christoffel = christoffel_section(&spec, &grid, &cfg.levels, &policy)?;
    if let Some(r) = &christoffel.deformed_duality {
        messages.push(format!(
            "deformed duality: {:.3e}, dual orthogonality {:.3e}",
            r.duality_deviation, r.orthogonality_deviation
        ));
        let worst = r
            .duality_deviation
            .max(r.prefactor_deviation)
            .max(r.orthogonality_deviation);
        if !(worst <= tol) {
            failures.push(format!("deformed duality deviation {worst:.3e} exceeds {tol:.1e}"));
        }
    }

    let special = match cfg.l {
        None => None,
        Some(l) => {
            let report = special_report(&spec, &grid, l, cfg.allow_unsafe, &policy)?;
            let route_deviation = if report.hermitian {
                let fixed = build_special(&spec, &grid, l, &policy)?.to_deleted_system()?;
                let tables = EigenTables::from_family(&spec, &grid);
                let other = match adler_chain(&tables, &set, opts) {
                    Err(DqmError::IntermediateBreakdown { .. }) => barred_system_casoratian(&tables, &set)?,
                    r => r?,
                };
                let keep = if grid.is_finite() {
                    fixed.levels.len()
                } else {
                    grid.resolved_levels().saturating_sub(l)
                };
                let dev = fixed
                    .potential_deviation(&other)
                    .max(fixed.eigenfunction_deviation_upto(&other, keep));
                let verdict = if dev <= tol { "agrees with" } else { "DIFFERS from" };
                let route = serde_json::to_value(other.route)?;
                messages.push(format!(
                    "special path {verdict} the {} path: max deviation {dev:.3e}",
                    route.as_str().unwrap_or("generic")
                ));
                if !(dev <= tol) {
                    failures.push(format!("special route deviation {dev:.3e} exceeds {tol:.1e}"));
                }
                Some(dev)
            } else {
                messages.push(format!(
                    "special path skipped: {}",
                    report.skipped.as_deref().unwrap_or("not hermitian")
                ));
                None
            };
            Some(SpecialSection {
                report,
                route_deviation,
            })
        }
    };

    let mut table = Table::new(&["n", "energy_before", "energy_after", "norm_factor"]);
    for (i, (n, factor)) in deletion.norm_factors.iter().enumerate() {
        let after = deletion.spectrum_after.as_ref().map_or(f64::NAN, |s| s[i]);
        table.push(vec![
            (*n).into(),
            deletion.spectrum_before[*n].into(),
            after.into(),
            (*factor).into(),
        ]);
    }
    let result = DeleteResult {
        deletion,
        christoffel,
        special,
    };
    let path = write_output(cfg, &format!("delete-{}", spec.id()), "delete", &result, table)?;
    Ok(Outcome {
        path,
        messages,
        failures,
    })
}

fn verify_all(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = run_suite(cfg.seed, cfg.tol);
    let mut table = Table::new(&["check", "family", "value", "tolerance", "pass"]);
    for c in &report.checks {
        table.push(vec![
            c.name.as_str().into(),
            c.family.as_deref().unwrap_or("").into(),
            c.value.into(),
            c.tolerance.into(),
            Cell::Text(c.pass.to_string()),
        ]);
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    let messages = vec![format!(
        "verify-all (seed {}): {passed}/{} checks passed",
        report.seed,
        report.checks.len()
    )];
    let failures = report.failures.clone();
    let path = write_output(cfg, "verify-all", "verify-all", &report, table)?;
    Ok(Outcome {
        path,
        messages,
        failures,
    })
}
