//! The `verify-all` invariant suite.

use serde::Serialize;

use dqm_core::adler::{
    adler_chain, barred_system_casoratian, deformed_polynomials, polynomial_fast_path, validate_deletion, ChainOptions,
    DeletedSystem, EigenTables,
};
use dqm_core::bdp::BirthDeathProcess;
use dqm_core::casorati::random_identity_trials;
use dqm_core::christoffel::{deformed_duality_check, duality_check};
use dqm_core::crum::{chain_report, crum_chain, intertwining_residual, verify_shape_invariance, CrumChainState};
use dqm_core::hamiltonian::{factorize, spectrum_report, JacobiSystem};
use dqm_core::special::{build_special, xi_casoratian, xi_ell};
use dqm_core::{batch, FamilyId, FamilySpec, GridSpec, NumericPolicy, Result};

pub const IDENTITY_TRIALS: usize = 1000;
const DELETION_SETS: [&[usize]; 3] = [&[1, 2], &[2, 3], &[1, 2, 3, 4]];
const BDP_MAX_X: usize = 10;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// `None` for family-independent checks.
    pub family: Option<String>,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn new(name: &str, family: Option<FamilyId>, outcome: Result<f64>, tolerance: f64) -> Self {
        let (value, error) = match outcome {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        Check {
            name: name.to_string(),
            family: family.map(|f| f.as_str().to_string()),
            value,
            tolerance,
            pass: error.is_none() && value <= tolerance,
            error,
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            Some(f) => format!("{}[{f}]", self.name),
            None => self.name.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub tolerance_override: Option<f64>,
    pub parallel: bool,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub pass: bool,
}

struct Ctx {
    policy: NumericPolicy,
    tol: Option<f64>,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
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

/// The deletion battery restricted to levels the grid carries.
fn sets_within(grid: &GridSpec) -> impl Iterator<Item = &'static [usize]> + '_ {
    DELETION_SETS
        .into_iter()
        .filter(|levels| levels.iter().all(|&l| l <= grid.n_max()))
}

fn try_max<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for item in items {
        worst = worst.max(f(item)?);
    }
    Ok(worst)
}

fn family_checks(id: FamilyId, ctx: &Ctx) -> Vec<Check> {
    let spec = FamilySpec::default_for(id);
    let grid = match spec.validated(&ctx.policy) {
        Ok(g) => g,
        Err(e) => return vec![Check::new("validate", Some(id), Err(e), 0.0)],
    };
    let p = &ctx.policy;
    let fam = Some(id);
    let mut out = vec![
        Check::new(
            "spectrum",
            fam,
            spectrum_report(&spec, &grid, p).map(|r| r.max_residual),
            ctx.tol(1e-8),
        ),
        Check::new(
            "shape_invariance",
            fam,
            verify_shape_invariance(&spec, &grid, p, 0.0).map(|r| r.bd_shape_deviation.max(r.energy_sum_deviation)),
            ctx.tol(1e-10),
        ),
        Check::new("crum_chain", fam, crum_check(&spec, &grid, p), ctx.tol(1e-8)),
        Check::new("xi_closed_form", fam, xi_check(&spec, &grid), ctx.tol(1e-8)),
    ];
    if id.is_finite() {
        out.push(Check::new(
            "factorization",
            fam,
            factorization_check(&spec, &grid, p),
            ctx.tol(1e-10),
        ));
        out.push(Check::new(
            "duality",
            fam,
            duality_check(&spec, &grid, p).map(|r| r.max_deviation),
            ctx.tol(1e-10),
        ));
        out.push(Check::new(
            "deletion_paths",
            fam,
            deletion_paths(&spec, &grid, p),
            ctx.tol(1e-8),
        ));
        out.push(Check::new(
            "deformed_duality",
            fam,
            deformed_duality(&spec, &grid, p),
            ctx.tol(1e-8),
        ));
        if grid.x_max() <= BDP_MAX_X {
            out.push(Check::new(
                "bdp_kernels",
                fam,
                bdp_check(&spec, &grid, p),
                ctx.tol(1e-8),
            ));
        }
    }
    out
}

fn crum_check(spec: &FamilySpec, grid: &GridSpec, p: &NumericPolicy) -> Result<f64> {
    let r = chain_report(spec, grid, 3.min(grid.n_max()), p)?;
    Ok(max_of(
        r.steps.iter().map(|s| s.spectrum_deviation.max(s.norm_deviation)),
    ))
}

fn xi_check(spec: &FamilySpec, grid: &GridSpec) -> Result<f64> {
    try_max(1..=grid.n_max().min(4), |l| {
        let top = (grid.x_max() - l + 1).min(12) as i64;
        try_max(0..=top, |x| {
            let a = xi_ell(spec, l, x)?;
            Ok((a - xi_casoratian(spec, l, x)?).abs() / a.abs().max(1.0))
        })
    })
}

fn factorization_check(spec: &FamilySpec, grid: &GridSpec, p: &NumericPolicy) -> Result<f64> {
    let sys = JacobiSystem::build(spec, grid, p)?;
    let fact = factorize(&sys, p)?.reassembly_residual(&sys);
    let chain = crum_chain(&CrumChainState::from_family(spec, grid), 1)?;
    Ok(fact.max(intertwining_residual(&chain[0], &chain[1], p)?))
}

fn deletion_paths(spec: &FamilySpec, grid: &GridSpec, p: &NumericPolicy) -> Result<f64> {
    let tables = EigenTables::from_family(spec, grid);
    try_max(sets_within(grid), |levels| {
        let set = validate_deletion(levels, grid.n_max())?;
        let step = adler_chain(&tables, &set, ChainOptions::default())?;
        let cas = barred_system_casoratian(&tables, &set)?;
        let fast = polynomial_fast_path(spec, grid, &set)?;
        let mut dev = pairwise(&[&step, &cas, &fast]).max(step.spectrum_deviation(p)?);
        if levels.iter().copied().eq(1..=levels.len()) {
            let special = build_special(spec, grid, levels.len(), p)?.to_deleted_system()?;
            dev = dev.max(pairwise(&[&step, &special]));
        }
        Ok(dev)
    })
}

fn deformed_duality(spec: &FamilySpec, grid: &GridSpec, p: &NumericPolicy) -> Result<f64> {
    try_max(sets_within(grid), |levels| {
        let set = validate_deletion(levels, grid.n_max())?;
        let ds = polynomial_fast_path(spec, grid, &set)?;
        let polys = deformed_polynomials(spec, grid, &set, &ds.levels)?;
        let r = deformed_duality_check(&ds, &polys, p)?;
        Ok(max_of([
            r.duality_deviation,
            r.prefactor_deviation,
            r.zero_energy_deviation,
            r.orthogonality_deviation,
        ]))
    })
}

fn bdp_check(spec: &FamilySpec, grid: &GridSpec, p: &NumericPolicy) -> Result<f64> {
    let process = BirthDeathProcess::from_system(&JacobiSystem::build(spec, grid, p)?)?;
    let kernels = process.kernels(&[0.1, 0.5, 1.0])?;
    let ck = process.chapman_kolmogorov(0.3, 0.4)?;
    Ok(max_of(kernels.iter().map(|k| k.spectral_deviation.max(k.row_sum_deviation()))).max(ck))
}

/// Runs every check over the catalog defaults; families run in parallel
/// when the `parallel` feature is on.
pub fn run_suite(seed: u64, tol: Option<f64>) -> SuiteReport {
    let ctx = Ctx {
        policy: NumericPolicy::default(),
        tol,
    };
    let mut checks: Vec<Check> = batch::map(&FamilyId::ALL, |&id| family_checks(id, &ctx))
        .into_iter()
        .flatten()
        .collect();
    let trials = random_identity_trials(seed, IDENTITY_TRIALS);
    checks.push(Check::new(
        "casoratian_product_rule",
        None,
        trials.as_ref().map(|t| t.product_rule).map_err(Clone::clone),
        ctx.tol(1e-12),
    ));
    checks.push(Check::new(
        "casoratian_wronskian",
        None,
        trials.map(|t| t.wronskian),
        ctx.tol(1e-12),
    ));
    let failures: Vec<String> = checks.iter().filter(|c| !c.pass).map(Check::label).collect();
    SuiteReport {
        seed,
        tolerance_override: tol,
        parallel: batch::is_parallel(),
        pass: failures.is_empty(),
        checks,
        failures,
    }
}
