use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dqm_core::{DqmError, FamilyId, FamilySpec, NumericPolicy};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DQM_OUT_DIR";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "dqm",
    version,
    about = "Batch verification reports for discrete quantum mechanics"
)]
pub struct Cli {
    /// Directory for report files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Override every verification tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues of the assembled Hamiltonian against the closed form.
    Spectrum(FamilyArgs),
    /// Delete a set of levels and check the deleted system.
    Delete {
        #[command(flatten)]
        family: FamilyArgs,
        /// Comma-separated levels, e.g. `1,2`.
        #[arg(long, value_delimiter = ',', required_unless_present = "l")]
        levels: Vec<usize>,
        /// Shorthand for `--levels 1,..,l --special`.
        #[arg(long, conflicts_with = "levels")]
        l: Option<usize>,
        /// Also build `D = {1..l}` from the closed forms and compare.
        #[arg(long)]
        special: bool,
        /// Run inadmissible sets anyway.
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
    },
    /// Run the invariant suite over the catalog defaults.
    VerifyAll {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct FamilyArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Any parameter as `name=value`; may repeat.
    #[arg(long = "param", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Spectrum,
    Delete,
    VerifyAll,
}

/// A parsed invocation in canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub family: Option<FamilyId>,
    /// Parameter overrides in application order: `q`, then `N`, then the
    /// rest by name.
    pub overrides: Vec<(String, f64)>,
    pub levels: Vec<usize>,
    /// `Some(l)` when the special path is requested.
    pub l: Option<usize>,
    pub format: Format,
    pub tol: Option<f64>,
    pub seed: u64,
    pub allow_unsafe: bool,
    pub out_dir: PathBuf,
}

fn override_rank(name: &str) -> (u8, String) {
    match name {
        "q" => (0, String::new()),
        "N" => (1, String::new()),
        other => (2, other.to_string()),
    }
}

fn canonical_overrides(args: &FamilyArgs) -> Vec<(String, f64)> {
    let named = [
        ("q", args.q),
        ("N", args.n),
        ("p", args.p),
        ("a", args.a),
        ("b", args.b),
        ("c", args.c),
        ("d", args.d),
        ("beta", args.beta),
    ];
    let mut out: Vec<(String, f64)> = Vec::new();
    let all = named
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .chain(args.params.iter().cloned());
    for (k, v) in all {
        // The last assignment of a name wins.
        out.retain(|(name, _)| *name != k);
        out.push((k, v));
    }
    out.sort_by_key(|(k, _)| override_rank(k));
    out
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let mut cfg = RunConfig {
            command: CommandKind::VerifyAll,
            family: None,
            overrides: Vec::new(),
            levels: Vec::new(),
            l: None,
            format: cli.format,
            tol: cli.tol,
            seed: DEFAULT_SEED,
            allow_unsafe: false,
            out_dir: cli.out_dir,
        };
        let family = |args: &FamilyArgs| -> Result<FamilyId, CliError> { Ok(args.family.parse::<FamilyId>()?) };
        match cli.command {
            Command::Spectrum(args) => {
                cfg.command = CommandKind::Spectrum;
                cfg.family = Some(family(&args)?);
                cfg.overrides = canonical_overrides(&args);
            }
            Command::Delete {
                family: args,
                levels,
                l,
                special,
                allow_unsafe,
            } => {
                cfg.command = CommandKind::Delete;
                cfg.family = Some(family(&args)?);
                cfg.overrides = canonical_overrides(&args);
                cfg.allow_unsafe = allow_unsafe;
                match l {
                    Some(l) => {
                        cfg.levels = (1..=l).collect();
                        cfg.l = Some(l);
                    }
                    None => {
                        let mut sorted = levels.clone();
                        sorted.sort_unstable();
                        if special {
                            if sorted.iter().copied().ne(1..=sorted.len()) {
                                return Err(CliError::Usage(format!("--special needs levels 1..l, got {levels:?}")));
                            }
                            cfg.l = Some(sorted.len());
                        }
                        cfg.levels = levels;
                    }
                }
            }
            Command::VerifyAll { seed } => {
                cfg.seed = seed;
            }
        }
        if let Some(t) = cfg.tol {
            if !(t > 0.0) {
                return Err(CliError::Core(DqmError::InvalidPolicy(
                    "tolerance must be positive".into(),
                )));
            }
        }
        Ok(cfg)
    }

    pub fn parse_from<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(CliError::Clap)?;
        Self::from_cli(cli)
    }

    /// Arguments (after the program name) that parse back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut out = vec![
            "--out-dir".to_string(),
            self.out_dir.display().to_string(),
            "--format".to_string(),
            self.format.extension().to_string(),
        ];
        if let Some(t) = self.tol {
            out.push("--tol".into());
            out.push(t.to_string());
        }
        let family_args = |out: &mut Vec<String>| {
            if let Some(f) = self.family {
                out.push("--family".into());
                out.push(f.as_str().into());
            }
            for (k, v) in &self.overrides {
                out.push("--param".into());
                out.push(format!("{k}={v}"));
            }
        };
        match self.command {
            CommandKind::Spectrum => {
                out.push("spectrum".into());
                family_args(&mut out);
            }
            CommandKind::Delete => {
                out.push("delete".into());
                family_args(&mut out);
                out.push("--levels".into());
                out.push(self.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","));
                if self.l.is_some() {
                    out.push("--special".into());
                }
                if self.allow_unsafe {
                    out.push("--unsafe".into());
                }
            }
            CommandKind::VerifyAll => {
                out.push("verify-all".into());
                out.push("--seed".into());
                out.push(self.seed.to_string());
            }
        }
        out
    }

    /// The family with all overrides applied.
    pub fn spec(&self) -> Result<FamilySpec, CliError> {
        let id = self
            .family
            .ok_or_else(|| CliError::Usage("this command needs --family".into()))?;
        let mut spec = FamilySpec::default_for(id);
        for (k, v) in &self.overrides {
            spec = spec.with_override(k, *v)?;
        }
        Ok(spec)
    }

    pub fn policy(&self) -> NumericPolicy {
        let base = NumericPolicy::default();
        match self.tol {
            Some(t) => base.with_identity_tol(t),
            None => base,
        }
    }

    /// `tol` when overridden, otherwise `default`.
    pub fn tolerance(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        RunConfig::parse_from(std::iter::once("dqm").chain(args.iter().copied())).unwrap()
    }

    fn round_trip(cfg: &RunConfig) -> RunConfig {
        RunConfig::parse_from(std::iter::once("dqm".to_string()).chain(cfg.to_args())).unwrap()
    }

    #[test]
    fn spectrum_overrides_are_canonical() {
        let cfg = parse(&[
            "spectrum",
            "--family",
            "dual_quantum_q_krawtchouk",
            "--p",
            "10",
            "--N",
            "3",
            "--q",
            "0.5",
        ]);
        let names: Vec<&str> = cfg.overrides.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(names, ["q", "N", "p"]);
        assert_eq!(round_trip(&cfg), cfg);
        assert_eq!(cfg.spec().unwrap().energy(3), 7.0);
    }

    #[test]
    fn delete_round_trips() {
        for args in [
            &["delete", "--family", "q_racah", "--levels", "1,2"][..],
            &[
                "--tol",
                "1e-9",
                "delete",
                "--family",
                "hahn",
                "--levels",
                "2,1",
                "--special",
            ],
            &["delete", "--family", "krawtchouk", "--l", "4", "--param", "p=0.25"],
            &[
                "--format", "csv", "delete", "--family", "racah", "--levels", "2", "--unsafe",
            ],
        ] {
            let cfg = parse(args);
            assert_eq!(round_trip(&cfg), cfg, "{args:?}");
        }
        assert_eq!(parse(&["delete", "--family", "hahn", "--l", "2"]).levels, vec![1, 2]);
    }

    #[test]
    fn verify_all_round_trips() {
        let cfg = parse(&["--out-dir", "/tmp/x", "verify-all", "--seed", "7"]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(round_trip(&cfg), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn last_assignment_wins() {
        let cfg = parse(&["spectrum", "--family", "krawtchouk", "--p", "0.2", "--param", "p=0.4"]);
        assert_eq!(cfg.overrides, vec![("p".to_string(), 0.4)]);
    }

    #[test]
    fn bad_inputs() {
        let e = RunConfig::parse_from(["dqm", "spectrum", "--family", "nope"]).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_INPUT);
        let e = RunConfig::parse_from(["dqm", "spectrum"]).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_INPUT);
        let e =
            RunConfig::parse_from(["dqm", "delete", "--family", "hahn", "--levels", "2,3", "--special"]).unwrap_err();
        assert!(matches!(e, CliError::Usage(_)));
        let e = RunConfig::parse_from(["dqm", "--tol", "-1", "verify-all"]).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_INPUT);
    }
}
