//! Scenario runner behind the `cocycle-lab` binary.
//!
//! Every subcommand produces a JSON report with a full parameter echo. The
//! exit code is 0 when the subcommand's check passes, 2 when a check fails,
//! and 1 on any other error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cocycle_lab::arithmetic::{beta_estimate, cf_expand, AlphaInput};
use cocycle_lab::blockdiag_real::{blockdiag_real_auto, BlockParams};
use cocycle_lab::experiments::{antiself_positivity_probe, simple_spectrum_probe, uh_density_probe, ProbeParams};
use cocycle_lab::hermdiag::{blockdiag_hsp_auto, herm_track, sylvester_inertia, TrackParams};
use cocycle_lab::lyapunov::{acceleration, height_spectra, lyap_spectrum, AccelParams, SpectrumParams};
use cocycle_lab::splitting::{oseledets_bundles, BundleParams};
use cocycle_lab::topology::{degree, rotation_number, RotationParams};
use cocycle_lab::trigmat::{CocycleSpec, Group, SpecJson, TrigMapJson, TrigMatrixMap};
use serde::Serialize;
use serde_json::{json, Value};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "COCYCLE_LAB_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "cocycle-lab", version, about = "Numerical experiments on quasi-periodic matrix cocycles")]
pub struct Cli {
    /// Seed for every randomized estimator.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of only printing it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Continued-fraction expansion of a frequency.
    Cf(CfArgs),
    /// Group and symmetry-class residuals of a spec.
    CheckGroup(SpecArg),
    /// Lyapunov spectrum on one horizontal line.
    Lyap(LyapArgs),
    /// Acceleration of `L^k` from a set of strip heights.
    Accel(AccelArgs),
    /// Fibered rotation number of an SL(2, R) cocycle.
    Rotnum(RotnumArgs),
    /// Degree of an SL(2, R) loop.
    Degree(SpecArg),
    /// Unstable, stable and center bundles.
    Split(SplitArgs),
    /// Block diagonalization by an analytic symplectic conjugacy.
    Blockdiag(SplitArgs),
    /// Analytic eigenvalue tracking of a Hermitian family.
    Hermdiag(HermArgs),
    /// Inertia of an invertible Hermitian family via an analytic congruence.
    Inertia(HermArgs),
    /// Perturbation probes.
    Perturb(PerturbArgs),
    /// CSV table of `(y, L^k(y), stderr)`.
    PhaseTable(PhaseArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CfArgs {
    /// Decimal string, or `p/q` for an (always rejected) rational.
    #[arg(long, conflicts_with = "surd")]
    pub alpha: Option<String>,
    /// Quadratic surd `(p + sqrt(d)) / q` given as `p,d,q`.
    #[arg(long, allow_hyphen_values = true)]
    pub surd: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    /// Window for the Liouville-exponent proxy (defaults to half the depth).
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpecArg {
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LyapArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub orbits: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AccelArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Strictly decreasing positive heights.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.025,0.0125,0.00625,0.003125,0.0015625")]
    pub ys: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub orbits: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RotnumArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Dimension of the unstable bundle.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Push-forward length (chosen from the domination rate when omitted).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Fourier coefficients below this are dropped from the report.
    #[arg(long, default_value_t = 1e-12)]
    pub coeff_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct HermArgs {
    /// Hermitian family: `{"dim", "period", "fourier"}`.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 4096)]
    pub refine_budget: usize,
    /// Base grid offset in cells.
    #[arg(long, default_value_t = 0.5)]
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    Simple,
    Antiself,
    Uh,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = ProbeMode::Simple)]
    pub mode: ProbeMode,
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PhaseArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ys: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub orbits: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Lab(cocycle_lab::Error),
}

impl From<cocycle_lab::Error> for CliError {
    fn from(e: cocycle_lab::Error) -> Self {
        use cocycle_lab::Error as E;
        match e {
            E::GroupViolation { .. }
            | E::NotDominated(_)
            | E::NotUH
            | E::ResidualTooLarge { .. }
            | E::NonzeroSignature(_) => CliError::Check(e.to_string()),
            other => CliError::Lab(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 2,
            _ => 1,
        }
    }
}

/// A finished subcommand: its verdict and what it wants written.
#[derive(Debug)]
pub struct Report {
    pub pass: bool,
    pub json: Value,
    /// Plot table written to `--out` in place of the JSON, when present.
    pub csv: Option<String>,
}

/// What the binary prints and returns.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and runs the scenario.
pub fn run_from_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome {
                    code: 1,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let result = run_scenario(cli).and_then(|report| emit(cli, report));
    match result {
        Ok((code, stdout)) => Outcome {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: e.exit_code(),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn emit(cli: &Cli, report: Report) -> Result<(u8, String), CliError> {
    let code = if report.pass { 0 } else { 2 };
    let pretty = serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n";
    match (&cli.out, report.csv) {
        (Some(path), Some(csv)) => {
            write_file(path, &csv)?;
            Ok((code, pretty))
        }
        (None, Some(csv)) => Ok((code, csv)),
        (Some(path), None) => {
            write_file(path, &pretty)?;
            Ok((code, pretty))
        }
        (None, None) => Ok((code, pretty)),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_file(path)?).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Reads a spec and rejects it if it fails its group or class check.
pub fn load_spec(path: &Path) -> Result<CocycleSpec, CliError> {
    let spec = load_spec_unchecked(path)?;
    spec.validate()?;
    Ok(spec)
}

fn load_spec_unchecked(path: &Path) -> Result<CocycleSpec, CliError> {
    let raw: SpecJson = parse_json(path)?;
    raw.into_spec().map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn load_hermitian(path: &Path) -> Result<TrigMatrixMap, CliError> {
    let raw: TrigMapJson = parse_json(path)?;
    raw.into_map().map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn envelope(cli: &Cli, result: Value) -> Value {
    json!({
        "command": &cli.command,
        "seed": cli.seed,
        "result": result,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn accel_params(ys: &[f64], iters: usize, orbits: usize, seed: u64) -> AccelParams {
    AccelParams {
        heights: ys.to_vec(),
        spectrum: SpectrumParams { iters, orbits, seed },
        ..AccelParams::default()
    }
}

fn bundle_params(a: &SplitArgs, seed: u64) -> BundleParams {
    BundleParams {
        grid: a.grid,
        iters: a.iters,
        seed,
        ..BundleParams::default()
    }
}

fn track_params(a: &HermArgs) -> TrackParams {
    TrackParams {
        grid: a.grid,
        refine_budget: a.refine_budget,
        offset: a.offset,
    }
}

pub fn run_scenario(cli: &Cli) -> Result<Report, CliError> {
    let seed = cli.seed;
    let (pass, result, csv) = match &cli.command {
        Command::Cf(a) => {
            let input = match (&a.alpha, &a.surd) {
                (Some(s), None) => match s.split_once('/') {
                    Some((p, q)) => {
                        let num = |t: &str| t.trim().parse::<i64>().map_err(|e| CliError::Usage(e.to_string()));
                        AlphaInput::Rational(num(p)?, num(q)?)
                    }
                    None => AlphaInput::Decimal(s.clone()),
                },
                (None, Some(s)) => parse_surd(s)?,
                _ => return Err(CliError::Usage("give exactly one of --alpha, --surd".into())),
            };
            let freq = cf_expand(&input, a.depth)?;
            let invariants = freq.check_invariants();
            let beta = beta_estimate(&freq, a.window).ok();
            let result = json!({
                "frequency": to_value(&freq),
                "beta_estimate": beta,
                "invariants_ok": invariants.is_ok(),
                "invariant_error": invariants.as_ref().err(),
            });
            (invariants.is_ok(), result, None)
        }
        Command::CheckGroup(a) => {
            let spec = load_spec_unchecked(&a.spec)?;
            let (g, c) = (spec.group_residual(), spec.class_residual());
            let pass = spec.validate().is_ok();
            let result = json!({
                "group": spec.group.to_string(),
                "symmetry": to_value(&spec.symmetry),
                "group_residual": g,
                "class_residual": c,
                "pass": pass,
            });
            (pass, result, None)
        }
        Command::Lyap(a) => {
            let spec = load_spec(&a.spec)?;
            let params = SpectrumParams {
                iters: a.iters,
                orbits: a.orbits,
                seed,
            };
            let s = lyap_spectrum(&spec, a.y, &params)?;
            let symmetric = matches!(spec.group, Group::SL2R | Group::SL2C | Group::SpR(_) | Group::HSp(_));
            let result = json!({
                "spectrum": to_value(&s),
                "ordering_defect": s.ordering_defect(),
                "symmetry_defect": symmetric.then(|| s.symmetry_defect()),
            });
            (true, result, None)
        }
        Command::Accel(a) => {
            let spec = load_spec(&a.spec)?;
            let acc = acceleration(&spec, a.k, &accel_params(&a.ys, a.iters, a.orbits, seed))?;
            (acc.quantized, to_value(&acc), None)
        }
        Command::Rotnum(a) => {
            let spec = load_spec(&a.spec)?;
            let params = RotationParams {
                iters: a.iters,
                starts: a.starts,
                seed,
            };
            let r = rotation_number(&spec, &params)?;
            (r.consistent, to_value(&r), None)
        }
        Command::Degree(a) => {
            let spec = load_spec(&a.spec)?;
            let d = degree(&spec.map)?;
            (true, json!({ "degree": d }), None)
        }
        Command::Split(a) => {
            let spec = load_spec(&a.spec)?;
            let b = oseledets_bundles(&spec, a.n, &bundle_params(a, seed))?;
            let result = json!({
                "n": b.n,
                "iters": b.iters,
                "domination": to_value(&b.domination),
                "unstable": to_value(&b.unstable.to_json()),
                "stable": to_value(&b.stable.to_json()),
                "center": b.center.as_ref().map(|c| to_value(&c.to_json())),
            });
            (true, result, None)
        }
        Command::Blockdiag(a) => {
            let spec = load_spec(&a.spec)?;
            let params = BlockParams {
                bundles: bundle_params(a, seed),
                ..BlockParams::default()
            };
            let pkg = match spec.group {
                Group::HSp(_) => blockdiag_hsp_auto(&spec, a.n, &params)?,
                _ => blockdiag_real_auto(&spec, a.n, &params)?,
            };
            (true, to_value(&pkg.to_json(a.coeff_tol)), None)
        }
        Command::Hermdiag(a) => {
            let g = load_hermitian(&a.spec)?;
            let t = herm_track(&g, &track_params(a))?;
            let result = json!({
                "k": t.k(),
                "sigma": t.sigma,
                "cycle_lengths": t.cycles.cycles.iter().map(Vec::len).collect::<Vec<_>>(),
                "group_sizes": t.group_sizes,
                "refinements": t.refinements,
                "diag_residual": t.diag_residual,
                "monodromy_residual": t.monodromy_residual,
                "xs": t.xs,
                "curves": t.curves,
            });
            (true, result, None)
        }
        Command::Inertia(a) => {
            let g = load_hermitian(&a.spec)?;
            let r = sylvester_inertia(&g, &track_params(a))?;
            let result = json!({
                "p": r.p,
                "q": r.q,
                "k": r.track.k(),
                "cycle_signs": r.cycle_signs,
                "period_residual": r.period_residual,
                "congruence_residual": r.congruence_residual,
            });
            (true, result, None)
        }
        Command::Perturb(a) => {
            let spec = load_spec(&a.spec)?;
            let mut params = ProbeParams::default();
            params.accel.spectrum.seed = seed;
            params.rotation.seed = seed;
            let r = match a.mode {
                ProbeMode::Simple => simple_spectrum_probe(&spec, a.eps, &params)?,
                ProbeMode::Antiself => antiself_positivity_probe(&spec, a.eps, &params)?,
                ProbeMode::Uh => uh_density_probe(&spec, a.eps, &params)?,
            };
            (r.pass, to_value(&r), None)
        }
        Command::PhaseTable(a) => {
            let spec = load_spec(&a.spec)?;
            if a.k == 0 || a.k > spec.dim() {
                return Err(CliError::Usage(format!("k must lie in 1..={}", spec.dim())));
            }
            if a.ys.iter().any(|y| !y.is_finite()) {
                return Err(CliError::Usage("heights must be finite".into()));
            }
            let params = SpectrumParams {
                iters: a.iters,
                orbits: a.orbits,
                seed,
            };
            let rows: Vec<(f64, f64, f64)> = if a.ys.is_empty() {
                Vec::new()
            } else {
                height_spectra(&spec, &a.ys, &params)?[1..]
                    .iter()
                    .map(|s| (s.y, s.upper(a.k), s.upper_stderr(a.k)))
                    .collect()
            };
            let mut csv = format!("y,L^{},stderr\n", a.k);
            for (y, l, e) in &rows {
                writeln!(csv, "{y},{l},{e}").expect("write to string");
            }
            (true, json!({ "rows": rows }), Some(csv))
        }
    };
    Ok(Report {
        pass,
        json: envelope(cli, result),
        csv,
    })
}

fn parse_surd(s: &str) -> Result<AlphaInput, CliError> {
    let bad = || CliError::Usage(format!("--surd expects p,d,q with d >= 0, got {s:?}"));
    let parts: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [p, d, q] => Ok(AlphaInput::QuadraticSurd {
            p,
            d: u64::try_from(d).map_err(|_| bad())?,
            q,
        }),
        _ => Err(bad()),
    }
}

/// Applies the thread cap from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
