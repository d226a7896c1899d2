//! Scenario handling and the `statfield` command line.
//!
//! A run is a pure function of the scenario: [`run_scenario`] returns a
//! [`RunReport`] whose payload depends only on the configuration and seed.
//! Wall-clock timings are kept in a separate map.

pub mod checks;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance_analysis::{fit_spectral_measure, AnalyticCovariance, CovarianceTable, FitOptions, Provenance, TableJson};
use crate::error::{Error, Result};
use crate::field_synthesis::GosMeasure;
use crate::fixtures;
use crate::grid_calculus::{GridSpec, TestFunction};
use crate::spectral_measure::{AtomSet, MeasureConfig, SpectralMeasure};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "STATFIELD_THREADS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Covariance oracles that replace the analytic one in the stationarity and
/// factorization checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counterexample {
    /// `(∫ x phi)(conj ∫ x psi) I`.
    Moment,
    /// Trace-preserving rotation depending on location.
    Rotating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub shifts: usize,
    pub pairs: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self { shifts: 5, pairs: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_dim: Option<usize>,
    pub measure: MeasureConfig,
    pub ensemble_size: usize,
    pub seed: u64,
    /// All registered checks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default)]
    pub witness: WitnessConfig,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub measure: SpectralMeasure,
    pub checks: Vec<(String, Option<f64>)>,
}

fn config_error(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses JSON into `T`, reporting the location of the first error as a JSON pointer.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        config_error(&pointer, e.into_inner().to_string())
    })
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_config(parse_json(text)?)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let measure = config.measure.build().map_err(|e| match e {
            Error::IndefiniteAtom { atom, .. } => config_error(&format!("/measure/atoms/{atom}"), e.to_string()),
            other => config_error("/measure", other.to_string()),
        })?;
        if measure.dim_space() != config.grid.dim() {
            return Err(config_error(
                "/measure/d",
                format!("measure lives on R^{}, grid on R^{}", measure.dim_space(), config.grid.dim()),
            ));
        }
        if let Some(n) = config.h_dim {
            if n != measure.dim_h() {
                return Err(config_error("/h_dim", format!("h_dim {n} but measure weights are {0}x{0}", measure.dim_h())));
            }
        }
        if config.ensemble_size < crate::field_synthesis::MIN_ENSEMBLE_SIZE {
            return Err(config_error(
                "/ensemble_size",
                format!("must be at least {}", crate::field_synthesis::MIN_ENSEMBLE_SIZE),
            ));
        }
        if config.witness.shifts < 5 {
            return Err(config_error("/witness/shifts", "at least 5 shifts are required"));
        }
        if config.witness.pairs < 6 {
            return Err(config_error("/witness/pairs", "at least 6 pairs are required"));
        }
        let checks = match &config.checks {
            None => checks::names().into_iter().map(|n| (n.to_string(), None)).collect(),
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for (i, c) in list.iter().enumerate() {
                    if checks::lookup(&c.name).is_none() {
                        return Err(config_error(
                            &format!("/checks/{i}/name"),
                            format!("unknown check '{}'; registered: {}", c.name, checks::names().join(", ")),
                        ));
                    }
                    if let Some(t) = c.tolerance {
                        if !t.is_finite() || t < 0.0 {
                            return Err(config_error(&format!("/checks/{i}/tolerance"), "must be finite and nonnegative"));
                        }
                    }
                    out.push((c.name.clone(), c.tolerance));
                }
                out
            }
        };
        Ok(Self { config, measure, checks })
    }

    /// The reference scenario with the given seed and ensemble size.
    pub fn fixture(seed: u64, ensemble_size: usize) -> Result<Self> {
        Self::from_config(ScenarioConfig {
            grid: fixtures::grid(),
            h_dim: Some(2),
            measure: MeasureConfig::from(&fixtures::measure()),
            ensemble_size,
            seed,
            checks: None,
            output_dir: None,
            counterexample: None,
            witness: WitnessConfig::default(),
        })
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.config).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Shared inputs of every check: the measure with its gos realization,
/// plus the default witness families.
pub struct Context {
    pub grid: GridSpec,
    pub measure: SpectralMeasure,
    pub gos: GosMeasure,
    pub pairs: Vec<(TestFunction, TestFunction)>,
    pub shifts: Vec<Vec<f64>>,
    pub counterexample: Option<Counterexample>,
}

impl Context {
    pub fn new(s: &Scenario) -> Result<Self> {
        let grid = s.config.grid.clone();
        let gos = GosMeasure::new(s.measure.clone(), s.config.ensemble_size, s.config.seed)?;
        Ok(Self {
            pairs: fixtures::probe_pairs(&grid, s.config.witness.pairs, 101),
            shifts: fixtures::random_shifts(&grid, s.config.witness.shifts, 102, 2.0),
            grid,
            measure: s.measure.clone(),
            gos,
            counterexample: s.config.counterexample,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub property: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub ensemble_size: usize,
    pub overall_pass: bool,
    pub checks: Vec<CheckEntry>,
    /// Milliseconds per check. Not part of the deterministic payload.
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunReport {
    /// The report without timings, as JSON.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timings_ms");
        v
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub context: Context,
}

/// Runs every selected check. A check that errors is recorded as failed
/// with the error message.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    let context = Context::new(s)?;
    let mut entries = Vec::with_capacity(s.checks.len());
    let mut timings_ms = BTreeMap::new();
    for (name, tol) in &s.checks {
        let (property, f) = checks::lookup(name).expect("validated check name");
        let start = Instant::now();
        let (pass, details) = match f(&context, *tol) {
            Ok(o) => (o.pass, o.details),
            Err(e) => (false, serde_json::json!({"error": e.to_string()})),
        };
        timings_ms.insert(name.clone(), start.elapsed().as_secs_f64() * 1e3);
        entries.push(CheckEntry {
            name: name.clone(),
            property: property.to_string(),
            pass,
            details,
        });
    }
    let report = RunReport {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: s.config_hash(),
        seed: s.config.seed,
        ensemble_size: s.config.ensemble_size,
        overall_pass: entries.iter().all(|e| e.pass),
        checks: entries,
        timings_ms,
    };
    Ok(RunOutput { report, context })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("no file name in {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RunOutput {
    /// `report.json`, the ensemble of `xi(all atoms)`, one field ensemble and
    /// the analytic covariance table on the witness pairs (JSON and CSV).
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let report = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        write_atomic(&dir.join("report.json"), &report)?;

        let ctx = &self.context;
        let mut buf = Vec::new();
        ctx.gos.xi_of_set(&AtomSet::all(ctx.measure.len()))?.write_csv(&mut buf)?;
        write_atomic(&dir.join("xi_all.csv"), &buf)?;

        buf.clear();
        ctx.gos.evaluate_field(&ctx.pairs[0].0)?.write_csv(&mut buf)?;
        write_atomic(&dir.join("field_probe.csv"), &buf)?;

        let table = CovarianceTable::from_oracle(
            &AnalyticCovariance { measure: ctx.measure.clone() },
            &ctx.pairs,
            Provenance::Analytic,
        )?;
        let json = serde_json::to_vec_pretty(&table.to_json()).expect("table serializes");
        write_atomic(&dir.join("gamma_table.json"), &json)?;
        buf.clear();
        table.write_csv(&mut buf)?;
        write_atomic(&dir.join("gamma_table.csv"), &buf)?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "statfield", version, about = "Synthesize and verify stationary random distribution fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file and write report.json plus CSV artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides the scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in three-atom scenario.
    Demo {
        #[arg(long, default_value_t = fixtures::SEED)]
        seed: u64,
        /// Ensemble size.
        #[arg(long = "M", default_value_t = fixtures::ENSEMBLE_SIZE)]
        m: usize,
        /// Write report.json and artifacts here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a spectral measure to a covariance table at given frequencies.
    Fit {
        table: PathBuf,
        /// Frequencies: points separated by ';', coordinates by ','.
        #[arg(long, allow_hyphen_values = true)]
        freqs: String,
        /// Write the fitted measure here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `"0,1;-2,0.5"` → `[[0, 1], [-2, 0.5]]`.
pub fn parse_frequencies(text: &str) -> Result<Vec<Vec<f64>>> {
    let points: Vec<&str> = if text.contains(';') {
        text.split(';').collect()
    } else {
        // Without ';' each comma-separated value is a point in R^1.
        text.split(',').collect()
    };
    let split_coords = text.contains(';');
    points
        .iter()
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let coords: Vec<&str> = if split_coords { p.split(',').collect() } else { vec![p] };
            coords
                .iter()
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::InvalidArgument(format!("bad frequency '{c}'")))
                })
                .collect()
        })
        .collect()
}

fn print_summary(out: &mut dyn Write, report: &RunReport) -> std::io::Result<()> {
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {:<26} {}", c.name, c.property)?;
    }
    writeln!(
        out,
        "overall: {} (seed {}, M = {})",
        if report.overall_pass { "PASS" } else { "FAIL" },
        report.seed,
        report.ensemble_size
    )
}

fn run_and_report(s: &Scenario, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let output = run_scenario(s)?;
    if let Some(dir) = out_dir {
        output.write_outputs(dir)?;
    }
    print_summary(out, &output.report)?;
    Ok(if output.report.overall_pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

#[derive(Debug, Serialize)]
struct FitOutput {
    measure: MeasureConfig,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Run { config, out: dir } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| config_error("", format!("cannot read {}: {e}", config.display())))?;
            let s = Scenario::from_json(&text)?;
            let dir = dir
                .or_else(|| s.config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("statfield-out"));
            run_and_report(&s, Some(&dir), out)
        }
        Command::Demo { seed, m, out: dir } => {
            let s = Scenario::fixture(seed, m).map_err(|e| match e {
                Error::Config { message, .. } => Error::InvalidArgument(message),
                other => other,
            })?;
            run_and_report(&s, dir.as_deref(), out)
        }
        Command::Fit { table, freqs, out: dest } => {
            let text = fs::read_to_string(&table)
                .map_err(|e| config_error("", format!("cannot read {}: {e}", table.display())))?;
            let json: TableJson = parse_json(&text)?;
            let table = CovarianceTable::from_json(&json).map_err(|e| config_error("/entries", e.to_string()))?;
            let freqs = parse_frequencies(&freqs)?;
            let fit = fit_spectral_measure(&table, &freqs, FitOptions::default())?;
            let result = FitOutput {
                measure: MeasureConfig::from(&fit.measure),
                residual: fit.residual,
                iterations: fit.iterations,
                converged: fit.converged,
            };
            let text = serde_json::to_string_pretty(&result).expect("fit serializes");
            match dest {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => writeln!(out, "{text}")?,
            }
            Ok(if fit.converged { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // A pool may already exist when called from a library user; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point shared by the binary and tests. Returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    let result = configure_threads().and_then(|_| execute(cli, out));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Io(_) => EXIT_CHECK_FAILED,
                _ => EXIT_USAGE,
            }
        }
    }
}
