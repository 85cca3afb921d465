//! Config-driven command line: `verify`, `simulate`, `describe`, `sample`.
//!
//! Exit codes: 0 success, 1 failed checks or a runtime error, 2 a bad
//! command line or configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::dist::FactorizedDistribution;
use crate::eif::{fmt_f64, influence};
use crate::estimate::{mc_study_with, sample, StudyConfig};
use crate::generate::{generate, Shape};
use crate::params::ParameterSpec;
use crate::verify::{run_suite, verify_instance, CheckSuiteConfig, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "eifcheck",
    version,
    about = "Exact efficient influence functions and their numerical checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Run the verification suite and write report.json and checks.csv.
    Verify(CommonArgs),
    /// Run a Monte Carlo study and write study.csv and study.json.
    Simulate(CommonArgs),
    /// Print Psi, Var(D*) and the D* table; write eif_table.csv.
    Describe(CommonArgs),
    /// Draw a sample and write sample.csv.
    Sample(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the command's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Simulate,
    Describe,
    Sample,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSource {
    Generator {
        seed: u64,
        shape: Shape,
    },
    /// Path to a distribution file, relative to the config file.
    File(PathBuf),
    Inline(serde_json::Value),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub distribution: Option<DistributionSource>,
    pub parameter: Option<ParameterSpec>,
    pub parameters: Option<Vec<ParameterSpec>>,
    #[serde(default)]
    pub suite: CheckSuiteConfig,
    #[serde(default)]
    pub study: StudyConfig,
    pub sample: Option<SampleConfig>,
    pub output_dir: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_FAILED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// A parsed configuration with its distribution resolved.
pub struct Loaded {
    pub config: RunConfig,
    pub distribution: Option<FactorizedDistribution>,
    pub parameters: Vec<ParameterSpec>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(config_err)
    }
}

/// Reads and validates a configuration for `command`, applying overrides.
pub fn load(command: Command, args: &CommonArgs) -> CliResult<Loaded> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut config = RunConfig::from_json(&text)?;
    if let Some(c) = config.command {
        if c != command {
            return Err(config_err(
                format!("config is for '{c:?}', not '{command:?}'").to_lowercase(),
            ));
        }
    }
    if let Some(seed) = args.seed {
        match command {
            Command::Verify => config.suite.master_seed = seed,
            Command::Simulate => config.study.seed = seed,
            Command::Sample => {
                if let Some(s) = config.sample.as_mut() {
                    s.seed = seed;
                }
            }
            Command::Describe => {
                if let Some(DistributionSource::Generator { seed: s, .. }) =
                    config.distribution.as_mut()
                {
                    *s = seed;
                }
            }
        }
    }
    let distribution = match &config.distribution {
        None => None,
        Some(DistributionSource::Generator { seed, shape }) => {
            Some(generate(shape, *seed).map_err(config_err)?)
        }
        Some(DistributionSource::File(path)) => {
            let path = if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            };
            let text = fs::read_to_string(&path)
                .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            Some(FactorizedDistribution::from_json(&text).map_err(config_err)?)
        }
        Some(DistributionSource::Inline(v)) => {
            Some(FactorizedDistribution::from_json(&v.to_string()).map_err(config_err)?)
        }
    };
    let parameters = match (&config.parameter, &config.parameters) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "give either 'parameter' or 'parameters', not both",
            ))
        }
        (Some(p), None) => vec![p.clone()],
        (None, Some(ps)) => ps.clone(),
        (None, None) => Vec::new(),
    };
    if let Some(p) = &distribution {
        for spec in &parameters {
            spec.validate(p).map_err(config_err)?;
        }
    }
    let output_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("eifcheck-out"));
    Ok(Loaded {
        config,
        distribution,
        parameters,
        output_dir,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| run_err(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| run_err(format!("cannot write {}: {e}", path.display())))
}

fn require_distribution(loaded: &Loaded) -> CliResult<&FactorizedDistribution> {
    loaded
        .distribution
        .as_ref()
        .ok_or_else(|| config_err("this command needs a 'distribution'"))
}

/// Runs the suite, plus the per-instance checks for a configured distribution.
pub fn cmd_verify(loaded: &Loaded, out: &mut dyn std::io::Write) -> CliResult<bool> {
    loaded.config.suite.validate().map_err(config_err)?;
    let mut report = run_suite(&loaded.config.suite).map_err(run_err)?;
    if let Some(p) = &loaded.distribution {
        for (i, spec) in loaded.parameters.iter().enumerate() {
            let label = format!("config_{i}_{}", spec.label());
            report = report
                .merge(verify_instance(p, spec, &loaded.config.suite, &label).map_err(run_err)?);
        }
    }
    write_file(
        &loaded.output_dir,
        "report.json",
        &report.to_json().map_err(run_err)?,
    )?;
    write_file(
        &loaded.output_dir,
        "checks.csv",
        &report.to_csv().map_err(run_err)?,
    )?;
    writeln!(out, "{}", summary_text(&report)).map_err(run_err)?;
    Ok(report.pass)
}

pub fn summary_text(report: &VerificationReport) -> String {
    let mut s = String::new();
    for c in &report.summaries {
        let _ = writeln!(
            s,
            "{:<5} {:<32} {:<18} n={:<5} failed={:<4} worst={:e} tol={:e}",
            if c.pass { "ok" } else { "FAIL" },
            c.family,
            c.check,
            c.count,
            c.failed,
            c.worst,
            c.tolerance
        );
    }
    let _ = write!(
        s,
        "{} checks, {} failed: {}",
        report.n_checks,
        report.n_failed,
        if report.pass { "PASS" } else { "FAIL" }
    );
    s
}

pub fn cmd_simulate(loaded: &Loaded, out: &mut dyn std::io::Write) -> CliResult<()> {
    let p = require_distribution(loaded)?;
    let [spec] = loaded.parameters.as_slice() else {
        return Err(config_err("simulate needs exactly one parameter"));
    };
    let study = &loaded.config.study;
    if study.n == 0 || study.replications == 0 {
        return Err(config_err(
            "study.n and study.replications must be at least 1",
        ));
    }
    let report = mc_study_with(p, spec, study).map_err(run_err)?;
    write_file(
        &loaded.output_dir,
        "study.csv",
        &report.to_csv().map_err(run_err)?,
    )?;
    write_file(
        &loaded.output_dir,
        "study.json",
        &report.to_json().map_err(run_err)?,
    )?;
    writeln!(
        out,
        "{}: truth {} one-step mean {} (MC se {}), coverage {}, variance ratio {}",
        report.parameter,
        fmt_f64(report.truth),
        fmt_f64(report.mean_onestep),
        fmt_f64(report.mc_se_onestep),
        fmt_f64(report.coverage_95),
        fmt_f64(report.variance_ratio)
    )
    .map_err(run_err)
}

pub fn cmd_describe(loaded: &Loaded, out: &mut dyn std::io::Write) -> CliResult<()> {
    let p = require_distribution(loaded)?;
    if loaded.parameters.is_empty() {
        return Err(config_err("describe needs 'parameter' or 'parameters'"));
    }
    let many = loaded.parameters.len() > 1;
    for (i, spec) in loaded.parameters.iter().enumerate() {
        let d = influence(p, spec).map_err(run_err)?;
        let mut s = String::new();
        let _ = writeln!(s, "parameter: {}", spec.label());
        let _ = writeln!(s, "psi: {}", fmt_f64(d.psi));
        let _ = writeln!(s, "var_eif: {}", fmt_f64(d.variance(p)));
        for c in &d.components {
            let var: f64 = c.values.iter().zip(p.joint()).map(|(v, q)| q * v * v).sum();
            let _ = writeln!(
                s,
                "component {} (factors {}..{}): variance {}",
                c.name,
                c.factors.start,
                c.factors.end,
                fmt_f64(var)
            );
        }
        if let Some(gap) = d.restricted_discrepancy {
            let _ = writeln!(s, "restricted_discrepancy: {}", fmt_f64(gap));
        }
        let table = d.to_csv(p).map_err(run_err)?;
        s.push_str(&table);
        writeln!(out, "{s}").map_err(run_err)?;
        let name = if many {
            format!("eif_table_{i}_{}.csv", spec.label())
        } else {
            "eif_table.csv".into()
        };
        write_file(&loaded.output_dir, &name, &table)?;
    }
    Ok(())
}

pub fn cmd_sample(loaded: &Loaded, out: &mut dyn std::io::Write) -> CliResult<()> {
    let p = require_distribution(loaded)?;
    let cfg = loaded
        .config
        .sample
        .ok_or_else(|| config_err("sample needs a 'sample' section with n and seed"))?;
    if cfg.n == 0 {
        return Err(config_err("sample.n must be at least 1"));
    }
    let data = sample(p, cfg.n, cfg.seed).map_err(run_err)?;
    write_file(
        &loaded.output_dir,
        "sample.csv",
        &data.to_csv().map_err(run_err)?,
    )?;
    writeln!(
        out,
        "wrote {} rows to {}",
        data.len(),
        loaded.output_dir.join("sample.csv").display()
    )
    .map_err(run_err)
}

/// Dispatches a parsed command line and returns the exit code. Diagnostics
/// go to standard error.
pub fn run(cli: Cli) -> i32 {
    let (command, args) = match &cli.command {
        CommandLine::Verify(a) => (Command::Verify, a),
        CommandLine::Simulate(a) => (Command::Simulate, a),
        CommandLine::Describe(a) => (Command::Describe, a),
        CommandLine::Sample(a) => (Command::Sample, a),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = load(command, args).and_then(|loaded| match command {
        Command::Verify => {
            cmd_verify(&loaded, &mut out).map(|pass| if pass { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Simulate => cmd_simulate(&loaded, &mut out).map(|_| EXIT_OK),
        Command::Describe => cmd_describe(&loaded, &mut out).map(|_| EXIT_OK),
        Command::Sample => cmd_sample(&loaded, &mut out).map(|_| EXIT_OK),
    });
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("eifcheck: {e}");
            e.exit_code()
        }
    }
}
