//! Command-line front end: configuration, CSV ingestion and report output.

mod config;
mod ingest;
mod output;

pub use config::{ColumnRoles, Command, RunConfig, SimulateSection};
pub use ingest::{ingest_csv, ingest_reader, interaction_name, simulation_roles, write_raw_csv, INTERCEPT};
pub use output::{to_json, Versioned};

use crate::efficiency::te_report;
use crate::error::{Result, SfError};
use crate::estimation::{fit, FitResult, StartLog};
use crate::inference::lr_endogeneity_test;
use crate::model::{Dataset, Theta};
use crate::numeric::fmt_f64;
use crate::simulation::{generate_raw, run_monte_carlo, DgpConfig, Scheme};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const FIT_SCHEMA: &str = "endosf.fit.v1";
pub const LR_TEST_SCHEMA: &str = "endosf.lr_test.v1";
pub const MC_SUMMARY_SCHEMA: &str = "endosf.mc_summary.v1";
pub const ERROR_SCHEMA: &str = "endosf.error.v1";

#[derive(Debug, Parser)]
#[command(name = "endosf", version, about = "Stochastic frontier with an endogenous binary treatment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// TOML run configuration; flags below override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input CSV (header row required).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output file (a directory for `simulate`); standard output if absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n_starts: Option<usize>,
    /// Output column.
    #[arg(long, global = true)]
    pub y: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub inputs: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub treatment: Option<String>,
    /// Inefficiency determinants (may include the treatment).
    #[arg(long, global = true, value_delimiter = ',')]
    pub determinants: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub instruments: Option<Vec<String>>,
    /// Inputs interacted with the treatment dummy.
    #[arg(long, global = true, value_delimiter = ',')]
    pub interactions: Option<Vec<String>>,
    /// Columns to log-transform at ingestion.
    #[arg(long, global = true, value_delimiter = ',')]
    pub log: Option<Vec<String>>,
    /// Leave the treatment dummy out of the frontier.
    #[arg(long, global = true)]
    pub no_treatment_dummy: bool,
    /// Fit report whose estimate `te` evaluates.
    #[arg(long, global = true)]
    pub theta: Option<PathBuf>,
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Simulated sample size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Skip the efficiency summary in `simulate`.
    #[arg(long, global = true)]
    pub no_te: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Fit the model and report estimates, covariance and per-start log.
    Fit,
    /// Per-row technical efficiency (CSV) and its mean.
    Te,
    /// Likelihood-ratio test of exogeneity (ρ_U = 0).
    Test,
    /// Monte Carlo replication: bias/SD and efficiency tables.
    Simulate,
    /// Write one simulated sample as CSV.
    Generate,
}

impl Cli {
    /// Loads the optional config file and applies the flag overrides.
    pub fn into_config(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.command = Some(match self.command {
            CliCommand::Fit => Command::Fit,
            CliCommand::Te => Command::Te,
            CliCommand::Test => Command::Test,
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Generate => Command::Generate,
        });
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        if self.data.is_some() {
            c.data_path = self.data;
        }
        if self.output.is_some() {
            c.output_path = self.output;
        }
        if self.theta.is_some() {
            c.theta_path = self.theta;
        }
        set!(c.seed, self.seed);
        set!(c.fit.n_starts, self.n_starts);
        set!(c.columns.output, self.y);
        set!(c.columns.inputs, self.inputs);
        set!(c.columns.treatment, self.treatment);
        set!(c.columns.inefficiency_determinants, self.determinants);
        set!(c.columns.instruments, self.instruments);
        set!(c.interactions, self.interactions);
        set!(c.columns.log, self.log);
        if self.no_treatment_dummy {
            c.columns.treatment_dummy = false;
        }
        if let Some(s) = self.scheme {
            c.simulate.scheme = Scheme::parse(&s)?;
        }
        set!(c.simulate.n, self.n);
        set!(c.simulate.reps, self.reps);
        if self.no_te {
            c.simulate.with_te = false;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

/// Machine-readable result of the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_obs: usize,
    pub converged: bool,
    pub restricted: bool,
    pub loglik: f64,
    pub boundary_flag: bool,
    pub parameters: Vec<ParamRow>,
    pub theta: Theta,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Why the covariance is absent (e.g. boundary estimate).
    pub covariance_note: Option<String>,
    pub n_starts_used: usize,
    pub best_start_index: usize,
    pub starts: Vec<StartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub origin: String,
    pub initial_loglik: Option<f64>,
    pub final_loglik: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub method: String,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&StartLog> for StartSummary {
    fn from(l: &StartLog) -> Self {
        Self {
            index: l.index,
            origin: l.origin.clone(),
            initial_loglik: finite(l.initial_loglik),
            final_loglik: finite(l.final_loglik),
            converged: l.converged,
            iterations: l.iterations,
            method: l.method.clone(),
        }
    }
}

impl From<&FitResult> for FitReport {
    fn from(f: &FitResult) -> Self {
        let se = f.std_errors();
        Self {
            n_obs: f.n_obs,
            converged: f.converged,
            restricted: f.restricted,
            loglik: f.loglik_value,
            boundary_flag: f.boundary_flag,
            parameters: f
                .param_names
                .iter()
                .zip(f.theta_hat.to_vec())
                .enumerate()
                .map(|(k, (name, estimate))| ParamRow {
                    name: name.clone(),
                    estimate,
                    std_error: se.as_ref().map(|s| s[k]),
                })
                .collect(),
            theta: f.theta_hat.clone(),
            covariance: f.covariance.clone(),
            covariance_note: f.covariance_note.clone(),
            n_starts_used: f.n_starts_used,
            best_start_index: f.best_start_index,
            starts: f.per_start_log.iter().map(StartSummary::from).collect(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// JSON error object written to standard error.
pub fn error_json(e: &SfError) -> String {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        error: ErrorBody<'a>,
    }
    to_json(&Versioned {
        schema: ERROR_SCHEMA,
        body: &Wrapper {
            error: ErrorBody {
                kind: e.kind(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            },
        },
    })
    .unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}\n", e.kind()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn load_data(config: &RunConfig) -> Result<Dataset> {
    let path = config
        .data_path
        .as_deref()
        .ok_or_else(|| SfError::Config("`data_path` (--data) is required for this command".into()))?;
    ingest_csv(path, &config.columns, &config.interactions)
}

fn dgp(config: &RunConfig) -> Result<DgpConfig> {
    let s = &config.simulate;
    let mut d = DgpConfig::new(s.scheme, s.n, s.reps, config.seed);
    if let Some(g) = &s.gamma {
        d.gamma = g.clone();
    }
    d.validate()?;
    Ok(d)
}

/// Reads the estimate from a fit report written by the `fit` command.
pub fn read_fit_report(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SfError::Config(format!("cannot read fit report {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SfError::Config(format!("fit report {}: {e}", path.display())))
}

/// Per-row efficiency CSV: `row,te` lines followed by a `mean` line.
pub fn te_csv(te: &[f64], mean: f64) -> String {
    let mut out = String::from("row,te\n");
    for (i, v) in te.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_f64(*v)));
    }
    out.push_str(&format!("mean,{}\n", fmt_f64(mean)));
    out
}

/// Executes one configured command.
pub fn execute(config: &RunConfig) -> Result<()> {
    let command = config
        .command
        .ok_or_else(|| SfError::Config("no command given (fit, te, test, simulate, generate)".into()))?;
    let out = config.output_path.as_deref();
    match command {
        Command::Fit => {
            let data = load_data(config)?;
            let f = fit(&data, &config.fit_options())?;
            emit(out, &to_json(&Versioned { schema: FIT_SCHEMA, body: &FitReport::from(&f) })?)
        }
        Command::Te => {
            let data = load_data(config)?;
            let theta = match &config.theta_path {
                Some(p) => {
                    let t = read_fit_report(p)?.theta;
                    t.check_dims(data.dims()).map_err(|e| SfError::Config(e.to_string()))?;
                    t
                }
                None => fit(&data, &config.fit_options())?.theta_hat,
            };
            let report = te_report(&theta, &data)?;
            emit(out, &te_csv(&report.te, report.mean_te))
        }
        Command::Test => {
            let data = load_data(config)?;
            let r = lr_endogeneity_test(&data, &config.fit_options())?;
            emit(out, &to_json(&Versioned { schema: LR_TEST_SCHEMA, body: &r })?)
        }
        Command::Simulate => {
            let d = dgp(config)?;
            let summary = run_monte_carlo(&d, &config.fit_options(), config.simulate.with_te)?;
            let json = to_json(&Versioned { schema: MC_SUMMARY_SCHEMA, body: &summary })?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join("table1.csv"), summary.table1_csv())?;
                    std::fs::write(dir.join("table2.csv"), summary.table2_csv())?;
                    std::fs::write(dir.join("summary.json"), json)?;
                    Ok(())
                }
                None => emit(None, &json),
            }
        }
        Command::Generate => {
            let d = dgp(config)?;
            let (raw, _) = generate_raw(&d, 0)?;
            let mut buf = Vec::new();
            write_raw_csv(&raw, &mut buf)?;
            emit(out, &String::from_utf8(buf).expect("CSV output is UTF-8"))
        }
    }
}

/// Runs a configuration and maps the outcome to a process exit code,
/// writing a JSON error object to standard error on failure.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(()) => 0,
        Err(e) => {
            eprint!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

/// Entry point of the binary.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            // Help and version requests exit 0; usage errors are config errors.
            return if code == 0 { 0 } else { 2 };
        }
    };
    match cli.into_config() {
        Ok(c) => run(&c),
        Err(e) => {
            eprint!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "endosf",
            "simulate",
            "--scheme",
            "s3",
            "--n",
            "250",
            "--reps",
            "10",
            "--seed",
            "7",
            "--inputs",
            "a,b",
        ])
        .unwrap();
        let c = cli.into_config().unwrap();
        assert_eq!(c.command, Some(Command::Simulate));
        assert_eq!(c.simulate.scheme, Scheme::S3);
        assert_eq!((c.simulate.n, c.simulate.reps, c.seed), (250, 10, 7));
        assert_eq!(c.columns.inputs, ["a", "b"]);
        assert_eq!(c.fit_options().seed, 7);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_from_args(["endosf", "bogus"]), 2);
        assert_eq!(main_from_args(["endosf", "fit", "--n-starts", "x"]), 2);
        let c = RunConfig {
            command: Some(Command::Fit),
            ..RunConfig::default()
        };
        assert_eq!(run(&c), 2);
        let e = SfError::Data("x".into());
        let v: serde_json::Value = serde_json::from_str(&error_json(&e)).unwrap();
        assert_eq!(v["error"]["exit_code"], 3);
        assert_eq!(v["schema"], ERROR_SCHEMA);
    }

    #[test]
    fn te_csv_layout() {
        let s = te_csv(&[0.5, 0.25], 0.375);
        assert_eq!(s.lines().next(), Some("row,te"));
        assert!(s.ends_with("mean,3.7500000000000000e-1\n"));
    }
}
