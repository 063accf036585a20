//! Command-line interface: argument parsing, layered configuration, CSV
//! ingestion and result files with provenance.
//!
//! Exit codes: 0 success, 2 configuration, 3 data, 4 numerical failure,
//! 5 missing critical values.

mod commands;
pub mod config;
pub mod dataset;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{ExperimentKind, TestStatistic};
use crate::wald::{Estimator, Hypothesis};

pub use dataset::{parse_dataset, ColumnMapping, EmpiricalDataset};

/// Parses a kebab-case name through the type's serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "stur-threshold",
    version,
    about = "Threshold predictive regressions with stochastic local-unit-root regressors"
)]
pub struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Progress messages on stderr (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one sample and write it as a dataset CSV
    Simulate(SimulateArgs),
    /// Least-squares threshold estimate
    Estimate(EstimateArgs),
    /// Sup-Wald tests with p-values
    Test(TestArgs),
    /// Regime-wise IVX fit
    Ivx(IvxArgs),
    /// Nonlinear least-squares fit of the persistence parameters
    FitPersistence(FitPersistenceArgs),
    /// Tabulate critical values of a limiting functional
    Critvals(CritvalsArgs),
    /// Monte Carlo size, power or threshold-accuracy experiment
    Mc(McArgs),
    /// Estimate, test both ways and attach p-values for one dataset
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpPreset {
    Benchmark,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McPreset {
    Benchmark,
    MildlyIntegrated,
    MildlyExplosive,
    NearNonstationary,
}

/// Where critical values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CritvalMode {
    /// Supplied tables first, then simulate.
    Auto,
    /// Supplied tables only; a missing table is an error.
    Tables,
    /// No p-values.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalArg {
    OlsH1,
    OlsH2,
    IvxH2,
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DataArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Response column
    #[arg(long)]
    pub y: Option<String>,
    /// Regressor columns (default: x1, x2, ...)
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<String>>,
    /// Threshold-variable column
    #[arg(long)]
    pub q: Option<String>,
    /// Persistence-shock columns (default: w1, w2, ... when present)
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<String>>,
    /// ISO-8601 date column to validate
    #[arg(long)]
    pub date: Option<String>,
    /// Regime intercepts
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub intercept: Option<bool>,
    /// Trimming quantiles of the threshold grid
    #[arg(long, value_delimiter = ',')]
    pub trim: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSettings {
    pub data: Option<PathBuf>,
    pub y: String,
    pub x: Vec<String>,
    pub q: String,
    pub w: Vec<String>,
    pub date: Option<String>,
    pub intercept: bool,
    pub trim: [f64; 2],
}

impl Default for DataSettings {
    fn default() -> Self {
        let m = ColumnMapping::default();
        Self {
            data: None,
            y: m.y,
            x: m.x,
            q: m.q,
            w: m.w,
            date: m.date,
            intercept: m.intercept,
            trim: [
                crate::estimate::DEFAULT_TRIMMING.0,
                crate::estimate::DEFAULT_TRIMMING.1,
            ],
        }
    }
}

impl DataSettings {
    pub fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            date: self.date.clone(),
            y: self.y.clone(),
            x: self.x.clone(),
            q: self.q.clone(),
            w: self.w.clone(),
            intercept: self.intercept,
        }
    }

    pub fn load(&self) -> Result<EmpiricalDataset> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--data is required".into()))?;
        parse_dataset(path, &self.mapping())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SimulateArgs {
    /// Response equation: benchmark or null
    #[arg(long, value_parser = kebab::<DgpPreset>)]
    pub preset: Option<DgpPreset>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of regressors
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Covariance of the response and regressor innovations
    #[arg(long, allow_hyphen_values = true)]
    pub cross_xy: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub preset: DgpPreset,
    pub n: usize,
    pub p: usize,
    pub c: f64,
    pub phi: f64,
    pub cross_xy: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            preset: DgpPreset::Benchmark,
            n: 250,
            p: 1,
            c: 1.0,
            phi: 0.25,
            cross_xy: 0.0,
            seed: 0,
            out: "sample.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// JSON output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateSettings {
    #[serde(flatten)]
    pub data: DataSettings,
    pub out: Option<PathBuf>,
}

/// Flags shared by the subcommands that attach p-values.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PvalueArgs {
    /// Localizing coefficient for the OLS limit
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Persistence-shock loadings for the OLS limit
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    /// JSON output of `fit-persistence` supplying c and phi
    #[arg(long)]
    pub persistence: Option<PathBuf>,
    /// Innovation covariance used for the OLS limit
    #[arg(long, allow_hyphen_values = true)]
    pub cross_xy: Option<f64>,
    /// auto, tables or none
    #[arg(long, value_parser = kebab::<CritvalMode>)]
    pub critvals: Option<CritvalMode>,
    /// Critical-value tables (CSV or JSON from `critvals`)
    #[arg(long, value_delimiter = ',')]
    pub tables: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub cv_steps: Option<usize>,
    #[arg(long)]
    pub cv_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c_z: Option<f64>,
    #[arg(long)]
    pub gamma_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvalueSettings {
    pub c: Option<f64>,
    pub phi: Option<Vec<f64>>,
    pub persistence: Option<PathBuf>,
    pub cross_xy: f64,
    pub critvals: CritvalMode,
    pub tables: Vec<PathBuf>,
    pub cv_steps: usize,
    pub cv_reps: usize,
    pub seed: u64,
    pub c_z: f64,
    pub gamma_z: f64,
}

impl Default for PvalueSettings {
    fn default() -> Self {
        let ivx = crate::ivx::IvxConfig::default();
        Self {
            c: None,
            phi: None,
            persistence: None,
            cross_xy: 0.0,
            critvals: CritvalMode::Auto,
            tables: Vec::new(),
            cv_steps: 1000,
            cv_reps: 2000,
            seed: 0,
            c_z: ivx.c_z,
            gamma_z: ivx.gamma_z,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub pvalues: PvalueArgs,
    /// linearity-only, joint-linearity-predictability or regime-slopes-zero
    #[arg(long, value_parser = kebab::<Hypothesis>)]
    pub hypothesis: Option<Hypothesis>,
    /// ols, ivx or both (comma separated)
    #[arg(long, value_delimiter = ',', value_parser = kebab::<Estimator>)]
    pub estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSettings {
    #[serde(flatten)]
    pub data: DataSettings,
    #[serde(flatten)]
    pub pvalues: PvalueSettings,
    pub hypothesis: Hypothesis,
    pub estimators: Vec<Estimator>,
    pub out: Option<PathBuf>,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            pvalues: PvalueSettings::default(),
            hypothesis: Hypothesis::JointLinearityPredictability,
            estimators: vec![Estimator::Ols, Estimator::Ivx],
            out: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct IvxArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Threshold; estimated from the IVX residuals when absent
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub c_z: Option<f64>,
    #[arg(long)]
    pub gamma_z: Option<f64>,
    /// Correct the instrument for the stochastic persistence term
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub correct: Option<bool>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvxSettings {
    #[serde(flatten)]
    pub data: DataSettings,
    pub gamma: Option<f64>,
    pub c_z: f64,
    pub gamma_z: f64,
    pub correct: bool,
    pub c: Option<f64>,
    pub phi: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl Default for IvxSettings {
    fn default() -> Self {
        let ivx = crate::ivx::IvxConfig::default();
        Self {
            data: DataSettings::default(),
            gamma: None,
            c_z: ivx.c_z,
            gamma_z: ivx.gamma_z,
            correct: false,
            c: None,
            phi: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct FitPersistenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Regressor column to fit (default: the first)
    #[arg(long)]
    pub regressor: Option<String>,
    /// Starting value of c
    #[arg(long, allow_hyphen_values = true)]
    pub c0: Option<f64>,
    /// Starting value of phi (default: zeros)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi0: Option<Vec<f64>>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Fail unless the fit converged
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub require_converged: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPersistenceSettings {
    #[serde(flatten)]
    pub data: DataSettings,
    pub regressor: Option<String>,
    pub c0: f64,
    pub phi0: Option<Vec<f64>>,
    pub max_iterations: usize,
    pub require_converged: bool,
    pub out: Option<PathBuf>,
}

impl Default for FitPersistenceSettings {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            regressor: None,
            c0: 0.0,
            phi0: None,
            max_iterations: crate::persistence::FitOptions::default().max_iterations,
            require_converged: true,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct CritvalsArgs {
    /// ols-h1, ols-h2, ivx-h2 or argmax
    #[arg(long, value_parser = kebab::<FunctionalArg>)]
    pub functional: Option<FunctionalArg>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cross_xy: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub trim: Option<Vec<f64>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub intercept: Option<bool>,
    /// Threshold effect per regressor (argmax)
    #[arg(long, allow_hyphen_values = true)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// csv or json (json keeps the draws for p-values)
    #[arg(long, value_parser = kebab::<TableFormat>)]
    pub format: Option<TableFormat>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritvalsSettings {
    pub functional: FunctionalArg,
    pub p: usize,
    pub c: f64,
    pub phi: f64,
    pub cross_xy: f64,
    pub trim: [f64; 2],
    pub intercept: bool,
    pub delta0: f64,
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub format: TableFormat,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for CritvalsSettings {
    fn default() -> Self {
        Self {
            functional: FunctionalArg::IvxH2,
            p: 1,
            c: 1.0,
            phi: 0.25,
            cross_xy: 0.0,
            trim: [
                crate::estimate::DEFAULT_TRIMMING.0,
                crate::estimate::DEFAULT_TRIMMING.1,
            ],
            intercept: true,
            delta0: 2.0,
            steps: 2000,
            reps: 2000,
            seed: 0,
            levels: crate::limitsim::DEFAULT_LEVELS.to_vec(),
            format: TableFormat::Csv,
            threads: None,
            out: "critvals.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct McArgs {
    /// threshold-accuracy, size or power
    #[arg(long, value_parser = kebab::<ExperimentKind>)]
    pub kind: Option<ExperimentKind>,
    /// benchmark, mildly-integrated, mildly-explosive or near-nonstationary
    #[arg(long, value_parser = kebab::<McPreset>)]
    pub preset: Option<McPreset>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub c: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = kebab::<Estimator>)]
    pub estimators: Option<Vec<Estimator>>,
    #[arg(long, value_parser = kebab::<Hypothesis>)]
    pub hypothesis: Option<Hypothesis>,
    /// sup-wald or at-estimated-threshold
    #[arg(long, value_parser = kebab::<TestStatistic>)]
    pub statistic: Option<TestStatistic>,
    #[arg(long, allow_hyphen_values = true)]
    pub cross_xy: Option<f64>,
    /// Nominal significance levels
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub cv_steps: Option<usize>,
    #[arg(long)]
    pub cv_reps: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub kind: ExperimentKind,
    pub preset: McPreset,
    pub reps: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub c: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub estimators: Option<Vec<Estimator>>,
    pub hypothesis: Option<Hypothesis>,
    pub statistic: Option<TestStatistic>,
    pub cross_xy: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub seed: u64,
    pub threads: usize,
    pub cv_steps: usize,
    pub cv_reps: usize,
    pub out: PathBuf,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Size,
            preset: McPreset::Benchmark,
            reps: None,
            n: None,
            c: None,
            phi: None,
            estimators: None,
            hypothesis: None,
            statistic: None,
            cross_xy: None,
            levels: None,
            seed: 0,
            threads: 1,
            cv_steps: 1000,
            cv_reps: 2000,
            out: "mc-out".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub pvalues: PvalueArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSettings {
    #[serde(flatten)]
    pub data: DataSettings,
    #[serde(flatten)]
    pub pvalues: PvalueSettings,
    pub out: Option<PathBuf>,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code. Failures print a one-line JSON object with the error
/// category and message on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let cat = e.category();
            eprintln!(
                "{}",
                serde_json::json!({ "error": cat.as_str(), "message": e.to_string() })
            );
            cat.exit_code()
        }
    }
}
