//! Monte Carlo harness: threshold-estimator accuracy, empirical size and
//! power over a grid of sample sizes and persistence parameters.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{simulate_threshold_keyed, PersistenceSpec, ThresholdDgpSpec};
use crate::error::{Error, Result};
use crate::estimate::{estimate_threshold, ThresholdGrid};
use crate::innovations::CovarianceSpec;
use crate::ivx::{estimate_threshold_ivx, Correction, IvxConfig};
use crate::limitsim::{
    tabulate_critical_values, CriticalValueTable, Functional, MeshSpec, TableParams,
};
use crate::provenance::Provenance;
use crate::rng::{mix64, StreamKey};
use crate::stats;
use crate::wald::{dof, sup_wald, wald_at, Estimator, Hypothesis, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ThresholdAccuracy,
    Size,
    Power,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ThresholdAccuracy => "threshold-accuracy",
            Self::Size => "size",
            Self::Power => "power",
        }
    }
}

/// Which statistic a size or power experiment rejects on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatistic {
    /// Supremum over the grid against tabulated limit quantiles.
    SupWald,
    /// Wald at the least-squares threshold estimate against chi-square.
    AtEstimatedThreshold,
}

/// Regressor persistence scenarios for the test experiments, each a
/// single `(c, phi)` choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersistenceScenario {
    /// Just on the explosive side of unity: `c = 1`.
    MildlyIntegrated,
    /// Well on the explosive side: `c = 10`.
    MildlyExplosive,
    /// Well below unity: `c = -10`.
    NearNonstationary,
}

impl PersistenceScenario {
    pub fn c_phi(self) -> (f64, f64) {
        match self {
            Self::MildlyIntegrated => (1.0, 0.25),
            Self::MildlyExplosive => (10.0, 0.25),
            Self::NearNonstationary => (-10.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n_list: Vec<usize>,
    pub c_list: Vec<f64>,
    pub phi_list: Vec<f64>,
    pub reps: usize,
    /// Nominal significance levels.
    pub levels: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub hypothesis: Hypothesis,
    pub statistic: TestStatistic,
    /// Response equation for accuracy and power experiments; size
    /// experiments use the no-effect, no-predictability model.
    pub effect: ThresholdDgpSpec,
    /// Covariance of `u_y` with each `u_x`.
    pub cross_xy: f64,
    pub trimming: (f64, f64),
    pub ivx: IvxConfig,
    /// Use the instrument corrected for the stochastic persistence term.
    #[serde(default)]
    pub ivx_correction: bool,
    pub seed: u64,
    /// Mesh for sup-Wald critical values simulated when no supplied table
    /// matches. `None` makes a missing table an error.
    pub table_mesh: Option<MeshSpec>,
}

impl ExperimentSpec {
    /// The benchmark grid: `c in {1, 2, 5, 10}`, `phi in {0, 0.05, 0.25, 0.5}`,
    /// `n in {250, 500}`, 5000 replications for accuracy and 1000 for tests.
    pub fn benchmark(kind: ExperimentKind) -> Self {
        Self {
            kind,
            n_list: vec![250, 500],
            c_list: vec![1.0, 2.0, 5.0, 10.0],
            phi_list: vec![0.0, 0.05, 0.25, 0.5],
            reps: match kind {
                ExperimentKind::ThresholdAccuracy => 5000,
                _ => 1000,
            },
            levels: vec![0.05],
            estimators: vec![Estimator::Ols, Estimator::Ivx],
            hypothesis: Hypothesis::JointLinearityPredictability,
            statistic: TestStatistic::SupWald,
            effect: ThresholdDgpSpec::benchmark(1),
            cross_xy: 0.0,
            trimming: crate::estimate::DEFAULT_TRIMMING,
            ivx: IvxConfig::default(),
            ivx_correction: false,
            seed: 0,
            table_mesh: Some(MeshSpec {
                steps: 1000,
                reps: 2000,
                seed: 0,
            }),
        }
    }

    /// Benchmark grid restricted to one persistence scenario.
    pub fn scenario(kind: ExperimentKind, scenario: PersistenceScenario) -> Self {
        let (c, phi) = scenario.c_phi();
        Self {
            c_list: vec![c],
            phi_list: vec![phi],
            ..Self::benchmark(kind)
        }
    }

    pub fn p(&self) -> usize {
        self.effect.p()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.reps == 0 {
            return bad("at least one replication is needed".into());
        }
        if self.n_list.is_empty() || self.c_list.is_empty() || self.phi_list.is_empty() {
            return bad("n, c and phi lists must be non-empty".into());
        }
        if let Some(n) = self.n_list.iter().find(|n| **n < 20) {
            return bad(format!("sample size {n} is below 20"));
        }
        if self.estimators.is_empty() {
            return bad("no estimator selected".into());
        }
        if self.kind != ExperimentKind::ThresholdAccuracy
            && (self.levels.is_empty() || self.levels.iter().any(|a| !(0.0 < *a && *a < 1.0)))
        {
            return bad("significance levels must lie in (0, 1)".into());
        }
        let (a, b) = self.trimming;
        if !(0.0 < a && a < b && b < 1.0) {
            return bad(format!("trimming [{a}, {b}] is not inside (0, 1)"));
        }
        if self.p() == 0 || 2 * self.p() + 1 > 32 {
            return bad(format!("{} regressors is outside 1..=15", self.p()));
        }
        if !self.cross_xy.is_finite() || self.cross_xy.abs() >= 1.0 {
            return bad("cross covariance must lie in (-1, 1)".into());
        }
        self.ivx.validate()?;
        if let Some(m) = &self.table_mesh {
            m.validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &c in &self.c_list {
                for &phi in &self.phi_list {
                    out.push(Cell { n, c, phi });
                }
            }
        }
        out
    }

    fn covariance(&self) -> CovarianceSpec {
        CovarianceSpec::identity(self.p(), 1).with_cross_xy(self.cross_xy)
    }

    fn dgp(&self) -> ThresholdDgpSpec {
        match self.kind {
            ExperimentKind::Size => ThresholdDgpSpec::null(self.p()),
            _ => self.effect.clone(),
        }
    }

    fn method<'a>(&self, est: Estimator, correction: Option<&'a Correction>) -> Method<'a> {
        match est {
            Estimator::Ols => Method::Ols,
            Estimator::Ivx => Method::Ivx {
                cfg: self.ivx,
                correction,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub c: f64,
    pub phi: f64,
}

impl Cell {
    /// Seed stream of the cell; depends only on `(n, c, phi)`.
    pub fn key(&self, seed: u64) -> StreamKey {
        let id = mix64(mix64(self.n as u64) ^ self.c.to_bits()) ^ self.phi.to_bits();
        StreamKey::new(seed, mix64(id))
    }
}

/// Outcome of one replication for one estimator; failures keep the error
/// message.
pub type Outcome = std::result::Result<f64, String>;

/// Per-replication outcomes of one cell, one vector per estimator in the
/// order of `spec.estimators`. Accuracy experiments store `gamma_hat -
/// gamma0`; test experiments store the statistic.
#[derive(Debug, Clone)]
pub struct CellDraws {
    pub cell: Cell,
    pub values: Vec<Vec<Outcome>>,
}

impl CellDraws {
    /// Successful outcomes of estimator `j`.
    pub fn ok(&self, j: usize) -> Vec<f64> {
        self.values[j]
            .iter()
            .filter_map(|v| v.as_ref().ok().copied())
            .collect()
    }
}

fn replicate(spec: &ExperimentSpec, cell: Cell, key: StreamKey) -> Result<Vec<Outcome>> {
    let p = spec.p();
    let pers = PersistenceSpec::new(vec![cell.c; p], vec![cell.phi]);
    let dgp = spec.dgp();
    let sim = simulate_threshold_keyed(&dgp, &pers, &spec.covariance(), cell.n, key)?;
    let sample = &sim.sample;
    let grid = ThresholdGrid::for_sample(sample, spec.trimming.0, spec.trimming.1)?;
    let correction = spec
        .ivx_correction
        .then(|| Correction::from_path(&sim.path));
    let ols_gamma = match (spec.kind, spec.statistic) {
        (ExperimentKind::ThresholdAccuracy, _) | (_, TestStatistic::AtEstimatedThreshold) => Some(
            estimate_threshold(sample, &grid)
                .map(|f| f.gamma_hat)
                .map_err(|e| e.to_string()),
        ),
        _ => None,
    };
    Ok(spec
        .estimators
        .iter()
        .map(|&est| -> Outcome {
            let method = spec.method(est, correction.as_ref());
            let msg = |e: Error| e.to_string();
            match spec.kind {
                ExperimentKind::ThresholdAccuracy => {
                    let g = match est {
                        Estimator::Ols => ols_gamma.clone().expect("computed above")?,
                        Estimator::Ivx => {
                            estimate_threshold_ivx(sample, &grid, &spec.ivx, correction.as_ref())
                                .map_err(msg)?
                                .gamma
                        }
                    };
                    Ok(g - dgp.gamma0)
                }
                _ => match spec.statistic {
                    TestStatistic::SupWald => sup_wald(sample, &grid, spec.hypothesis, &method)
                        .map(|c| c.sup_stat)
                        .map_err(msg),
                    TestStatistic::AtEstimatedThreshold => {
                        let g = ols_gamma.clone().expect("computed above")?;
                        wald_at(sample, g, spec.hypothesis, &method).map_err(msg)
                    }
                },
            }
        })
        .collect())
}

/// Raw replication outcomes of one cell, in replication order. Replication
/// `b` uses `cell.key(spec.seed).child(b)`, so the outcome does not depend
/// on the rayon schedule.
pub fn cell_draws(spec: &ExperimentSpec, cell: Cell) -> Result<CellDraws> {
    spec.validate()?;
    let base = cell.key(spec.seed);
    let per_rep: Vec<Vec<Outcome>> = (0..spec.reps as u64)
        .into_par_iter()
        .map(|b| match replicate(spec, cell, base.child(b)) {
            Ok(v) => v,
            Err(e) => spec.estimators.iter().map(|_| Err(e.to_string())).collect(),
        })
        .collect();
    let mut values: Vec<Vec<Outcome>> = spec.estimators.iter().map(|_| Vec::new()).collect();
    for rep in per_rep {
        for (j, v) in rep.into_iter().enumerate() {
            values[j].push(v);
        }
    }
    Ok(CellDraws { cell, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub c: f64,
    pub phi: f64,
    pub estimator: Estimator,
    /// Nominal level (test experiments).
    pub level: Option<f64>,
    pub critical_value: Option<f64>,
    pub rate: Option<f64>,
    /// Mean of `gamma_hat - gamma0` (accuracy experiments).
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub median_abs_error: Option<f64>,
    /// Monte Carlo standard error of `rate` or of `rmse`.
    pub mc_se: f64,
    pub reps: usize,
    pub failures: usize,
    /// Diagnostic when more than 1% of replications failed.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub records: Vec<CellRecord>,
}

/// Critical value at every nominal level for one estimator in one cell.
fn critical_values(
    spec: &ExperimentSpec,
    cell: Cell,
    est: Estimator,
    tables: &[CriticalValueTable],
) -> Result<Vec<f64>> {
    let p = spec.p();
    let intercept = true;
    if spec.statistic == TestStatistic::AtEstimatedThreshold {
        let k = dof(spec.hypothesis, est, p, intercept);
        return Ok(spec
            .levels
            .iter()
            .map(|a| stats::chi2_quantile(k, 1.0 - a))
            .collect());
    }
    let functional = match (est, spec.hypothesis) {
        (Estimator::Ols, Hypothesis::LinearityOnly) => Functional::SupWaldOlsH1,
        (Estimator::Ols, Hypothesis::JointLinearityPredictability) => Functional::SupWaldOlsH2,
        (
            Estimator::Ivx,
            Hypothesis::JointLinearityPredictability | Hypothesis::RegimeSlopesZero,
        ) => Functional::SupWaldIvxH2,
        (e, h) => {
            return Err(Error::InvalidConfig(format!(
                "no tabulated sup-Wald limit for {e:?} under {}",
                h.as_str()
            )))
        }
    };
    let mut params = TableParams::scalar(cell.c, cell.phi);
    params.c = vec![cell.c; p];
    params.cov = spec.covariance();
    params.trimming = spec.trimming;
    params.intercept = intercept;
    let lookup = |t: &CriticalValueTable| -> Option<Vec<f64>> {
        spec.levels
            .iter()
            .map(|a| t.critical_value(1.0 - a))
            .collect()
    };
    if let Some(cv) = tables
        .iter()
        .filter(|t| t.matches(functional, &params))
        .find_map(lookup)
    {
        return Ok(cv);
    }
    let Some(mesh) = spec.table_mesh else {
        return Err(Error::MissingCriticalValues(format!(
            "{} at c = {}, phi = {}",
            functional.as_str(),
            cell.c,
            cell.phi
        )));
    };
    let levels: Vec<f64> = spec.levels.iter().map(|a| 1.0 - a).collect();
    let table = tabulate_critical_values(functional, &params, &mesh, &levels)?;
    Ok(lookup(&table).expect("tabulated at the requested levels"))
}

fn summarize_cell(spec: &ExperimentSpec, draws: &CellDraws, cvs: &[Vec<f64>]) -> Vec<CellRecord> {
    let cell = draws.cell;
    let mut out = Vec::new();
    for (j, &est) in spec.estimators.iter().enumerate() {
        let ok = draws.ok(j);
        let failures = spec.reps - ok.len();
        let aborted = (failures * 100 > spec.reps).then(|| {
            let first = draws.values[j]
                .iter()
                .find_map(|v| v.as_ref().err().cloned())
                .unwrap_or_default();
            format!(
                "{failures} of {} replications failed; first: {first}",
                spec.reps
            )
        });
        let base = CellRecord {
            n: cell.n,
            c: cell.c,
            phi: cell.phi,
            estimator: est,
            level: None,
            critical_value: None,
            rate: None,
            bias: None,
            rmse: None,
            median_abs_error: None,
            mc_se: 0.0,
            reps: spec.reps,
            failures,
            aborted,
        };
        let b = ok.len() as f64;
        if spec.kind == ExperimentKind::ThresholdAccuracy {
            let (bias, rmse, mae, se) = if ok.is_empty() {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                let sq: Vec<f64> = ok.iter().map(|e| e * e).collect();
                let rmse = stats::mean(&sq).sqrt();
                let abs: Vec<f64> = ok.iter().map(|e| e.abs()).collect();
                let se = if ok.len() > 1 && rmse > 0.0 {
                    stats::variance(&sq).sqrt() / (2.0 * rmse * b.sqrt())
                } else {
                    0.0
                };
                (stats::mean(&ok), rmse, stats::median(&abs), se)
            };
            out.push(CellRecord {
                bias: Some(bias),
                rmse: Some(rmse),
                median_abs_error: Some(mae),
                mc_se: se,
                ..base
            });
        } else {
            for (k, &level) in spec.levels.iter().enumerate() {
                let cv = cvs[j][k];
                let rate = if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().filter(|s| **s > cv).count() as f64 / b
                };
                let se = if ok.is_empty() {
                    0.0
                } else {
                    (rate * (1.0 - rate) / b).sqrt()
                };
                out.push(CellRecord {
                    level: Some(level),
                    critical_value: Some(cv),
                    rate: Some(rate),
                    mc_se: se,
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Runs every cell on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_experiment_with_tables(spec, &[])
}

/// As [`run_experiment`], with precomputed sup-Wald critical-value tables.
pub fn run_experiment_with_tables(
    spec: &ExperimentSpec,
    tables: &[CriticalValueTable],
) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut records = Vec::new();
    for cell in spec.cells() {
        let cvs = if spec.kind == ExperimentKind::ThresholdAccuracy {
            Vec::new()
        } else {
            spec.estimators
                .iter()
                .map(|&e| critical_values(spec, cell, e, tables))
                .collect::<Result<Vec<_>>>()?
        };
        let draws = cell_draws(spec, cell)?;
        records.extend(summarize_cell(spec, &draws, &cvs));
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        provenance: Provenance::capture(spec, spec.seed)?,
        records,
    })
}

/// Runs on a dedicated pool of `threads` workers.
pub fn run_experiment_on(
    spec: &ExperimentSpec,
    tables: &[CriticalValueTable],
    threads: usize,
) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment_with_tables(spec, tables))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

/// Renders a result. CSV carries the provenance and the spec in `# key=value`
/// lines ahead of the record table.
pub fn summarize(result: &ExperimentResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(result)?),
        ReportFormat::Csv => to_csv(result),
        ReportFormat::Markdown => Ok(to_markdown(result)),
    }
}

fn to_csv(result: &ExperimentResult) -> Result<String> {
    let p = &result.provenance;
    let mut out = String::new();
    for (k, v) in [
        ("tool", p.tool.as_str()),
        ("version", &p.version),
        ("config_hash", &p.config_hash),
        ("timestamp", &p.timestamp),
    ] {
        writeln!(out, "# {k}={v}").expect("string write");
    }
    writeln!(out, "# seed={}", p.seed).expect("string write");
    writeln!(out, "# spec={}", serde_json::to_string(&result.spec)?).expect("string write");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in &result.records {
        w.serialize(r)?;
    }
    out.push_str(
        &String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"),
    );
    Ok(out)
}

const RECORD_COLUMNS: [&str; 14] = [
    "n",
    "c",
    "phi",
    "estimator",
    "level",
    "critical_value",
    "rate",
    "bias",
    "rmse",
    "median_abs_error",
    "mc_se",
    "reps",
    "failures",
    "aborted",
];

/// Inverse of the CSV rendering.
pub fn parse_csv(text: &str) -> Result<ExperimentResult> {
    let mut meta = std::collections::BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("# ") else {
            break;
        };
        if let Some((k, v)) = rest.split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| Error::MissingColumn(format!("report header '{k}'")))
    };
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<CellRecord>, _>>()?;
    Ok(ExperimentResult {
        spec: serde_json::from_str(&get("spec")?)?,
        provenance: Provenance {
            tool: get("tool")?,
            version: get("version")?,
            config_hash: get("config_hash")?,
            seed: get("seed")?.parse().map_err(|_| Error::ParseError {
                row: 0,
                col: "seed".into(),
                reason: "not an integer".into(),
            })?,
            timestamp: get("timestamp")?,
        },
        records,
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

fn to_markdown(result: &ExperimentResult) -> String {
    let p = &result.provenance;
    let spec = &result.spec;
    let mut s = String::new();
    writeln!(s, "## Monte Carlo: {}", spec.kind.as_str()).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "- tool: {} {}", p.tool, p.version).unwrap();
    writeln!(s, "- config hash: `{}`", p.config_hash).unwrap();
    writeln!(s, "- seed: {}", p.seed).unwrap();
    writeln!(s, "- timestamp: {}", p.timestamp).unwrap();
    writeln!(s, "- replications per cell: {}", spec.reps).unwrap();
    writeln!(s).unwrap();
    let accuracy = spec.kind == ExperimentKind::ThresholdAccuracy;
    let header: &[&str] = if accuracy {
        &[
            "n",
            "c",
            "phi",
            "estimator",
            "bias",
            "rmse",
            "median abs error",
            "mc se",
            "failures",
            "note",
        ]
    } else {
        &[
            "n",
            "c",
            "phi",
            "estimator",
            "level",
            "critical value",
            "rate",
            "mc se",
            "failures",
            "note",
        ]
    };
    writeln!(s, "| {} |", header.join(" | ")).unwrap();
    writeln!(s, "|{}", "---|".repeat(header.len())).unwrap();
    for r in &result.records {
        let est = match r.estimator {
            Estimator::Ols => "OLS",
            Estimator::Ivx => "IVX",
        };
        let note = r.aborted.as_deref().unwrap_or("");
        let cols = if accuracy {
            vec![
                r.n.to_string(),
                r.c.to_string(),
                r.phi.to_string(),
                est.to_string(),
                opt(r.bias, 4),
                opt(r.rmse, 4),
                opt(r.median_abs_error, 4),
                format!("{:.4}", r.mc_se),
                r.failures.to_string(),
                note.to_string(),
            ]
        } else {
            vec![
                r.n.to_string(),
                r.c.to_string(),
                r.phi.to_string(),
                est.to_string(),
                opt(r.level, 2),
                opt(r.critical_value, 3),
                opt(r.rate, 4),
                format!("{:.4}", r.mc_se),
                r.failures.to_string(),
                note.to_string(),
            ]
        };
        writeln!(s, "| {} |", cols.join(" | ")).unwrap();
    }
    s
}
