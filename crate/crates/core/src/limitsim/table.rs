//! Tabulated quantiles of the limiting functionals.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::CovarianceSpec;
use crate::rng::StreamKey;
use crate::stats;

use super::argmax::{draw_threshold_limit, ArgmaxSpec};
use super::pivotal::draw_ivx_h2_limit;
use super::sheet::{draw_ols_h1_limit, draw_ols_h2_limit, OlsLimitSpec, SheetRoute};
use super::MeshSpec;

pub const DEFAULT_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

const BOOTSTRAP_RESAMPLES: usize = 200;
const TAG_BOOTSTRAP: u64 = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    SupWaldOlsH1,
    SupWaldOlsH2,
    SupWaldIvxH2,
    ThresholdArgmax,
}

impl Functional {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SupWaldOlsH1 => "sup-wald-ols-h1",
            Self::SupWaldOlsH2 => "sup-wald-ols-h2",
            Self::SupWaldIvxH2 => "sup-wald-ivx-h2",
            Self::ThresholdArgmax => "threshold-argmax",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sup-wald-ols-h1" => Ok(Self::SupWaldOlsH1),
            "sup-wald-ols-h2" => Ok(Self::SupWaldOlsH2),
            "sup-wald-ivx-h2" => Ok(Self::SupWaldIvxH2),
            "threshold-argmax" => Ok(Self::ThresholdArgmax),
            other => Err(Error::InvalidConfig(format!(
                "unknown functional '{other}'"
            ))),
        }
    }
}

/// Nuisance parameters of a limiting functional. Fields a functional does
/// not use are ignored; the IVX limit only reads `trimming` and `c.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub c: Vec<f64>,
    pub phi: Vec<f64>,
    pub cov: CovarianceSpec,
    pub trimming: (f64, f64),
    pub intercept: bool,
    pub lambda_points: usize,
    #[serde(default)]
    pub route: SheetRoute,
    /// Threshold effect on the slopes, for the argmax law.
    #[serde(default)]
    pub delta0: Vec<f64>,
    #[serde(default = "default_density")]
    pub f_gamma0: f64,
    #[serde(default)]
    pub argmax: ArgmaxSpec,
}

fn default_density() -> f64 {
    // Standard normal density at 0.25.
    0.386_668_116_802_849
}

impl TableParams {
    /// One regressor and one persistence shock with unit covariance.
    pub fn scalar(c: f64, phi: f64) -> Self {
        let ols = OlsLimitSpec::scalar(c, phi);
        Self {
            c: ols.c,
            phi: ols.phi,
            cov: ols.cov,
            trimming: ols.trimming,
            intercept: ols.intercept,
            lambda_points: ols.lambda_points,
            route: ols.route,
            delta0: vec![2.0],
            f_gamma0: default_density(),
            argmax: ArgmaxSpec::default(),
        }
    }

    pub fn ols_spec(&self) -> OlsLimitSpec {
        OlsLimitSpec {
            c: self.c.clone(),
            phi: self.phi.clone(),
            cov: self.cov.clone(),
            trimming: self.trimming,
            lambda_points: self.lambda_points,
            intercept: self.intercept,
            route: self.route,
        }
    }

    pub fn p(&self) -> usize {
        self.c.len()
    }
}

/// One draw of `functional` under `params`.
pub fn draw_functional(
    functional: Functional,
    params: &TableParams,
    mesh: &MeshSpec,
    key: StreamKey,
) -> Result<f64> {
    match functional {
        Functional::SupWaldOlsH1 => draw_ols_h1_limit(&params.ols_spec(), mesh, key),
        Functional::SupWaldOlsH2 => draw_ols_h2_limit(&params.ols_spec(), mesh, key),
        Functional::SupWaldIvxH2 => draw_ivx_h2_limit(params.trimming, params.p(), mesh, key),
        Functional::ThresholdArgmax => draw_threshold_limit(
            &params.c,
            &params.phi,
            &params.cov,
            &params.delta0,
            params.f_gamma0,
            params.cov.sigma_y.sqrt(),
            mesh,
            &params.argmax,
            key,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub functional: Functional,
    pub params: TableParams,
    /// Sorted ascending.
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub quantile_se: Vec<f64>,
    pub reps: usize,
    pub steps: usize,
    pub seed: u64,
    pub version: String,
    /// Draws discarded after a numerical failure.
    pub failures: usize,
    /// Sorted draws, kept for p-values; not written to CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<f64>>,
}

impl CriticalValueTable {
    /// Whether the table was drawn for `functional` under `params`. The
    /// IVX limit is pivotal, so only its dimension and trimming count.
    pub fn matches(&self, functional: Functional, params: &TableParams) -> bool {
        if self.functional != functional {
            return false;
        }
        let (a, b) = (&self.params, params);
        match functional {
            Functional::SupWaldIvxH2 => a.p() == b.p() && a.trimming == b.trimming,
            Functional::SupWaldOlsH1 | Functional::SupWaldOlsH2 => {
                a.c == b.c
                    && a.phi == b.phi
                    && a.cov == b.cov
                    && a.trimming == b.trimming
                    && a.intercept == b.intercept
            }
            Functional::ThresholdArgmax => {
                a.c == b.c
                    && a.phi == b.phi
                    && a.cov == b.cov
                    && a.delta0 == b.delta0
                    && a.f_gamma0 == b.f_gamma0
            }
        }
    }

    pub fn critical_value(&self, level: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|l| (l - level).abs() < 1e-12)
            .map(|i| self.quantiles[i])
    }

    /// Share of tabulated draws at least as large as `stat`.
    pub fn pvalue(&self, stat: f64) -> Option<f64> {
        let draws = self.draws.as_ref()?;
        if draws.is_empty() {
            return None;
        }
        let below = draws.partition_point(|d| *d < stat);
        Some((draws.len() - below) as f64 / draws.len() as f64)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let t: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        t.check()?;
        Ok(t)
    }

    /// `level,quantile,se` rows after `# key=value` provenance lines.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.save_csv_with(path, &[])
    }

    /// As [`save_csv`](Self::save_csv) with extra `# key=value` lines.
    pub fn save_csv_with(&self, path: &Path, extra: &[(&str, String)]) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for (k, v) in extra {
            writeln!(f, "# {k}={v}")?;
        }
        writeln!(f, "# functional={}", self.functional.as_str())?;
        writeln!(f, "# version={}", self.version)?;
        writeln!(f, "# seed={}", self.seed)?;
        writeln!(f, "# reps={}", self.reps)?;
        writeln!(f, "# steps={}", self.steps)?;
        writeln!(f, "# failures={}", self.failures)?;
        writeln!(f, "# params={}", serde_json::to_string(&self.params)?)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["level", "quantile", "se"])?;
        for i in 0..self.levels.len() {
            w.write_record(&[
                self.levels[i].to_string(),
                self.quantiles[i].to_string(),
                self.quantile_se[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut meta = std::collections::HashMap::new();
        for line in BufReader::new(text.as_bytes()).lines() {
            let line = line?;
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
                .ok_or_else(|| Error::MissingColumn(format!("table header '{k}'")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| Error::ParseError {
                row: 0,
                col: k.to_string(),
                reason: "not an integer".into(),
            })
        };
        let mut levels = Vec::new();
        let mut quantiles = Vec::new();
        let mut quantile_se = Vec::new();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::ParseError {
                        row: i + 1,
                        col: ["level", "quantile", "se"][j].to_string(),
                        reason: "not a number".into(),
                    })
            };
            levels.push(field(0)?);
            quantiles.push(field(1)?);
            quantile_se.push(field(2)?);
        }
        let t = Self {
            functional: Functional::parse(&get("functional")?)?,
            params: serde_json::from_str(&get("params")?)?,
            levels,
            quantiles,
            quantile_se,
            reps: num("reps")? as usize,
            steps: num("steps")? as usize,
            seed: num("seed")?,
            version: get("version")?,
            failures: num("failures")? as usize,
            draws: None,
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let n = self.levels.len();
        if self.quantiles.len() != n || self.quantile_se.len() != n {
            return Err(Error::DimensionMismatch(
                "table columns differ in length".into(),
            ));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "table levels must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `mesh.reps` values of `functional` in parallel on the current
/// rayon pool. Draw `r` uses the key `(mesh.seed, r)`, so the table does not
/// depend on the number of threads. More than 1% failed draws abort.
pub fn tabulate_critical_values(
    functional: Functional,
    params: &TableParams,
    mesh: &MeshSpec,
    levels: &[f64],
) -> Result<CriticalValueTable> {
    mesh.validate()?;
    let mut levels = levels.to_vec();
    if levels.iter().any(|l| !(0.0 < *l && *l < 1.0)) {
        return Err(Error::InvalidConfig(
            "quantile levels must lie in (0, 1)".into(),
        ));
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let results: Vec<Result<f64>> = (0..mesh.reps as u64)
        .into_par_iter()
        .map(|r| draw_functional(functional, params, mesh, StreamKey::new(mesh.seed, r)))
        .collect();
    let mut draws = Vec::with_capacity(mesh.reps);
    let mut failures = 0;
    for r in results {
        match r {
            Ok(v) if v.is_finite() => draws.push(v),
            Ok(_) => failures += 1,
            Err(Error::InvalidConfig(m)) => return Err(Error::InvalidConfig(m)),
            Err(Error::DimensionMismatch(m)) => return Err(Error::DimensionMismatch(m)),
            Err(_) => failures += 1,
        }
    }
    if failures * 100 > mesh.reps {
        return Err(Error::CellAborted(format!(
            "{} of {} draws of {} failed",
            failures,
            mesh.reps,
            functional.as_str()
        )));
    }
    draws.sort_by(f64::total_cmp);
    let boot = StreamKey::new(mesh.seed, u64::MAX).child(TAG_BOOTSTRAP);
    let quantiles = levels
        .iter()
        .map(|l| stats::quantile_sorted(&draws, *l))
        .collect();
    let quantile_se = levels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            stats::bootstrap_quantile_se(&draws, *l, BOOTSTRAP_RESAMPLES, boot.child(i as u64))
        })
        .collect();
    Ok(CriticalValueTable {
        functional,
        params: params.clone(),
        levels,
        quantiles,
        quantile_se,
        reps: mesh.reps,
        steps: mesh.steps,
        seed: mesh.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        failures,
        draws: Some(draws),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_mesh() -> MeshSpec {
        MeshSpec {
            steps: 200,
            reps: 300,
            seed: 7,
        }
    }

    #[test]
    fn thread_count_does_not_change_table() {
        let params = TableParams::scalar(2.0, 0.25);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    tabulate_critical_values(
                        Functional::SupWaldOlsH1,
                        &params,
                        &small_mesh(),
                        &DEFAULT_LEVELS,
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let params = TableParams::scalar(1.0, 0.0);
        let t = tabulate_critical_values(
            Functional::SupWaldIvxH2,
            &params,
            &small_mesh(),
            &[0.99, 0.9, 0.95],
        )
        .unwrap();
        assert_eq!(t.levels, vec![0.9, 0.95, 0.99]);
        assert!(t.quantiles.windows(2).all(|w| w[0] <= w[1]));
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("t.csv");
        t.save_csv(&csv_path).unwrap();
        let back = CriticalValueTable::load_csv(&csv_path).unwrap();
        assert_eq!(back.params, t.params);
        assert_eq!(back.quantiles, t.quantiles);
        assert_eq!(back.draws, None);
        let json_path = dir.path().join("t.json");
        t.save_json(&json_path).unwrap();
        assert_eq!(CriticalValueTable::load_json(&json_path).unwrap(), t);
    }

    #[test]
    fn pvalue_is_tail_share() {
        let params = TableParams::scalar(1.0, 0.0);
        let t = tabulate_critical_values(
            Functional::SupWaldIvxH2,
            &params,
            &small_mesh(),
            &DEFAULT_LEVELS,
        )
        .unwrap();
        assert_eq!(t.pvalue(f64::NEG_INFINITY), Some(1.0));
        assert_eq!(t.pvalue(f64::INFINITY), Some(0.0));
        let p = t.pvalue(t.critical_value(0.95).unwrap()).unwrap();
        assert!((p - 0.05).abs() < 0.01, "{p}");
    }

    #[test]
    fn bad_levels_rejected() {
        let params = TableParams::scalar(1.0, 0.0);
        assert!(
            tabulate_critical_values(Functional::SupWaldIvxH2, &params, &small_mesh(), &[1.0])
                .is_err()
        );
    }
}
