use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dgp::{simulate_threshold_keyed, PersistenceSpec, ThresholdDgpSpec};
use crate::error::{Error, Result};
use crate::estimate::{estimate_threshold, ThresholdGrid};
use crate::innovations::CovarianceSpec;
use crate::ivx::{estimate_threshold_ivx, ivx_fit, Correction, IvxConfig, IvxFit};
use crate::limitsim::{
    tabulate_critical_values, CriticalValueTable, Functional, MeshSpec, TableParams,
};
use crate::mc::{
    run_experiment_on, summarize, ExperimentKind, ExperimentSpec, PersistenceScenario, ReportFormat,
};
use crate::persistence::{fit_persistence, Bounds, FitOptions, PersistenceFit};
use crate::provenance::Provenance;
use crate::rng::StreamKey;
use crate::wald::{sup_wald, Estimator, Hypothesis, Method, WaldCurve, WaldRecord};

use super::config::{resolve, ConfigFile};
use super::dataset::{dataset_csv, EmpiricalDataset};
use super::output::{csv_comments, write_json};
use super::*;

struct Ctx {
    verbose: u8,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let ctx = Ctx {
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&ctx, resolve(&file, "simulate", a)?),
        Command::Estimate(a) => estimate(resolve(&file, "estimate", a)?),
        Command::Test(a) => test(&ctx, resolve(&file, "test", a)?),
        Command::Ivx(a) => ivx(resolve(&file, "ivx", a)?),
        Command::FitPersistence(a) => fit(resolve(&file, "fit-persistence", a)?),
        Command::Critvals(a) => critvals(&ctx, resolve(&file, "critvals", a)?),
        Command::Mc(a) => mc(&ctx, resolve(&file, "mc", a)?),
        Command::Analyze(a) => analyze(&ctx, resolve(&file, "analyze", a)?),
    }
}

fn grid_for(ds: &EmpiricalDataset, s: &DataSettings) -> Result<ThresholdGrid> {
    ThresholdGrid::for_sample(&ds.sample, s.trim[0], s.trim[1])
}

fn simulate(ctx: &Ctx, s: SimulateSettings) -> Result<()> {
    if s.p == 0 {
        return Err(Error::InvalidConfig("p must be at least 1".into()));
    }
    let dgp = match s.preset {
        DgpPreset::Benchmark => ThresholdDgpSpec::benchmark(s.p),
        DgpPreset::Null => ThresholdDgpSpec::null(s.p),
    };
    let pers = PersistenceSpec::new(vec![s.c; s.p], vec![s.phi]);
    let cov = CovarianceSpec::identity(s.p, 1).with_cross_xy(s.cross_xy);
    let sim = simulate_threshold_keyed(&dgp, &pers, &cov, s.n, StreamKey::new(s.seed, 0))?;
    let prov = Provenance::capture(&s, s.seed)?;
    fs::write(&s.out, dataset_csv(&sim, &csv_comments(&prov)))?;
    ctx.note(format!("wrote {} rows to {}", s.n + 1, s.out.display()));
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    n: usize,
    p: usize,
    regressors: &'a [String],
    gamma_hat: f64,
    theta_hat: &'a [f64],
    ssr_min: f64,
    sigma2_hat: f64,
    regime_sizes: (usize, usize),
    grid: &'a [f64],
    ssr_curve: &'a [f64],
}

fn estimate(s: EstimateSettings) -> Result<()> {
    let ds = s.data.load()?;
    let grid = grid_for(&ds, &s.data)?;
    let fit = estimate_threshold(&ds.sample, &grid)?;
    let report = EstimateReport {
        n: ds.sample.n(),
        p: ds.sample.p(),
        regressors: &ds.x_names,
        gamma_hat: fit.gamma_hat,
        theta_hat: &fit.theta_hat,
        ssr_min: fit.ssr_min,
        sigma2_hat: fit.sigma2_hat,
        regime_sizes: fit.regime_sizes,
        grid: &fit.grid.points,
        ssr_curve: &fit.ssr_curve,
    };
    let prov = Provenance::capture(&s, 0)?;
    write_json(s.out.as_deref(), "estimate", &prov, &s, &report)
}

#[derive(Serialize)]
struct TestEntry {
    #[serde(flatten)]
    record: WaldRecord,
    /// `(level, critical value)` pairs of the table used.
    critical_values: Vec<(f64, f64)>,
}

/// Attaches p-values and critical values to sup-Wald curves.
struct Pvalues {
    mode: CritvalMode,
    tables: Vec<CriticalValueTable>,
    persistence: Option<(f64, Vec<f64>)>,
    cross_xy: f64,
    mesh: MeshSpec,
}

impl Pvalues {
    fn new(s: &PvalueSettings, d: usize) -> Result<Self> {
        let mut tables = Vec::new();
        for path in &s.tables {
            let t = match path.extension().and_then(|e| e.to_str()) {
                Some("json") => CriticalValueTable::load_json(path)?,
                _ => CriticalValueTable::load_csv(path)?,
            };
            tables.push(t);
        }
        let persistence = match (&s.persistence, s.c, &s.phi) {
            (_, Some(c), Some(phi)) => Some((c, phi.clone())),
            (_, Some(c), None) => Some((c, vec![0.0; d.max(1)])),
            (Some(path), None, _) => Some(read_persistence(path)?),
            _ => None,
        };
        Ok(Self {
            mode: s.critvals,
            tables,
            persistence,
            cross_xy: s.cross_xy,
            mesh: MeshSpec::new(s.cv_steps, s.cv_reps, s.seed)?,
        })
    }

    fn attach(&self, curve: &WaldCurve, p: usize, trim: [f64; 2], ctx: &Ctx) -> Result<TestEntry> {
        let done = |pv: Option<f64>, src: &str, cv: Vec<(f64, f64)>| TestEntry {
            record: WaldRecord::new(curve, pv, src),
            critical_values: cv,
        };
        if self.mode == CritvalMode::None {
            return Ok(done(None, "not requested", Vec::new()));
        }
        let functional = match (curve.estimator, curve.hypothesis) {
            (Estimator::Ols, Hypothesis::LinearityOnly) => Functional::SupWaldOlsH1,
            (Estimator::Ols, Hypothesis::JointLinearityPredictability) => Functional::SupWaldOlsH2,
            (
                Estimator::Ivx,
                Hypothesis::JointLinearityPredictability | Hypothesis::RegimeSlopesZero,
            ) => Functional::SupWaldIvxH2,
            _ => return Ok(done(None, "no tabulated limit for this test", Vec::new())),
        };
        let mut params = TableParams::scalar(0.0, 0.0);
        params.trimming = (trim[0], trim[1]);
        params.c = vec![0.0; p];
        params.cov = CovarianceSpec::identity(p, 1);
        if functional != Functional::SupWaldIvxH2 {
            let Some((c, phi)) = &self.persistence else {
                return Ok(done(
                    None,
                    "OLS limit depends on (c, phi): pass --c and --phi or --persistence",
                    Vec::new(),
                ));
            };
            params.c = vec![*c; p];
            params.phi = phi.clone();
            params.cov = CovarianceSpec::identity(p, phi.len()).with_cross_xy(self.cross_xy);
        }
        let found = self.tables.iter().find(|t| t.matches(functional, &params));
        let owned;
        let table = match (found, self.mode) {
            (Some(t), _) => t,
            (None, CritvalMode::Tables) => {
                return Err(Error::MissingCriticalValues(format!(
                    "no supplied table for {} at trimming {:?}",
                    functional.as_str(),
                    params.trimming
                )))
            }
            (None, _) => {
                ctx.note(format!(
                    "simulating {} critical values",
                    functional.as_str()
                ));
                owned = tabulate_critical_values(
                    functional,
                    &params,
                    &self.mesh,
                    &crate::limitsim::DEFAULT_LEVELS,
                )?;
                &owned
            }
        };
        let cv = table
            .levels
            .iter()
            .cloned()
            .zip(table.quantiles.iter().cloned())
            .collect();
        let (pv, src) = match table.pvalue(curve.sup_stat) {
            Some(pv) => (
                Some(pv),
                format!(
                    "{} ({} draws)",
                    functional.as_str(),
                    table.reps - table.failures
                ),
            ),
            None => (
                None,
                format!("{}: critical values only", functional.as_str()),
            ),
        };
        Ok(done(pv, &src, cv))
    }
}

fn read_persistence(path: &Path) -> Result<(f64, Vec<f64>)> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let fit: PersistenceFit = serde_json::from_value(v["result"]["fit"].clone())?;
    Ok((fit.c_hat, fit.phi_hat))
}

fn method_for(est: Estimator, cfg: IvxConfig) -> Method<'static> {
    match est {
        Estimator::Ols => Method::Ols,
        Estimator::Ivx => Method::ivx(cfg),
    }
}

#[derive(Serialize)]
struct TestReport {
    n: usize,
    p: usize,
    tests: Vec<TestEntry>,
}

fn test(ctx: &Ctx, s: TestSettings) -> Result<()> {
    let ds = s.data.load()?;
    let grid = grid_for(&ds, &s.data)?;
    let cfg = IvxConfig {
        c_z: s.pvalues.c_z,
        gamma_z: s.pvalues.gamma_z,
    };
    let pv = Pvalues::new(&s.pvalues, ds.w.ncols())?;
    let mut tests = Vec::new();
    for &est in &s.estimators {
        let curve = sup_wald(&ds.sample, &grid, s.hypothesis, &method_for(est, cfg))?;
        tests.push(pv.attach(&curve, ds.sample.p(), s.data.trim, ctx)?);
    }
    let report = TestReport {
        n: ds.sample.n(),
        p: ds.sample.p(),
        tests,
    };
    let prov = Provenance::capture(&s, s.pvalues.seed)?;
    write_json(s.out.as_deref(), "test", &prov, &s, &report)
}

#[derive(Serialize)]
struct IvxReport {
    gamma: f64,
    estimated_gamma: bool,
    beta1: Vec<f64>,
    beta2: Vec<f64>,
    se1: Vec<f64>,
    se2: Vec<f64>,
    alpha: [f64; 2],
    sigma2: f64,
    corrected: bool,
    rho_z: f64,
}

fn ivx(s: IvxSettings) -> Result<()> {
    let ds = s.data.load()?;
    let cfg = IvxConfig {
        c_z: s.c_z,
        gamma_z: s.gamma_z,
    };
    cfg.validate()?;
    let p = ds.sample.p();
    let correction = if s.correct {
        let c =
            s.c.ok_or_else(|| Error::InvalidConfig("--correct needs --c".into()))?;
        let phi = s
            .phi
            .clone()
            .ok_or_else(|| Error::InvalidConfig("--correct needs --phi".into()))?;
        Some(Correction {
            c: vec![c; p],
            phi,
            u_phi: ds.u_phi(),
        })
    } else {
        None
    };
    let fit: IvxFit = match s.gamma {
        Some(g) => ivx_fit(&ds.sample, g, &cfg, correction.as_ref())?,
        None => estimate_threshold_ivx(
            &ds.sample,
            &grid_for(&ds, &s.data)?,
            &cfg,
            correction.as_ref(),
        )?,
    };
    let se: Vec<f64> = (0..2 * p).map(|i| fit.avar[(i, i)].sqrt()).collect();
    let report = IvxReport {
        gamma: fit.gamma,
        estimated_gamma: s.gamma.is_none(),
        beta1: fit.beta_ivx[0].iter().cloned().collect(),
        beta2: fit.beta_ivx[1].iter().cloned().collect(),
        se1: se[..p].to_vec(),
        se2: se[p..].to_vec(),
        alpha: fit.alpha,
        sigma2: fit.sigma2,
        corrected: fit.corrected,
        rho_z: cfg.rho_z(ds.sample.n()),
    };
    let prov = Provenance::capture(&s, 0)?;
    write_json(s.out.as_deref(), "ivx", &prov, &s, &report)
}

#[derive(Serialize)]
struct FitReport<'a> {
    regressor: &'a str,
    n: usize,
    fit: PersistenceFit,
}

fn fit(s: FitPersistenceSettings) -> Result<()> {
    let ds = s.data.load()?;
    let i = match &s.regressor {
        None => 0,
        Some(name) => ds
            .x_names
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?,
    };
    let data = ds.persistence_data(i)?;
    let phi0 = s.phi0.clone().unwrap_or_else(|| vec![0.0; data.d()]);
    let opts = FitOptions {
        max_iterations: s.max_iterations,
        ..FitOptions::default()
    };
    let mut fit = fit_persistence(&data, (s.c0, &phi0), &Bounds::default(), &opts)?;
    if s.require_converged {
        fit = fit.require_converged()?;
    }
    let report = FitReport {
        regressor: &ds.x_names[i],
        n: data.n(),
        fit,
    };
    let prov = Provenance::capture(&s, 0)?;
    write_json(s.out.as_deref(), "fit-persistence", &prov, &s, &report)
}

fn critvals(ctx: &Ctx, s: CritvalsSettings) -> Result<()> {
    let functional = match s.functional {
        FunctionalArg::OlsH1 => Functional::SupWaldOlsH1,
        FunctionalArg::OlsH2 => Functional::SupWaldOlsH2,
        FunctionalArg::IvxH2 => Functional::SupWaldIvxH2,
        FunctionalArg::Argmax => Functional::ThresholdArgmax,
    };
    if s.p == 0 {
        return Err(Error::InvalidConfig("p must be at least 1".into()));
    }
    let mut params = TableParams::scalar(s.c, s.phi);
    params.c = vec![s.c; s.p];
    params.cov = CovarianceSpec::identity(s.p, 1).with_cross_xy(s.cross_xy);
    params.trimming = (s.trim[0], s.trim[1]);
    params.intercept = s.intercept;
    params.delta0 = vec![s.delta0; s.p];
    let mesh = MeshSpec::new(s.steps, s.reps, s.seed)?;
    ctx.note(format!("{} draws of {}", s.reps, functional.as_str()));
    let run = || tabulate_critical_values(functional, &params, &mesh, &s.levels);
    let table = match s.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    // The worker count does not change the table, so it stays out of the hash.
    let hashed = CritvalsSettings {
        threads: None,
        ..s.clone()
    };
    let prov = Provenance::capture(&hashed, s.seed)?;
    match s.format {
        TableFormat::Csv => {
            let extra: Vec<_> = csv_comments(&prov)
                .into_iter()
                .filter(|(k, _)| !matches!(*k, "seed" | "version"))
                .collect();
            table.save_csv_with(&s.out, &extra)
        }
        TableFormat::Json => write_json(Some(&s.out), "critvals", &prov, &s, &table),
    }
}

fn mc(ctx: &Ctx, s: McSettings) -> Result<()> {
    let mut spec = match s.preset {
        McPreset::Benchmark => ExperimentSpec::benchmark(s.kind),
        McPreset::MildlyIntegrated => {
            ExperimentSpec::scenario(s.kind, PersistenceScenario::MildlyIntegrated)
        }
        McPreset::MildlyExplosive => {
            ExperimentSpec::scenario(s.kind, PersistenceScenario::MildlyExplosive)
        }
        McPreset::NearNonstationary => {
            ExperimentSpec::scenario(s.kind, PersistenceScenario::NearNonstationary)
        }
    };
    if let Some(v) = s.reps {
        spec.reps = v;
    }
    if let Some(v) = &s.n {
        spec.n_list = v.clone();
    }
    if let Some(v) = &s.c {
        spec.c_list = v.clone();
    }
    if let Some(v) = &s.phi {
        spec.phi_list = v.clone();
    }
    if let Some(v) = &s.estimators {
        spec.estimators = v.clone();
    }
    if let Some(v) = s.hypothesis {
        spec.hypothesis = v;
    }
    if let Some(v) = s.statistic {
        spec.statistic = v;
    }
    if let Some(v) = s.cross_xy {
        spec.cross_xy = v;
    }
    if let Some(v) = &s.levels {
        spec.levels = v.clone();
    }
    spec.seed = s.seed;
    spec.table_mesh = Some(MeshSpec::new(s.cv_steps, s.cv_reps, s.seed)?);
    ctx.note(format!(
        "{} cells x {} replications ({})",
        spec.cells().len(),
        spec.reps,
        spec.kind.as_str()
    ));
    let result = run_experiment_on(&spec, &[], s.threads.max(1))?;
    fs::create_dir_all(&s.out)?;
    fs::write(
        s.out.join("result.csv"),
        summarize(&result, ReportFormat::Csv)?,
    )?;
    fs::write(
        s.out.join("result.json"),
        summarize(&result, ReportFormat::Json)?,
    )?;
    fs::write(
        s.out.join("summary.md"),
        summarize(&result, ReportFormat::Markdown)?,
    )?;
    if spec.kind != ExperimentKind::ThresholdAccuracy {
        ctx.note(format!(
            "wrote {} records to {}",
            result.records.len(),
            s.out.display()
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    n: usize,
    p: usize,
    regressors: &'a [String],
    gamma_hat: f64,
    theta_hat: &'a [f64],
    sigma2_hat: f64,
    regime_sizes: (usize, usize),
    persistence: Option<(f64, Vec<f64>)>,
    tests: Vec<TestEntry>,
}

fn analyze(ctx: &Ctx, s: AnalyzeSettings) -> Result<()> {
    let ds = s.data.load()?;
    let grid = grid_for(&ds, &s.data)?;
    let fit = estimate_threshold(&ds.sample, &grid)?;
    let cfg = IvxConfig {
        c_z: s.pvalues.c_z,
        gamma_z: s.pvalues.gamma_z,
    };
    let pv = Pvalues::new(&s.pvalues, ds.w.ncols())?;
    let mut tests = Vec::new();
    for (est, hyp) in [
        (Estimator::Ols, Hypothesis::LinearityOnly),
        (Estimator::Ols, Hypothesis::JointLinearityPredictability),
        (Estimator::Ivx, Hypothesis::JointLinearityPredictability),
    ] {
        let curve = sup_wald(&ds.sample, &grid, hyp, &method_for(est, cfg))?;
        tests.push(pv.attach(&curve, ds.sample.p(), s.data.trim, ctx)?);
    }
    let report = AnalyzeReport {
        n: ds.sample.n(),
        p: ds.sample.p(),
        regressors: &ds.x_names,
        gamma_hat: fit.gamma_hat,
        theta_hat: &fit.theta_hat,
        sigma2_hat: fit.sigma2_hat,
        regime_sizes: fit.regime_sizes,
        persistence: pv.persistence.clone(),
        tests,
    };
    let prov = Provenance::capture(&s, s.pvalues.seed)?;
    write_json(s.out.as_deref(), "analyze", &prov, &s, &report)
}
