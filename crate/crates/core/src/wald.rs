//! Wald and sup-Wald statistics for threshold effects and predictability.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_threshold, linear_design, ols_fit, regime_ssr, Parameterization, ThresholdGrid,
};
use crate::ivx::{instrument_for, ivx_fit_with_instrument, Correction, IvxConfig, RegimeIv};
use crate::linalg::{least_squares, spd_solve};
use crate::regime::{order_by, split_moments, Comoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// No threshold effect: both regimes share intercept and slopes.
    LinearityOnly,
    /// No threshold effect and no predictability.
    JointLinearityPredictability,
    /// Both regime slopes are zero; regime intercepts unrestricted.
    RegimeSlopesZero,
}

impl Hypothesis {
    pub fn as_str(self) -> &'static str {
        match self {
            Hypothesis::LinearityOnly => "linearity-only",
            Hypothesis::JointLinearityPredictability => "joint-linearity-predictability",
            Hypothesis::RegimeSlopesZero => "regime-slopes-zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Ols,
    Ivx,
}

/// Estimator together with its IVX settings.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Ols,
    Ivx {
        cfg: IvxConfig,
        correction: Option<&'a Correction>,
    },
}

impl Method<'_> {
    pub fn estimator(&self) -> Estimator {
        match self {
            Method::Ols => Estimator::Ols,
            Method::Ivx { .. } => Estimator::Ivx,
        }
    }

    pub fn ivx(cfg: IvxConfig) -> Self {
        Method::Ivx {
            cfg,
            correction: None,
        }
    }
}

/// Number of restrictions tested.
///
/// Under IVX the intercepts are partialled out, so only slope
/// restrictions are tested.
pub fn dof(hyp: Hypothesis, estimator: Estimator, p: usize, intercept: bool) -> usize {
    let c = usize::from(intercept);
    match (estimator, hyp) {
        (Estimator::Ols, Hypothesis::LinearityOnly) => p + c,
        (Estimator::Ols, Hypothesis::JointLinearityPredictability) => 2 * p + c,
        (_, Hypothesis::RegimeSlopesZero) => 2 * p,
        (Estimator::Ivx, Hypothesis::LinearityOnly) => p,
        (Estimator::Ivx, Hypothesis::JointLinearityPredictability) => 2 * p,
    }
}

/// Restriction matrix on `(alpha_1, beta_1, alpha_2, beta_2)`.
pub fn restriction_matrix(hyp: Hypothesis, p: usize, intercept: bool) -> DMatrix<f64> {
    let c = usize::from(intercept);
    let w = p + c;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let unit = |k: usize| {
        let mut r = vec![0.0; 2 * w];
        r[k] = 1.0;
        r
    };
    match hyp {
        Hypothesis::LinearityOnly => {
            for k in 0..w {
                let mut r = unit(k);
                r[w + k] = -1.0;
                rows.push(r);
            }
        }
        Hypothesis::JointLinearityPredictability => {
            if intercept {
                let mut r = unit(0);
                r[w] = -1.0;
                rows.push(r);
            }
            for block in [0, w] {
                for i in 0..p {
                    rows.push(unit(block + c + i));
                }
            }
        }
        Hypothesis::RegimeSlopesZero => {
            for block in [0, w] {
                for i in 0..p {
                    rows.push(unit(block + c + i));
                }
            }
        }
    }
    DMatrix::from_fn(rows.len(), 2 * w, |i, j| rows[i][j])
}

/// `(R b)'[R V R']^{-1}(R b)` for a covariance `V` already scaled by the
/// error variance.
pub fn quadratic_form(r: &DMatrix<f64>, b: &DVector<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let rb = r * b;
    let m = r * v * r.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Ok(rb.dot(&spd_solve(&m, &rb)?).max(0.0))
}

/// OLS Wald statistic at `gamma` with `sigma_u^2 = SSR/n` from the
/// unrestricted two-regime fit.
pub fn wald_ols(sample: &Sample, gamma: f64, hyp: Hypothesis) -> Result<f64> {
    let fit = ols_fit(sample, gamma, Parameterization::TwoRegime)?;
    let r = restriction_matrix(hyp, sample.p(), sample.has_intercept);
    quadratic_form(&r, &fit.theta, &(&fit.xtx_inv * fit.sigma2()))
}

/// IVX Wald statistic at `gamma` from the regime-wise IV estimates and
/// their sandwich covariance.
pub fn wald_ivx(
    sample: &Sample,
    gamma: f64,
    hyp: Hypothesis,
    cfg: &IvxConfig,
    correction: Option<&Correction>,
) -> Result<f64> {
    let z = instrument_for(sample, cfg, correction)?;
    wald_ivx_with_instrument(sample, gamma, hyp, &z)
}

fn ivx_restriction(hyp: Hypothesis, p: usize) -> DMatrix<f64> {
    match hyp {
        Hypothesis::LinearityOnly => DMatrix::from_fn(p, 2 * p, |i, j| {
            if j == i {
                1.0
            } else if j == p + i {
                -1.0
            } else {
                0.0
            }
        }),
        _ => DMatrix::identity(2 * p, 2 * p),
    }
}

fn wald_ivx_with_instrument(
    sample: &Sample,
    gamma: f64,
    hyp: Hypothesis,
    z: &DMatrix<f64>,
) -> Result<f64> {
    let fit = ivx_fit_with_instrument(sample, gamma, z, false)?;
    let r = ivx_restriction(hyp, sample.p());
    quadratic_form(&r, &fit.beta_stacked(), &fit.avar)
}

/// Pointwise statistic with the given method.
pub fn wald_at(sample: &Sample, gamma: f64, hyp: Hypothesis, method: &Method) -> Result<f64> {
    match method {
        Method::Ols => wald_ols(sample, gamma, hyp),
        Method::Ivx { cfg, correction } => wald_ivx(sample, gamma, hyp, cfg, *correction),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldCurve {
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_stat: f64,
    pub argmax_gamma: f64,
    pub estimator: Estimator,
    pub hypothesis: Hypothesis,
    pub dof: usize,
    /// Grid points left out because a regime had too few observations.
    pub skipped: Vec<f64>,
}

/// Index of the largest value; the first one wins ties.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

struct Splits {
    order: Vec<usize>,
    counts: Vec<usize>,
    gammas: Vec<f64>,
    skipped: Vec<f64>,
}

fn admissible_splits(sample: &Sample, grid: &ThresholdGrid) -> Splits {
    let order = order_by(&sample.q_lag);
    let sorted_q: Vec<f64> = order.iter().map(|&t| sample.q_lag[t]).collect();
    let needed = sample.p() + 1;
    let n = sample.n();
    let mut out = Splits {
        order,
        counts: Vec::new(),
        gammas: Vec::new(),
        skipped: Vec::new(),
    };
    for &g in &grid.points {
        let below = sorted_q.partition_point(|q| *q <= g);
        if below < needed || n - below < needed {
            out.skipped.push(g);
        } else {
            out.counts.push(below);
            out.gammas.push(g);
        }
    }
    out
}

fn restricted_ssr_ols(sample: &Sample, hyp: Hypothesis) -> Result<Option<f64>> {
    Ok(match hyp {
        Hypothesis::LinearityOnly => Some(least_squares(&linear_design(sample), &sample.y)?.ssr),
        Hypothesis::JointLinearityPredictability => Some(if sample.has_intercept {
            let m = sample.y.mean();
            sample.y.iter().map(|v| (v - m) * (v - m)).sum()
        } else {
            sample.y.norm_squared()
        }),
        // Depends on the split.
        Hypothesis::RegimeSlopesZero => None,
    })
}

fn yy(m: &Comoments, p: usize, intercept: bool) -> f64 {
    if intercept {
        m.centered[(p, p)]
    } else {
        m.raw()[(p, p)]
    }
}

/// OLS Wald curve from running regime moments, using
/// `W = n (SSR_restricted - SSR) / SSR`.
fn ols_curve(sample: &Sample, splits: &Splits, hyp: Hypothesis) -> Result<Vec<f64>> {
    let p = sample.p();
    let n = sample.n() as f64;
    let intercept = sample.has_intercept;
    let fixed = restricted_ssr_ols(sample, hyp)?;
    let parts = split_moments(&splits.order, &splits.counts, p + 1, |t, buf| {
        for i in 0..p {
            buf[i] = sample.x_lag[(t, i)];
        }
        buf[p] = sample.y[t];
    });
    parts
        .iter()
        .map(|(lo, hi)| {
            let ssr = regime_ssr(lo, p, intercept)? + regime_ssr(hi, p, intercept)?;
            let restricted = match fixed {
                Some(v) => v,
                None => yy(lo, p, intercept) + yy(hi, p, intercept),
            };
            if ssr <= 0.0 {
                return Err(Error::RankDeficient { rcond: 0.0 });
            }
            Ok((n * (restricted - ssr) / ssr).max(0.0))
        })
        .collect()
}

/// IVX Wald curve from running `(z, x, y)` regime moments.
fn ivx_curve(
    sample: &Sample,
    splits: &Splits,
    hyp: Hypothesis,
    z: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let p = sample.p();
    let n = sample.n() as f64;
    let intercept = sample.has_intercept;
    let r = ivx_restriction(hyp, p);
    let parts = split_moments(&splits.order, &splits.counts, 2 * p + 1, |t, buf| {
        for i in 0..p {
            buf[i] = z[(t, i)];
            buf[p + i] = sample.x_lag[(t, i)];
        }
        buf[2 * p] = sample.y[t];
    });
    parts
        .iter()
        .map(|(lo, hi)| {
            let a = RegimeIv::from_comoments(lo, p, intercept)?;
            let b = RegimeIv::from_comoments(hi, p, intercept)?;
            let sigma2 = (a.ssr + b.ssr) / n;
            let mut v = DMatrix::zeros(2 * p, 2 * p);
            v.view_mut((0, 0), (p, p)).copy_from(&a.avar(sigma2));
            v.view_mut((p, p), (p, p)).copy_from(&b.avar(sigma2));
            let beta =
                DVector::from_fn(2 * p, |i, _| if i < p { a.beta[i] } else { b.beta[i - p] });
            quadratic_form(&r, &beta, &v)
        })
        .collect()
}

/// Wald statistic at every grid point and its supremum.
pub fn sup_wald(
    sample: &Sample,
    grid: &ThresholdGrid,
    hyp: Hypothesis,
    method: &Method,
) -> Result<WaldCurve> {
    let splits = admissible_splits(sample, grid);
    if splits.gammas.is_empty() {
        let g = grid.points[0];
        let (lower, upper) = crate::estimate::regime_counts(sample, g);
        return Err(Error::EmptyRegime {
            gamma: g,
            lower,
            upper,
            needed: sample.p() + 1,
        });
    }
    let values = match method {
        Method::Ols => ols_curve(sample, &splits, hyp)?,
        Method::Ivx { cfg, correction } => {
            let z = instrument_for(sample, cfg, *correction)?;
            ivx_curve(sample, &splits, hyp, &z)?
        }
    };
    let best = argmax_first(&values);
    Ok(WaldCurve {
        sup_stat: values[best],
        argmax_gamma: splits.gammas[best],
        gammas: splits.gammas,
        values,
        estimator: method.estimator(),
        hypothesis: hyp,
        dof: dof(hyp, method.estimator(), sample.p(), sample.has_intercept),
        skipped: splits.skipped,
    })
}

/// Same curve by independent pointwise evaluation (full refits).
pub fn sup_wald_pointwise(
    sample: &Sample,
    grid: &ThresholdGrid,
    hyp: Hypothesis,
    method: &Method,
) -> Result<WaldCurve> {
    let splits = admissible_splits(sample, grid);
    let z = match method {
        Method::Ols => None,
        Method::Ivx { cfg, correction } => Some(instrument_for(sample, cfg, *correction)?),
    };
    let values = splits
        .gammas
        .iter()
        .map(|g| match &z {
            None => wald_ols(sample, *g, hyp),
            Some(z) => wald_ivx_with_instrument(sample, *g, hyp, z),
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("no admissible grid points".into()));
    }
    let best = argmax_first(&values);
    Ok(WaldCurve {
        sup_stat: values[best],
        argmax_gamma: splits.gammas[best],
        gammas: splits.gammas,
        values,
        estimator: method.estimator(),
        hypothesis: hyp,
        dof: dof(hyp, method.estimator(), sample.p(), sample.has_intercept),
        skipped: splits.skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedThresholdWald {
    pub gamma_hat: f64,
    pub statistic: f64,
    pub dof: usize,
    pub estimator: Estimator,
}

/// Predictability Wald (`beta_1 = beta_2 = 0`) at the least-squares
/// threshold estimate. The threshold is always located by the OLS SSR
/// profile, whichever estimator is used for the test.
pub fn wald_at_estimated_threshold(
    sample: &Sample,
    grid: &ThresholdGrid,
    method: &Method,
) -> Result<EstimatedThresholdWald> {
    let fit = estimate_threshold(sample, grid)?;
    let statistic = wald_at(sample, fit.gamma_hat, Hypothesis::RegimeSlopesZero, method)?;
    Ok(EstimatedThresholdWald {
        gamma_hat: fit.gamma_hat,
        statistic,
        dof: 2 * sample.p(),
        estimator: method.estimator(),
    })
}

/// Serializable summary of one sup-Wald test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRecord {
    pub hypothesis: Hypothesis,
    pub estimator: Estimator,
    pub sup: f64,
    pub argmax: f64,
    pub dof: usize,
    pub grid: Vec<f64>,
    pub curve: Vec<f64>,
    pub pvalue: Option<f64>,
    pub pvalue_source: String,
}

impl WaldRecord {
    pub fn new(curve: &WaldCurve, pvalue: Option<f64>, pvalue_source: impl Into<String>) -> Self {
        Self {
            hypothesis: curve.hypothesis,
            estimator: curve.estimator,
            sup: curve.sup_stat,
            argmax: curve.argmax_gamma,
            dof: curve.dof,
            grid: curve.gammas.clone(),
            curve: curve.values.clone(),
            pvalue,
            pvalue_source: pvalue_source.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{gen_threshold_sample, PersistenceSpec, ThresholdDgpSpec};
    use crate::innovations::CovarianceSpec;

    fn sample(n: usize, seed: u64) -> Sample {
        gen_threshold_sample(
            &ThresholdDgpSpec::benchmark(1),
            &PersistenceSpec::scalar(2.0, 0.25),
            &CovarianceSpec::identity(1, 1),
            n,
            seed,
        )
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    const ALL: [Hypothesis; 3] = [
        Hypothesis::LinearityOnly,
        Hypothesis::JointLinearityPredictability,
        Hypothesis::RegimeSlopesZero,
    ];

    #[test]
    fn near_null_without_noise() {
        let base = sample(200, 1);
        let y = DVector::from_fn(200, |t, _| 1e-8 * ((t * 7919 % 97) as f64 / 97.0 - 0.5));
        let s = Sample::new(y, base.x_lag, base.q_lag, true).unwrap();
        for h in ALL {
            let w = wald_ols(&s, 0.0, h).unwrap();
            assert!(w.is_finite() && w >= 0.0);
        }
        // Pure jitter has no structure for the test to find beyond chance;
        // the statistic stays of chi-square order.
        assert!(wald_ols(&s, 0.0, Hypothesis::LinearityOnly).unwrap() < 50.0);
    }

    #[test]
    fn ols_matches_ssr_difference() {
        let s = sample(100, 2);
        let fit = ols_fit(&s, 0.1, Parameterization::TwoRegime).unwrap();
        let s2 = fit.ssr / 100.0;
        let lin = least_squares(&linear_design(&s), &s.y).unwrap().ssr;
        let w = wald_ols(&s, 0.1, Hypothesis::LinearityOnly).unwrap();
        assert!(rel(w, (lin - fit.ssr) / s2) < 1e-8);
        let ybar = s.y.mean();
        let tss: f64 = s.y.iter().map(|v| (v - ybar).powi(2)).sum();
        let w = wald_ols(&s, 0.1, Hypothesis::JointLinearityPredictability).unwrap();
        assert!(rel(w, (tss - fit.ssr) / s2) < 1e-8);
        // Regime intercepts only.
        let d = DMatrix::from_fn(100, 2, |t, j| {
            let lower = s.q_lag[t] <= 0.1;
            if (j == 0) == lower {
                1.0
            } else {
                0.0
            }
        });
        let r = least_squares(&d, &s.y).unwrap().ssr;
        let w = wald_ols(&s, 0.1, Hypothesis::RegimeSlopesZero).unwrap();
        assert!(rel(w, (r - fit.ssr) / s2) < 1e-8);
    }

    #[test]
    fn linearity_matches_residualized_form() {
        // eta' [X_g'(I - P_x) X_g] eta / sigma^2 with eta the regime shift.
        let s = sample(150, 3);
        let g = -0.2;
        let shift = ols_fit(&s, g, Parameterization::BaseDelta).unwrap();
        let eta = shift.theta.rows(2, 2).into_owned();
        let xg = DMatrix::from_fn(150, 2, |t, j| {
            let ind = if s.q_lag[t] <= g { 1.0 } else { 0.0 };
            if j == 0 {
                ind
            } else {
                ind * s.x_lag[(t, 0)]
            }
        });
        let x = linear_design(&s);
        let mut resid = xg.clone();
        for j in 0..2 {
            resid.set_column(
                j,
                &least_squares(&x, &xg.column(j).into_owned()).unwrap().resid,
            );
        }
        let m = xg.transpose() * resid;
        let w = (eta.transpose() * m * &eta)[(0, 0)] / shift.sigma2();
        assert!(rel(wald_ols(&s, g, Hypothesis::LinearityOnly).unwrap(), w) < 1e-8);
    }

    #[test]
    fn empty_regime_propagates() {
        let s = sample(60, 4);
        assert!(matches!(
            wald_ols(&s, 100.0, Hypothesis::LinearityOnly),
            Err(Error::EmptyRegime { .. })
        ));
    }

    #[test]
    fn ivx_matches_explicit_quadratic_form() {
        let s = sample(100, 5);
        let cfg = IvxConfig::default();
        let fit = crate::ivx::ivx_fit(&s, 0.0, &cfg, None).unwrap();
        let b = fit.beta_stacked();
        let inv = fit.avar.clone().try_inverse().unwrap();
        let joint = (b.transpose() * &inv * &b)[(0, 0)];
        let got = wald_ivx(
            &s,
            0.0,
            Hypothesis::JointLinearityPredictability,
            &cfg,
            None,
        )
        .unwrap();
        assert!(rel(got, joint) < 1e-8);
        let d = b[0] - b[1];
        let lin = d * d / (fit.avar[(0, 0)] + fit.avar[(1, 1)]);
        let got = wald_ivx(&s, 0.0, Hypothesis::LinearityOnly, &cfg, None).unwrap();
        assert!(rel(got, lin) < 1e-8);
    }

    #[test]
    fn scale_invariance() {
        let s = sample(120, 6);
        let k = 3.7;
        let cfg = IvxConfig::default();
        for h in ALL {
            let a = wald_ivx(&s, 0.0, h, &cfg, None).unwrap();
            let b = wald_ivx(&s.scale_y(k), 0.0, h, &cfg, None).unwrap();
            assert!(rel(a, b) < 1e-10);
            let a = wald_ols(&s, 0.0, h).unwrap();
            let b = wald_ols(&s.scale_y(k), 0.0, h).unwrap();
            assert!(rel(a, b) < 1e-10);
        }
    }

    #[test]
    fn fast_curves_match_pointwise() {
        let s = sample(250, 7);
        let grid = ThresholdGrid::for_sample(&s, 0.15, 0.85).unwrap();
        for method in [Method::Ols, Method::ivx(IvxConfig::default())] {
            for h in ALL {
                let fast = sup_wald(&s, &grid, h, &method).unwrap();
                let slow = sup_wald_pointwise(&s, &grid, h, &method).unwrap();
                assert_eq!(fast.gammas, slow.gammas);
                for (a, b) in fast.values.iter().zip(&slow.values) {
                    assert!(
                        rel(*a, *b) < 1e-8,
                        "{h:?} {:?}: {a} vs {b}",
                        method.estimator()
                    );
                }
                let max = slow
                    .values
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(rel(fast.sup_stat, max) < 1e-8);
                assert!(fast.values.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn single_point_grid() {
        let s = sample(100, 8);
        let grid = ThresholdGrid::from_points(vec![0.05], 10).unwrap();
        let c = sup_wald(&s, &grid, Hypothesis::LinearityOnly, &Method::Ols).unwrap();
        let w = wald_ols(&s, 0.05, Hypothesis::LinearityOnly).unwrap();
        assert!(rel(c.sup_stat, w) < 1e-9);
        assert_eq!(c.argmax_gamma, 0.05);
    }

    #[test]
    fn small_regimes_are_skipped() {
        let s = sample(100, 9);
        let lo = s.q_lag.min();
        let grid = ThresholdGrid::from_points(vec![lo, 0.0], 1).unwrap();
        let c = sup_wald(&s, &grid, Hypothesis::LinearityOnly, &Method::Ols).unwrap();
        assert_eq!(c.skipped, vec![lo]);
        assert_eq!(c.gammas, vec![0.0]);
    }

    #[test]
    fn dof_bookkeeping() {
        assert_eq!(dof(Hypothesis::LinearityOnly, Estimator::Ols, 1, true), 2);
        assert_eq!(
            dof(
                Hypothesis::JointLinearityPredictability,
                Estimator::Ols,
                1,
                true
            ),
            3
        );
        assert_eq!(
            dof(
                Hypothesis::JointLinearityPredictability,
                Estimator::Ivx,
                1,
                true
            ),
            2
        );
        assert_eq!(
            dof(Hypothesis::RegimeSlopesZero, Estimator::Ols, 2, true),
            4
        );
        let r = restriction_matrix(Hypothesis::JointLinearityPredictability, 1, true);
        assert_eq!(r.nrows(), 3);
    }

    #[test]
    fn estimated_threshold_wald_grows_under_alternative() {
        let dgp = ThresholdDgpSpec {
            alpha: [0.0, 0.0],
            slopes: crate::dgp::Slopes::Regimes {
                beta1: vec![0.3],
                beta2: vec![0.1],
            },
            gamma0: 0.25,
            threshold_dist: Default::default(),
        };
        let run = |n| {
            let s = gen_threshold_sample(
                &dgp,
                &PersistenceSpec::scalar(1.0, 0.0),
                &CovarianceSpec::identity(1, 1),
                n,
                10,
            )
            .unwrap();
            let grid = ThresholdGrid::for_sample(&s, 0.15, 0.85).unwrap();
            wald_at_estimated_threshold(&s, &grid, &Method::ivx(IvxConfig::default()))
                .unwrap()
                .statistic
        };
        assert!(run(500) > run(250));
    }

    #[test]
    fn record_serializes() {
        let s = sample(100, 11);
        let grid = ThresholdGrid::for_sample(&s, 0.15, 0.85).unwrap();
        let c = sup_wald(&s, &grid, Hypothesis::LinearityOnly, &Method::Ols).unwrap();
        let rec = WaldRecord::new(&c, None, "none");
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        for key in [
            "hypothesis",
            "estimator",
            "sup",
            "argmax",
            "dof",
            "grid",
            "curve",
            "pvalue_source",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["hypothesis"], "linearity-only");
    }
}
