//! Concentrated least-squares estimation of the threshold location.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, spd_solve, sym_rcond, LeastSquares, RCOND_TOL};
use crate::regime::{order_by, split_moments, Comoments};

/// Conventional trimming quantiles.
pub const DEFAULT_TRIMMING: (f64, f64) = (0.15, 0.85);

/// Candidate thresholds: distinct order statistics of `q` between the
/// trimming quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub pi1: f64,
    pub pi2: f64,
    pub points: Vec<f64>,
    /// Minimum observations per regime at every point.
    pub min_regime: usize,
}

impl ThresholdGrid {
    pub fn new(q: &DVector<f64>, p: usize, pi1: f64, pi2: f64) -> Result<Self> {
        if !(0.0 < pi1 && pi1 < pi2 && pi2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "trimming must satisfy 0 < pi1 < pi2 < 1, got [{pi1}, {pi2}]"
            )));
        }
        let n = q.len();
        let min_regime = (p + 2).max(10);
        let mut s: Vec<f64> = q.iter().cloned().collect();
        s.sort_by(f64::total_cmp);
        if n == 0 || s[0] == s[n - 1] {
            return Err(Error::DegenerateThresholdVariable(
                "threshold variable is constant".into(),
            ));
        }
        let lo = ((pi1 * n as f64).ceil() as usize).max(1);
        let hi = ((pi2 * n as f64).floor() as usize).min(n);
        let mut points: Vec<f64> = Vec::new();
        for k in lo..=hi {
            let v = s[k - 1];
            if v <= s[0] || v >= s[n - 1] {
                continue;
            }
            if points.last() == Some(&v) {
                continue;
            }
            let below = s.partition_point(|x| *x <= v);
            if below >= min_regime && n - below >= min_regime {
                points.push(v);
            }
        }
        if points.is_empty() {
            return Err(Error::DegenerateThresholdVariable(
                "no admissible threshold candidates inside the trimming range".into(),
            ));
        }
        Ok(Self {
            pi1,
            pi2,
            points,
            min_regime,
        })
    }

    pub fn for_sample(sample: &Sample, pi1: f64, pi2: f64) -> Result<Self> {
        Self::new(&sample.q_lag, sample.p(), pi1, pi2)
    }

    /// Grid with explicitly chosen candidates.
    pub fn from_points(points: Vec<f64>, min_regime: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("threshold grid is empty".into()));
        }
        let mut points = points;
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(Self {
            pi1: f64::NAN,
            pi2: f64::NAN,
            points,
            min_regime,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same grid after a strictly increasing transform of `q`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            points: self.points.iter().map(|g| f(*g)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    /// `(I1, x'I1, I2, x'I2)`: one coefficient block per regime.
    #[default]
    TwoRegime,
    /// `(1, x', I1, x'I1)`: base coefficients plus a lower-regime shift.
    BaseDelta,
}

/// Observations with `q <= gamma` and `q > gamma`.
pub fn regime_counts(sample: &Sample, gamma: f64) -> (usize, usize) {
    let below = sample.q_lag.iter().filter(|q| **q <= gamma).count();
    (below, sample.n() - below)
}

fn check_regimes(sample: &Sample, gamma: f64) -> Result<()> {
    let (lower, upper) = regime_counts(sample, gamma);
    let needed = sample.p() + 1;
    if lower < needed || upper < needed {
        return Err(Error::EmptyRegime {
            gamma,
            lower,
            upper,
            needed,
        });
    }
    Ok(())
}

/// Number of coefficients per regime block.
pub(crate) fn block_width(sample: &Sample) -> usize {
    sample.p() + usize::from(sample.has_intercept)
}

/// Threshold design matrix at `gamma`.
pub fn build_design(
    sample: &Sample,
    gamma: f64,
    parameterization: Parameterization,
) -> Result<DMatrix<f64>> {
    check_regimes(sample, gamma)?;
    let (n, p) = (sample.n(), sample.p());
    let w = block_width(sample);
    let c = usize::from(sample.has_intercept);
    let mut x = DMatrix::zeros(n, 2 * w);
    for t in 0..n {
        let lower = sample.q_lag[t] <= gamma;
        let (first, second) = match parameterization {
            Parameterization::TwoRegime => (lower, !lower),
            Parameterization::BaseDelta => (true, lower),
        };
        for (block, on) in [(0, first), (w, second)] {
            if !on {
                continue;
            }
            if sample.has_intercept {
                x[(t, block)] = 1.0;
            }
            for i in 0..p {
                x[(t, block + c + i)] = sample.x_lag[(t, i)];
            }
        }
    }
    Ok(x)
}

/// Design of the linear (no-threshold) model: `(1, x')` or `x'`.
pub fn linear_design(sample: &Sample) -> DMatrix<f64> {
    let (n, p) = (sample.n(), sample.p());
    let c = usize::from(sample.has_intercept);
    DMatrix::from_fn(
        n,
        p + c,
        |t, j| {
            if j < c {
                1.0
            } else {
                sample.x_lag[(t, j - c)]
            }
        },
    )
}

/// OLS fit of the threshold model at a fixed `gamma`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub gamma: f64,
    pub parameterization: Parameterization,
    pub theta: DVector<f64>,
    pub ssr: f64,
    pub xtx_inv: DMatrix<f64>,
    pub resid: DVector<f64>,
}

impl OlsFit {
    pub fn sigma2(&self) -> f64 {
        self.ssr / self.resid.len() as f64
    }
}

pub fn ols_fit(sample: &Sample, gamma: f64, parameterization: Parameterization) -> Result<OlsFit> {
    let x = build_design(sample, gamma, parameterization)?;
    let LeastSquares {
        coef,
        resid,
        ssr,
        xtx_inv,
    } = least_squares(&x, &sample.y)?;
    Ok(OlsFit {
        gamma,
        parameterization,
        theta: coef,
        ssr,
        xtx_inv,
        resid,
    })
}

/// SSR of one regime from its `(x, y)` co-moments.
pub(crate) fn regime_ssr(m: &Comoments, p: usize, intercept: bool) -> Result<f64> {
    let g = if intercept {
        m.centered.clone()
    } else {
        m.raw()
    };
    let gxx = g.view((0, 0), (p, p)).into_owned();
    let gxy = g.view((0, p), (p, 1)).column(0).into_owned();
    let gyy = g[(p, p)];
    let rcond = sym_rcond(&gxx);
    if rcond < RCOND_TOL {
        return Err(Error::RankDeficient { rcond });
    }
    let b = spd_solve(&gxx, &gxy)?;
    Ok((gyy - gxy.dot(&b)).max(0.0))
}

/// Sorted order and split sizes shared by the grid-profile routines.
pub(crate) struct GridSplits {
    pub order: Vec<usize>,
    pub counts: Vec<usize>,
}

pub(crate) fn grid_splits(sample: &Sample, grid: &ThresholdGrid) -> Result<GridSplits> {
    let order = order_by(&sample.q_lag);
    let sorted_q: Vec<f64> = order.iter().map(|&t| sample.q_lag[t]).collect();
    let needed = sample.p() + 1;
    let mut counts = Vec::with_capacity(grid.len());
    for &gamma in &grid.points {
        let below = sorted_q.partition_point(|q| *q <= gamma);
        let above = sample.n() - below;
        if below < needed || above < needed {
            return Err(Error::EmptyRegime {
                gamma,
                lower: below,
                upper: above,
                needed,
            });
        }
        counts.push(below);
    }
    Ok(GridSplits { order, counts })
}

/// `SSR(gamma)` at every grid point from running regime co-moments.
pub fn ssr_profile(sample: &Sample, grid: &ThresholdGrid) -> Result<Vec<f64>> {
    let p = sample.p();
    let splits = grid_splits(sample, grid)?;
    // The linear fit lies in the span of every threshold design, so its
    // residuals give the same SSR while keeping y'y close to the SSR scale.
    let e = least_squares(&linear_design(sample), &sample.y)?.resid;
    let parts = split_moments(&splits.order, &splits.counts, p + 1, |t, buf| {
        for i in 0..p {
            buf[i] = sample.x_lag[(t, i)];
        }
        buf[p] = e[t];
    });
    parts
        .iter()
        .map(|(lo, hi)| {
            Ok(regime_ssr(lo, p, sample.has_intercept)? + regime_ssr(hi, p, sample.has_intercept)?)
        })
        .collect()
}

/// `SSR(gamma)` by a full QR refit at every grid point.
pub fn ssr_profile_refit(sample: &Sample, grid: &ThresholdGrid) -> Result<Vec<f64>> {
    grid.points
        .iter()
        .map(|g| Ok(ols_fit(sample, *g, Parameterization::TwoRegime)?.ssr))
        .collect()
}

/// Index of the smallest value; the first one wins ties.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub gamma_hat: f64,
    pub parameterization: Parameterization,
    /// Stacked `(alpha_1, beta_1, alpha_2, beta_2)` (intercepts only when present).
    pub theta_hat: Vec<f64>,
    pub ssr_curve: Vec<f64>,
    pub ssr_min: f64,
    pub sigma2_hat: f64,
    pub regime_sizes: (usize, usize),
    pub grid: ThresholdGrid,
}

/// Grid argmin of the concentrated SSR, refit at the minimizer.
pub fn estimate_threshold(sample: &Sample, grid: &ThresholdGrid) -> Result<ThresholdFit> {
    let curve = ssr_profile(sample, grid)?;
    let best = argmin_first(&curve);
    let gamma_hat = grid.points[best];
    let fit = ols_fit(sample, gamma_hat, Parameterization::TwoRegime)?;
    Ok(ThresholdFit {
        gamma_hat,
        parameterization: Parameterization::TwoRegime,
        theta_hat: fit.theta.iter().cloned().collect(),
        ssr_min: fit.ssr,
        sigma2_hat: fit.sigma2(),
        regime_sizes: regime_counts(sample, gamma_hat),
        ssr_curve: curve,
        grid: grid.clone(),
    })
}
