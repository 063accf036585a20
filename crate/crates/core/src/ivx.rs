//! IVX instruments and regime-wise instrumental-variable estimation.
//!
//! Intercepts are handled by partialling out within each regime: `x`, `y`
//! and the instrument are centered on their regime means before the
//! moment matrices are formed. Centering the instrument leaves `Z'x~`
//! unchanged; it only matters for the `Z'Z` block of the covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::{RegressorPath, Sample};
use crate::error::{Error, Result};
use crate::estimate::{argmin_first, grid_splits, ThresholdGrid};
use crate::linalg::{general_rcond, RCOND_TOL};
use crate::regime::{split_moments, Comoments};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvxConfig {
    pub c_z: f64,
    pub gamma_z: f64,
}

impl Default for IvxConfig {
    fn default() -> Self {
        Self {
            c_z: 1.0,
            gamma_z: 0.95,
        }
    }
}

impl IvxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_z > 0.0 && self.c_z.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "c_z must be positive, got {}",
                self.c_z
            )));
        }
        if !(self.gamma_z > 0.0 && self.gamma_z < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma_z must lie in (0, 1), got {}",
                self.gamma_z
            )));
        }
        Ok(())
    }

    /// `1 - c_z / n^gamma_z`.
    pub fn rho_z(&self, n: usize) -> f64 {
        1.0 - self.c_z / (n as f64).powf(self.gamma_z)
    }
}

/// `z_t = rho_z z_{t-1} + (x_t - x_{t-1})`, `z_0 = 0`, applied column-wise
/// to the rows of `x`; `rho_z` uses the number of rows as `n`.
pub fn build_instrument(x: &DMatrix<f64>, cfg: &IvxConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::InvalidSampleSize {
            got: n,
            reason: "instrument needs at least 2 points",
        });
    }
    let rho = cfg.rho_z(n);
    let mut z = DMatrix::zeros(n, p);
    for i in 0..p {
        for t in 1..n {
            z[(t, i)] = rho * z[(t - 1, i)] + (x[(t, i)] - x[(t - 1, i)]);
        }
    }
    Ok(z)
}

/// Inputs of the persistence-corrected instrument for a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// Localizing coefficients, one per regressor.
    pub c: Vec<f64>,
    pub phi: Vec<f64>,
    /// `n x d`; row `t-1` holds `u_phi,t` for `t = 1..n`.
    pub u_phi: Option<DMatrix<f64>>,
}

impl Correction {
    pub fn from_path(path: &RegressorPath) -> Self {
        Self {
            c: path.spec.c.clone(),
            phi: path.spec.phi.clone(),
            u_phi: Some(path.u_phi.clone()),
        }
    }
}

/// Corrected instrument and its components, all `n x p` with row `m`
/// belonging to `x_m`.
#[derive(Debug, Clone)]
pub struct CorrectedInstrument {
    pub z: DMatrix<f64>,
    pub eta1: DMatrix<f64>,
    pub eta2: DMatrix<f64>,
    pub eta3: DMatrix<f64>,
    pub z_tilde: DMatrix<f64>,
}

/// `z~_m = z_m + (c/n) eta1_m + n^{-1/2} eta2_m + (2n)^{-1} eta3_m` where
/// `eta_k,m = rho_z eta_k,m-1 + w_k,m x_{m-1}` with weights `1`, `phi'u_phi,m`
/// and `(phi'u_phi,m)^2`.
///
/// `x` holds the lagged regressors `x_0..x_{n-1}`.
pub fn build_corrected_instrument(
    x: &DMatrix<f64>,
    correction: &Correction,
    cfg: &IvxConfig,
) -> Result<CorrectedInstrument> {
    let z = build_instrument(x, cfg)?;
    let (n, p) = x.shape();
    let u_phi = correction
        .u_phi
        .as_ref()
        .ok_or(Error::MissingExogenousDraws)?;
    if u_phi.nrows() < n || u_phi.ncols() != correction.phi.len() {
        return Err(Error::MissingExogenousDraws);
    }
    if correction.c.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "correction has {} localizing coefficients for {p} regressors",
            correction.c.len()
        )));
    }
    let rho = cfg.rho_z(n);
    let nf = n as f64;
    let mut eta1 = DMatrix::zeros(n, p);
    let mut eta2 = DMatrix::zeros(n, p);
    let mut eta3 = DMatrix::zeros(n, p);
    for m in 1..n {
        let s: f64 = correction
            .phi
            .iter()
            .enumerate()
            .map(|(j, f)| f * u_phi[(m - 1, j)])
            .sum();
        for i in 0..p {
            let xl = x[(m - 1, i)];
            eta1[(m, i)] = rho * eta1[(m - 1, i)] + xl;
            eta2[(m, i)] = rho * eta2[(m - 1, i)] + s * xl;
            eta3[(m, i)] = rho * eta3[(m - 1, i)] + s * s * xl;
        }
    }
    let mut z_tilde = z.clone();
    for i in 0..p {
        let ci = correction.c[i] / nf;
        for m in 0..n {
            z_tilde[(m, i)] +=
                ci * eta1[(m, i)] + eta2[(m, i)] / nf.sqrt() + eta3[(m, i)] / (2.0 * nf);
        }
    }
    Ok(CorrectedInstrument {
        z,
        eta1,
        eta2,
        eta3,
        z_tilde,
    })
}

/// Instrument matrix for `sample`, corrected when `correction` is given.
pub fn instrument_for(
    sample: &Sample,
    cfg: &IvxConfig,
    correction: Option<&Correction>,
) -> Result<DMatrix<f64>> {
    match correction {
        None => build_instrument(&sample.x_lag, cfg),
        Some(c) => Ok(build_corrected_instrument(&sample.x_lag, c, cfg)?.z_tilde),
    }
}

#[derive(Debug, Clone)]
pub struct IvxFit {
    pub gamma: f64,
    /// `(beta_1, beta_2)`, each of length `p`.
    pub beta_ivx: [DVector<f64>; 2],
    /// Regime intercepts recovered from the partialled-out fit (zero
    /// without intercepts).
    pub alpha: [f64; 2],
    pub z_path: DMatrix<f64>,
    /// Block-diagonal `2p x 2p` covariance of `(beta_1, beta_2)`.
    pub avar: DMatrix<f64>,
    pub sigma2: f64,
    pub corrected: bool,
}

impl IvxFit {
    pub fn beta_stacked(&self) -> DVector<f64> {
        let p = self.beta_ivx[0].len();
        DVector::from_fn(2 * p, |i, _| {
            if i < p {
                self.beta_ivx[0][i]
            } else {
                self.beta_ivx[1][i - p]
            }
        })
    }
}

/// Moment blocks of one regime, after partialling out the intercept.
#[derive(Debug, Clone)]
pub(crate) struct RegimeIv {
    pub beta: DVector<f64>,
    pub ssr: f64,
    /// `(Z'x~)^{-1}`.
    pub szx_inv: DMatrix<f64>,
    /// `Z~'Z~`.
    pub szz: DMatrix<f64>,
}

impl RegimeIv {
    fn from_blocks(
        szx: DMatrix<f64>,
        szz: DMatrix<f64>,
        szy: DVector<f64>,
        sxx: DMatrix<f64>,
        sxy: DVector<f64>,
        syy: f64,
    ) -> Result<Self> {
        let rcond = general_rcond(&szx);
        if rcond < RCOND_TOL {
            return Err(Error::NearSingularInstrumentGram { rcond });
        }
        let szx_inv = szx
            .try_inverse()
            .ok_or(Error::NearSingularInstrumentGram { rcond: 0.0 })?;
        let beta = &szx_inv * szy;
        let ssr = (syy - 2.0 * beta.dot(&sxy) + (beta.transpose() * &sxx * &beta)[(0, 0)]).max(0.0);
        Ok(Self {
            beta,
            ssr,
            szx_inv,
            szz,
        })
    }

    /// From co-moments of `(z, x, y)` (length `2p + 1`).
    pub fn from_comoments(m: &Comoments, p: usize, intercept: bool) -> Result<Self> {
        let g = if intercept {
            m.centered.clone()
        } else {
            m.raw()
        };
        Self::from_blocks(
            g.view((0, p), (p, p)).into_owned(),
            g.view((0, 0), (p, p)).into_owned(),
            g.view((0, 2 * p), (p, 1)).column(0).into_owned(),
            g.view((p, p), (p, p)).into_owned(),
            g.view((p, 2 * p), (p, 1)).column(0).into_owned(),
            g[(2 * p, 2 * p)],
        )
    }

    pub fn avar(&self, sigma2: f64) -> DMatrix<f64> {
        &self.szx_inv * &self.szz * self.szx_inv.transpose() * sigma2
    }
}

fn regime_rows(sample: &Sample, gamma: f64) -> [Vec<usize>; 2] {
    let mut rows = [Vec::new(), Vec::new()];
    for t in 0..sample.n() {
        rows[usize::from(sample.q_lag[t] > gamma)].push(t);
    }
    rows
}

/// Regime matrices built row by row, centered when the sample has an
/// intercept.
fn regime_iv_direct(
    sample: &Sample,
    z: &DMatrix<f64>,
    rows: &[usize],
) -> Result<(RegimeIv, f64, DVector<f64>)> {
    let p = sample.p();
    let k = rows.len();
    let take = |m: &DMatrix<f64>| DMatrix::from_fn(k, p, |r, i| m[(rows[r], i)]);
    let mut zr = take(z);
    let mut xr = take(&sample.x_lag);
    let mut yr = DVector::from_fn(k, |r, _| sample.y[rows[r]]);
    let (mut xbar, mut ybar) = (DVector::zeros(p), 0.0);
    if sample.has_intercept {
        xbar = xr.row_mean().transpose();
        ybar = yr.mean();
        let zbar = zr.row_mean();
        for r in 0..k {
            for i in 0..p {
                xr[(r, i)] -= xbar[i];
                zr[(r, i)] -= zbar[i];
            }
            yr[r] -= ybar;
        }
    }
    let iv = RegimeIv::from_blocks(
        zr.transpose() * &xr,
        zr.transpose() * &zr,
        zr.transpose() * &yr,
        xr.transpose() * &xr,
        xr.transpose() * &yr,
        yr.dot(&yr),
    )?;
    Ok((iv, ybar, xbar))
}

/// Regime-wise IVX estimator at `gamma` with a prebuilt instrument.
pub fn ivx_fit_with_instrument(
    sample: &Sample,
    gamma: f64,
    z: &DMatrix<f64>,
    corrected: bool,
) -> Result<IvxFit> {
    let (n, p) = (sample.n(), sample.p());
    if z.shape() != (n, p) {
        return Err(Error::DimensionMismatch(format!(
            "instrument is {:?}, sample needs {n} x {p}",
            z.shape()
        )));
    }
    let rows = regime_rows(sample, gamma);
    let needed = p + 1;
    if rows[0].len() < needed || rows[1].len() < needed {
        return Err(Error::EmptyRegime {
            gamma,
            lower: rows[0].len(),
            upper: rows[1].len(),
            needed,
        });
    }
    let (iv1, y1, x1) = regime_iv_direct(sample, z, &rows[0])?;
    let (iv2, y2, x2) = regime_iv_direct(sample, z, &rows[1])?;
    let sigma2 = (iv1.ssr + iv2.ssr) / n as f64;
    let mut avar = DMatrix::zeros(2 * p, 2 * p);
    avar.view_mut((0, 0), (p, p)).copy_from(&iv1.avar(sigma2));
    avar.view_mut((p, p), (p, p)).copy_from(&iv2.avar(sigma2));
    let alpha = if sample.has_intercept {
        [y1 - x1.dot(&iv1.beta), y2 - x2.dot(&iv2.beta)]
    } else {
        [0.0, 0.0]
    };
    Ok(IvxFit {
        gamma,
        beta_ivx: [iv1.beta, iv2.beta],
        alpha,
        z_path: z.clone(),
        avar,
        sigma2,
        corrected,
    })
}

pub fn ivx_fit(
    sample: &Sample,
    gamma: f64,
    cfg: &IvxConfig,
    correction: Option<&Correction>,
) -> Result<IvxFit> {
    let z = instrument_for(sample, cfg, correction)?;
    ivx_fit_with_instrument(sample, gamma, &z, correction.is_some())
}

/// IVX residual sum of squares `SSR_1 + SSR_2` at every grid point.
pub fn ivx_ssr_profile(
    sample: &Sample,
    grid: &ThresholdGrid,
    z: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let p = sample.p();
    let splits = grid_splits(sample, grid)?;
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
            let a = RegimeIv::from_comoments(lo, p, sample.has_intercept)?;
            let b = RegimeIv::from_comoments(hi, p, sample.has_intercept)?;
            Ok(a.ssr + b.ssr)
        })
        .collect()
}

/// Threshold located by the grid argmin of the IVX residual sum of squares,
/// with the IVX fit at the minimizer.
pub fn estimate_threshold_ivx(
    sample: &Sample,
    grid: &ThresholdGrid,
    cfg: &IvxConfig,
    correction: Option<&Correction>,
) -> Result<IvxFit> {
    let z = instrument_for(sample, cfg, correction)?;
    let curve = ivx_ssr_profile(sample, grid, &z)?;
    let gamma = grid.points[argmin_first(&curve)];
    ivx_fit_with_instrument(sample, gamma, &z, correction.is_some())
}

/// Draws of the limit `N(0, phi' Omega phi / (2 c_z))` of the scaled
/// instrument partial sum.
pub fn simulate_znphi_limit(
    cfg: &IvxConfig,
    phi: &[f64],
    omega_phiphi: &DMatrix<f64>,
    draws: usize,
    key: StreamKey,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = phi.len();
    if omega_phiphi.shape() != (d, d) {
        return Err(Error::DimensionMismatch("omega must be d x d".into()));
    }
    let f = DVector::from_column_slice(phi);
    let var = (f.transpose() * omega_phiphi * &f)[(0, 0)] / (2.0 * cfg.c_z);
    if var < 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let sd = var.sqrt();
    let mut stream = key.normals(1);
    let mut z = [0.0];
    Ok((0..draws)
        .map(|_| {
            stream.next_row(&mut z);
            sd * z[0]
        })
        .collect())
}

/// `n^{-gamma_z/2} sum_{j=1}^n s_j rho_z^{n-j}` for the shock index
/// `s_j = phi'u_phi,j` (rows of `u_phi`).
pub fn scaled_instrument_sum(u_phi: &DMatrix<f64>, phi: &[f64], cfg: &IvxConfig) -> f64 {
    let n = u_phi.nrows();
    let rho = cfg.rho_z(n);
    let mut acc = 0.0;
    for t in 0..n {
        let s: f64 = phi.iter().enumerate().map(|(j, f)| f * u_phi[(t, j)]).sum();
        acc = rho * acc + s;
    }
    acc / (n as f64).powf(cfg.gamma_z / 2.0)
}
