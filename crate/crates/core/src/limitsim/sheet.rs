//! Brownian-sheet functionals of the OLS sup-Wald statistics.
//!
//! The threshold variable is independent of the innovations, so the sheet
//! `W(s, lambda)` splits the error increment `dW(s)` across quantile bins:
//! bin `b` of width `w_b` receives `w_b dW(s) + zeta_b - w_b sum_b zeta_b`
//! with independent `zeta_b ~ N(0, w_b ds)`. Summing over bins returns
//! `dW(s)`, and bins are independent Brownian motions when `dW` is.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::CovarianceSpec;
use crate::linalg::{spd_solve, sym_rcond, RCOND_TOL};
use crate::rng::StreamKey;

use super::gpath::{draw_increments, g_path_from_increments, GPath};
use super::{check_trimming, MeshSpec};

const TAG_PATH: u64 = 11;
const TAG_SHEET: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SheetRoute {
    /// Bin integrals drawn from their exact Gaussian law given `G`.
    #[default]
    Aggregated,
    /// Explicit per-step, per-bin sheet increments.
    Lattice,
}

/// Quantile points `lambda` at which the functional is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub points: Vec<f64>,
}

impl LambdaGrid {
    /// `count` equally spaced points on `[pi1, pi2]`; one point when the
    /// trimming interval is collapsed.
    pub fn new(trimming: (f64, f64), count: usize) -> Result<Self> {
        check_trimming(trimming)?;
        let (a, b) = trimming;
        if a == b || count <= 1 {
            return Ok(Self { points: vec![a] });
        }
        Ok(Self {
            points: (0..count)
                .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
                .collect(),
        })
    }

    /// Bin widths: `[0, l_1], (l_1, l_2], ..., (l_K, 1]`.
    fn widths(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.points.len() + 1);
        let mut prev = 0.0;
        for &l in &self.points {
            w.push(l - prev);
            prev = l;
        }
        w.push(1.0 - prev);
        w
    }
}

/// Parameters of the OLS limit laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsLimitSpec {
    pub c: Vec<f64>,
    pub phi: Vec<f64>,
    pub cov: CovarianceSpec,
    pub trimming: (f64, f64),
    pub lambda_points: usize,
    /// Regressions include regime intercepts.
    pub intercept: bool,
    pub route: SheetRoute,
}

impl OlsLimitSpec {
    pub fn scalar(c: f64, phi: f64) -> Self {
        Self {
            c: vec![c],
            phi: vec![phi],
            cov: CovarianceSpec::identity(1, 1),
            trimming: (0.15, 0.85),
            lambda_points: 71,
            intercept: true,
            route: SheetRoute::Aggregated,
        }
    }

    pub fn p(&self) -> usize {
        self.c.len()
    }
}

/// One draw of the sheet functionals.
#[derive(Debug, Clone)]
pub struct SheetDraw {
    pub lambdas: Vec<f64>,
    /// Linearity statistic at each lambda.
    pub pointwise: Vec<f64>,
    pub sup_linearity: f64,
    /// `(int G~ dW)'(int G~G~')^{-1}(int G~ dW)` with `G~` demeaned when
    /// intercepts are present.
    pub pooled: f64,
    /// `W(1, lambda)` at each grid point.
    pub sheet_terminal: Vec<f64>,
}

impl SheetDraw {
    pub fn sup_joint(&self) -> f64 {
        self.pooled + self.sup_linearity
    }
}

/// Regressor process `h(s)`: `(1, G(s))` with intercepts, `G(s)` otherwise.
fn regressor(path: &GPath, k: usize, intercept: bool, out: &mut [f64]) {
    let off = usize::from(intercept);
    if intercept {
        out[0] = 1.0;
    }
    for i in 0..path.p() {
        out[off + i] = path.g[(k, i)];
    }
}

fn gram_checked(m: &DMatrix<f64>) -> Result<()> {
    if sym_rcond(m) < RCOND_TOL {
        return Err(Error::SingularLimitGram);
    }
    Ok(())
}

/// Evaluates the sheet functionals for a given `G` path whose error
/// increments have variance `sigma_u2 ds`.
pub fn draw_sheet_functionals(
    path: &GPath,
    grid: &LambdaGrid,
    intercept: bool,
    route: SheetRoute,
    sigma_u2: f64,
    key: StreamKey,
) -> Result<SheetDraw> {
    let su = sigma_u2.sqrt();
    let n = path.steps();
    let ds = 1.0 / n as f64;
    let p = path.p();
    let m = p + usize::from(intercept);
    let widths = grid.widths();
    let bins = widths.len();

    let mut h = vec![0.0; m];
    let mut gram = DMatrix::zeros(m, m);
    // Pooled regression pieces on G alone.
    let mut g_sum = DVector::zeros(p);
    let mut g_dw = DVector::zeros(p);
    let mut w1 = 0.0;
    for k in 0..n {
        regressor(path, k, intercept, &mut h);
        for a in 0..m {
            for b in 0..m {
                gram[(a, b)] += h[a] * h[b] * ds;
            }
        }
        let dw = path.increments.dw(k);
        w1 += dw;
        for i in 0..p {
            g_sum[i] += path.g[(k, i)] * ds;
            g_dw[i] += path.g[(k, i)] * dw;
        }
    }
    gram_checked(&gram)?;

    // Bin integrals of h against the sheet, and W(1, .) per bin.
    let mut bin_int = vec![DVector::<f64>::zeros(m); bins];
    let mut bin_w = vec![0.0; bins];
    let mut normals = key.child(TAG_SHEET).normals(bins.max(m));
    match route {
        SheetRoute::Aggregated => {
            let chol = gram.clone().cholesky().ok_or(Error::SingularLimitGram)?;
            let l = chol.l();
            let mut xi = vec![0.0; bins.max(m)];
            for b in 0..bins {
                normals.row(b as u64, &mut xi);
                let z = DVector::from_column_slice(&xi[..m]);
                bin_int[b] = (&l * z) * (widths[b].sqrt() * su);
            }
            // W(1, .) bin masses by the same bridge construction.
            let mut zeta = vec![0.0; bins.max(m)];
            normals.row(bins as u64, &mut zeta);
            let zsum: f64 = (0..bins).map(|b| zeta[b] * widths[b].sqrt() * su).sum();
            for b in 0..bins {
                bin_w[b] = widths[b] * w1 + zeta[b] * widths[b].sqrt() * su - widths[b] * zsum;
            }
            // Add the share `w_b int h dW` and remove `w_b sum_b E_b`.
            let total: DVector<f64> = bin_int.iter().fold(DVector::zeros(m), |acc, v| acc + v);
            let mut pooled_h = DVector::zeros(m);
            for k in 0..n {
                regressor(path, k, intercept, &mut h);
                for a in 0..m {
                    pooled_h[a] += h[a] * path.increments.dw(k);
                }
            }
            for b in 0..bins {
                bin_int[b] += (&pooled_h - &total) * widths[b];
            }
        }
        SheetRoute::Lattice => {
            let mut zeta = vec![0.0; bins.max(m)];
            let sds = ds.sqrt() * su;
            for k in 0..n {
                regressor(path, k, intercept, &mut h);
                normals.row(k as u64, &mut zeta);
                let dw = path.increments.dw(k);
                let zsum: f64 = (0..bins).map(|b| zeta[b] * (widths[b]).sqrt() * sds).sum();
                for b in 0..bins {
                    let inc = widths[b] * dw + zeta[b] * widths[b].sqrt() * sds - widths[b] * zsum;
                    bin_w[b] += inc;
                    for a in 0..m {
                        bin_int[b][a] += h[a] * inc;
                    }
                }
            }
        }
    }

    let total: DVector<f64> = bin_int.iter().fold(DVector::zeros(m), |acc, v| acc + v);
    let mut cum = DVector::zeros(m);
    let mut cum_w = 0.0;
    let mut pointwise = Vec::with_capacity(grid.points.len());
    let mut sheet_terminal = Vec::with_capacity(grid.points.len());
    for (k, &lam) in grid.points.iter().enumerate() {
        cum += &bin_int[k];
        cum_w += bin_w[k];
        sheet_terminal.push(cum_w);
        let num = &cum - &total * lam;
        let v = &gram * (lam * (1.0 - lam));
        pointwise.push(num.dot(&spd_solve(&v, &num)?).max(0.0) / sigma_u2);
    }
    let sup_linearity = pointwise.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let (mg, tg) = if intercept {
        let mut mg = path.gram();
        mg -= &g_sum * g_sum.transpose();
        (mg, &g_dw - &g_sum * w1)
    } else {
        (path.gram(), g_dw)
    };
    gram_checked(&mg)?;
    let pooled = tg.dot(&spd_solve(&mg, &tg)?).max(0.0) / sigma_u2;

    Ok(SheetDraw {
        lambdas: grid.points.clone(),
        pointwise,
        sup_linearity,
        pooled,
        sheet_terminal,
    })
}

/// One draw with a fresh `G` path; a singular mesh Gram is resampled once.
fn draw_once(spec: &OlsLimitSpec, mesh: &MeshSpec, key: StreamKey) -> Result<SheetDraw> {
    let grid = LambdaGrid::new(spec.trimming, spec.lambda_points)?;
    let mut last = Error::SingularLimitGram;
    for attempt in 0..2u64 {
        let k = key.child(attempt);
        let inc = draw_increments(&spec.cov, mesh.steps, k.child(TAG_PATH))?;
        let path = g_path_from_increments(&spec.c, &spec.phi, &inc)?;
        match draw_sheet_functionals(
            &path,
            &grid,
            spec.intercept,
            spec.route,
            spec.cov.sigma_y,
            k,
        ) {
            Err(Error::SingularLimitGram) => last = Error::SingularLimitGram,
            other => return other,
        }
    }
    Err(last)
}

/// Draw of the sup-Wald OLS limit under no threshold effect.
pub fn draw_ols_h1_limit(spec: &OlsLimitSpec, mesh: &MeshSpec, key: StreamKey) -> Result<f64> {
    Ok(draw_once(spec, mesh, key)?.sup_linearity)
}

/// Draw of the sup-Wald OLS limit under no threshold effect and no
/// predictability.
pub fn draw_ols_h2_limit(spec: &OlsLimitSpec, mesh: &MeshSpec, key: StreamKey) -> Result<f64> {
    Ok(draw_once(spec, mesh, key)?.sup_joint())
}
