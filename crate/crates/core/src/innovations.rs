//! Gaussian martingale-difference innovations `(u_y, u_x, u_phi)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Block covariance of the innovation vector.
///
/// The variance blocks are `sigma_y` (scalar), `sigma_xx` (`p x p`) and
/// `sigma_phiphi` (`d x d`). `cross_xy` and `cross_xphi` are the optional
/// off-diagonal blocks; leaving them empty means zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub sigma_y: f64,
    pub sigma_xx: Vec<Vec<f64>>,
    pub sigma_phiphi: Vec<Vec<f64>>,
    #[serde(default)]
    pub cross_xy: Vec<f64>,
    #[serde(default)]
    pub cross_xphi: Vec<Vec<f64>>,
}

impl CovarianceSpec {
    /// Unit variances and no cross-correlation.
    pub fn identity(p: usize, d: usize) -> Self {
        Self {
            sigma_y: 1.0,
            sigma_xx: identity_rows(p),
            sigma_phiphi: identity_rows(d),
            cross_xy: vec![0.0; p],
            cross_xphi: vec![vec![0.0; d]; p],
        }
    }

    /// Same covariance for `u_x` and `u_y` on every regressor.
    pub fn with_cross_xy(mut self, cov: f64) -> Self {
        self.cross_xy = vec![cov; self.p()];
        self
    }

    pub fn p(&self) -> usize {
        self.sigma_xx.len()
    }

    pub fn d(&self) -> usize {
        self.sigma_phiphi.len()
    }

    pub fn dim(&self) -> usize {
        1 + self.p() + self.d()
    }

    fn validate_shapes(&self) -> Result<()> {
        let (p, d) = (self.p(), self.d());
        let square = |m: &[Vec<f64>], k: usize| m.iter().all(|r| r.len() == k);
        if !square(&self.sigma_xx, p) {
            return Err(Error::DimensionMismatch("sigma_xx must be p x p".into()));
        }
        if !square(&self.sigma_phiphi, d) {
            return Err(Error::DimensionMismatch(
                "sigma_phiphi must be d x d".into(),
            ));
        }
        if !self.cross_xy.is_empty() && self.cross_xy.len() != p {
            return Err(Error::DimensionMismatch(
                "cross_xy must have length p".into(),
            ));
        }
        if !self.cross_xphi.is_empty()
            && (self.cross_xphi.len() != p || !square(&self.cross_xphi, d))
        {
            return Err(Error::DimensionMismatch("cross_xphi must be p x d".into()));
        }
        let all = std::iter::once(self.sigma_y)
            .chain(self.sigma_xx.iter().flatten().cloned())
            .chain(self.sigma_phiphi.iter().flatten().cloned())
            .chain(self.cross_xy.iter().cloned())
            .chain(self.cross_xphi.iter().flatten().cloned());
        for v in all {
            if !v.is_finite() {
                return Err(Error::InvalidConfig("non-finite covariance entry".into()));
            }
        }
        Ok(())
    }
}

fn identity_rows(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Full `(1+p+d)` square covariance in the order `(u_y, u_x, u_phi)`.
pub fn assemble_covariance(spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    Ok(assemble_with_factor(spec)?.0)
}

fn assemble_with_factor(spec: &CovarianceSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate_shapes()?;
    let (p, d) = (spec.p(), spec.d());
    let k = 1 + p + d;
    let mut s = DMatrix::zeros(k, k);
    s[(0, 0)] = spec.sigma_y;
    for i in 0..p {
        for j in 0..p {
            s[(1 + i, 1 + j)] = spec.sigma_xx[i][j];
        }
        if let Some(c) = spec.cross_xy.get(i) {
            s[(0, 1 + i)] = *c;
            s[(1 + i, 0)] = *c;
        }
        if let Some(row) = spec.cross_xphi.get(i) {
            for (j, c) in row.iter().enumerate() {
                s[(1 + i, 1 + p + j)] = *c;
                s[(1 + p + j, 1 + i)] = *c;
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            s[(1 + p + i, 1 + p + j)] = spec.sigma_phiphi[i][j];
        }
    }
    if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
        return Err(Error::InvalidConfig(
            "covariance blocks are not symmetric".into(),
        ));
    }
    let chol = s.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok((s, chol.l()))
}

/// `n` rows of innovations, one row per period `t = 1..n`.
#[derive(Debug, Clone)]
pub struct InnovationPanel {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// `n x (1+p+d)`, columns ordered `(u_y, u_x, u_phi)`.
    pub draws: DMatrix<f64>,
    pub key: StreamKey,
}

impl InnovationPanel {
    pub fn u_y(&self) -> DVector<f64> {
        self.draws.column(0).into_owned()
    }

    /// `n x p` regressor innovations.
    pub fn u_x(&self) -> DMatrix<f64> {
        self.draws.columns(1, self.p).into_owned()
    }

    /// `n x d` exogenous persistence shocks.
    pub fn u_phi(&self) -> DMatrix<f64> {
        self.draws.columns(1 + self.p, self.d).into_owned()
    }

    /// Sample covariance of the rows (mean-corrected).
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let n = self.draws.nrows() as f64;
        let means = self.draws.row_mean();
        let mut c = self.draws.clone();
        for mut row in c.row_iter_mut() {
            row -= &means;
        }
        (c.transpose() * c) / (n - 1.0)
    }
}

/// Draws `n` i.i.d. rows with seed `seed` on stream 0.
pub fn draw_innovations(spec: &CovarianceSpec, n: usize, seed: u64) -> Result<InnovationPanel> {
    draw_innovations_keyed(spec, n, StreamKey::new(seed, 0))
}

/// Draws `n` rows from an explicit keystream. Row `t` depends only on
/// `(key, t)`.
pub fn draw_innovations_keyed(
    spec: &CovarianceSpec,
    n: usize,
    key: StreamKey,
) -> Result<InnovationPanel> {
    if n < 2 {
        return Err(Error::InvalidSampleSize {
            got: n,
            reason: "need at least 2 innovation rows",
        });
    }
    let (_, l) = assemble_with_factor(spec)?;
    let k = spec.dim();
    let mut stream = key.normals(k);
    let mut z = vec![0.0; k];
    let mut draws = DMatrix::zeros(n, k);
    for t in 0..n {
        stream.row(t as u64, &mut z);
        for i in 0..k {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += l[(i, j)] * zj;
            }
            draws[(t, i)] = acc;
        }
    }
    Ok(InnovationPanel {
        n,
        p: spec.p(),
        d: spec.d(),
        draws,
        key,
    })
}
