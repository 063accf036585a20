//! Discretized Ornstein-Uhlenbeck process in a random environment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::innovations::{draw_innovations_keyed, CovarianceSpec};
use crate::rng::StreamKey;

use super::MeshSpec;

/// Brownian increments on a uniform mesh of `[0, 1]`, ordered like the
/// innovations `(W_y, B_x, B_phi)`.
#[derive(Debug, Clone)]
pub struct Increments {
    pub steps: usize,
    /// `steps x (1 + p + d)`, each row with covariance `cov / steps`.
    pub d: DMatrix<f64>,
    pub p: usize,
    pub dim_phi: usize,
}

impl Increments {
    pub fn dw(&self, k: usize) -> f64 {
        self.d[(k, 0)]
    }

    /// Sums of `factor` consecutive increments: the same Brownian paths
    /// observed on a coarser mesh.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::InvalidConfig(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        let steps = self.steps / factor;
        let mut d = DMatrix::zeros(steps, self.d.ncols());
        for k in 0..self.steps {
            for j in 0..self.d.ncols() {
                d[(k / factor, j)] += self.d[(k, j)];
            }
        }
        Ok(Self {
            steps,
            d,
            p: self.p,
            dim_phi: self.dim_phi,
        })
    }
}

pub fn draw_increments(cov: &CovarianceSpec, steps: usize, key: StreamKey) -> Result<Increments> {
    let panel = draw_innovations_keyed(cov, steps, key)?;
    let scale = (steps as f64).sqrt().recip();
    Ok(Increments {
        steps,
        d: panel.draws * scale,
        p: panel.p,
        dim_phi: panel.d,
    })
}

/// A path of `G` on the mesh `s_k = k / steps`, `k = 0..steps`.
#[derive(Debug, Clone)]
pub struct GPath {
    /// `(steps + 1) x p`.
    pub g: DMatrix<f64>,
    /// `(steps + 1) x p` exponent `c_i s + phi'B_phi(s)`.
    pub exponent: DMatrix<f64>,
    pub increments: Increments,
}

impl GPath {
    pub fn steps(&self) -> usize {
        self.increments.steps
    }

    pub fn p(&self) -> usize {
        self.g.ncols()
    }

    pub fn terminal(&self) -> DVector<f64> {
        self.g.row(self.steps()).transpose()
    }

    /// Left-point Riemann sum of `G G'` over `[0, 1]`.
    pub fn gram(&self) -> DMatrix<f64> {
        let (n, p) = (self.steps(), self.p());
        let ds = 1.0 / n as f64;
        let mut m = DMatrix::zeros(p, p);
        for k in 0..n {
            for i in 0..p {
                for j in 0..p {
                    m[(i, j)] += self.g[(k, i)] * self.g[(k, j)] * ds;
                }
            }
        }
        m
    }
}

/// `G_i(s) = exp{a_i(s)} sum_{s_j <= s} exp{-a_i(s_j)} dB_x,i(s_j)` with
/// `a_i(s) = c_i s + phi'B_phi(s)`.
///
/// The weight of each increment uses the exponent at the end of its step,
/// which is exactly the product of the autoregressive coefficients of a
/// scaled STUR path with `n = steps`.
pub fn g_path_from_increments(c: &[f64], phi: &[f64], inc: &Increments) -> Result<GPath> {
    let p = c.len();
    if p != inc.p || phi.len() != inc.dim_phi {
        return Err(Error::DimensionMismatch(format!(
            "G path with {p} regressors and {} shocks from increments with {} and {}",
            phi.len(),
            inc.p,
            inc.dim_phi
        )));
    }
    let n = inc.steps;
    let ds = 1.0 / n as f64;
    let mut exponent = DMatrix::zeros(n + 1, p);
    let mut g = DMatrix::zeros(n + 1, p);
    let mut bphi = 0.0;
    let mut integral = vec![0.0; p];
    for k in 1..=n {
        let dphi: f64 = phi
            .iter()
            .enumerate()
            .map(|(j, f)| f * inc.d[(k - 1, 1 + p + j)])
            .sum();
        bphi += dphi;
        for i in 0..p {
            let a = c[i] * (k as f64 * ds) + bphi;
            exponent[(k, i)] = a;
            integral[i] += (-a).exp() * inc.d[(k - 1, 1 + i)];
            g[(k, i)] = a.exp() * integral[i];
        }
    }
    Ok(GPath {
        g,
        exponent,
        increments: inc.clone(),
    })
}

pub fn simulate_g_path(
    c: &[f64],
    phi: &[f64],
    cov: &CovarianceSpec,
    mesh: &MeshSpec,
    key: StreamKey,
) -> Result<GPath> {
    if mesh.steps < 100 {
        return Err(Error::InvalidConfig("mesh needs at least 100 steps".into()));
    }
    let inc = draw_increments(cov, mesh.steps, key)?;
    g_path_from_increments(c, phi, &inc)
}
