//! Argmax of a two-sided Brownian motion with triangular drift, and the
//! scaled limit law of the threshold estimator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::innovations::CovarianceSpec;
use crate::rng::StreamKey;

use super::gpath::simulate_g_path;
use super::MeshSpec;

const TAG_PATH: u64 = 31;
const TAG_RIGHT: u64 = 32;
const TAG_LEFT: u64 = 33;

/// Truncated mesh for `argmax_r {W(r) - |r|/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxSpec {
    /// Half-width `T` of `[-T, T]`.
    pub truncation: f64,
    /// Mesh points per unit of `r`.
    pub resolution: usize,
}

impl Default for ArgmaxSpec {
    fn default() -> Self {
        Self {
            truncation: 50.0,
            resolution: 100,
        }
    }
}

impl ArgmaxSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation >= 50.0) {
            return Err(Error::InvalidConfig(format!(
                "argmax truncation must be at least 50, got {}",
                self.truncation
            )));
        }
        if self.resolution == 0 {
            return Err(Error::InvalidConfig(
                "argmax resolution must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Independent Brownian motions on each side of zero.
pub fn two_sided_argmax(spec: &ArgmaxSpec, key: StreamKey) -> Result<f64> {
    spec.validate()?;
    let m = (spec.truncation * spec.resolution as f64).round() as usize;
    let h = 1.0 / spec.resolution as f64;
    let sd = h.sqrt();
    let mut best = (0.0, 0i64);
    let mut z = [0.0];
    for (tag, sign) in [(TAG_RIGHT, 1i64), (TAG_LEFT, -1i64)] {
        let mut rows = key.child(tag).normals(1);
        let mut w = 0.0;
        for j in 1..=m {
            rows.row((j - 1) as u64, &mut z);
            w += z[0] * sd;
            let v = w - 0.5 * j as f64 * h;
            if v > best.0 {
                best = (v, sign * j as i64);
            }
        }
    }
    if best.1.unsigned_abs() as usize == m {
        return Err(Error::ArgmaxAtBoundary {
            bound: spec.truncation,
        });
    }
    Ok(best.1 as f64 * h)
}

/// `P(L <= x)` for `L = argmax_r {W(r) - |r|/2}`.
pub fn argmax_cdf(x: f64) -> f64 {
    let norm = Normal::standard();
    let upper = |x: f64| {
        1.0 + (x / (2.0 * std::f64::consts::PI)).sqrt() * (-x / 8.0).exp()
            + 1.5 * x.exp() * norm.cdf(-1.5 * x.sqrt())
            - 0.5 * (x + 5.0) * norm.cdf(-0.5 * x.sqrt())
    };
    if x >= 0.0 {
        upper(x)
    } else {
        1.0 - upper(-x)
    }
}

/// `H * argmax Lambda` with
/// `H = sigma_u^2 / (f(gamma0) delta0' [int G G'] delta0)` from a fresh `G`.
#[allow(clippy::too_many_arguments)]
pub fn draw_threshold_limit(
    c: &[f64],
    phi: &[f64],
    cov: &CovarianceSpec,
    delta0: &[f64],
    f_gamma0: f64,
    sigma_u: f64,
    mesh: &MeshSpec,
    argmax: &ArgmaxSpec,
    key: StreamKey,
) -> Result<f64> {
    if delta0.len() != c.len() {
        return Err(Error::DimensionMismatch("delta0 must have length p".into()));
    }
    if !(f_gamma0 > 0.0) {
        return Err(Error::InvalidConfig(
            "threshold density at gamma0 must be positive".into(),
        ));
    }
    let path = simulate_g_path(c, phi, cov, mesh, key.child(TAG_PATH))?;
    let d = DVector::from_column_slice(delta0);
    let quad = (d.transpose() * path.gram() * &d)[(0, 0)];
    if !(quad > 0.0) {
        return Err(Error::SingularLimitGram);
    }
    let h = sigma_u * sigma_u / (f_gamma0 * quad);
    Ok(h * two_sided_argmax(argmax, key)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn cdf_shape() {
        assert!((argmax_cdf(0.0) - 0.5).abs() < 1e-12);
        assert!(argmax_cdf(20.0) > 0.99);
        assert!((argmax_cdf(-3.0) + argmax_cdf(3.0) - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in -100..=100 {
            let v = argmax_cdf(i as f64 * 0.3);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn draws_follow_known_law() {
        let spec = ArgmaxSpec::default();
        let draws: Vec<f64> = (0..3000)
            .map(|s| two_sided_argmax(&spec, StreamKey::new(s, 0)).unwrap())
            .collect();
        // One-sample KS 1% critical value for n = 3000 is about 0.0298;
        // the mesh biases the argmax slightly toward zero.
        assert!(stats::ks_one_sample(&draws, argmax_cdf) < 0.035);
        let m = stats::mean(&draws);
        let se = (stats::variance(&draws) / 3000.0).sqrt();
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn doubling_delta_quarters_the_scale() {
        let cov = CovarianceSpec::identity(1, 1);
        let mesh = MeshSpec {
            steps: 200,
            reps: 100,
            seed: 0,
        };
        let spec = ArgmaxSpec::default();
        let key = StreamKey::new(5, 0);
        let a = draw_threshold_limit(&[2.0], &[0.25], &cov, &[1.0], 0.4, 1.0, &mesh, &spec, key)
            .unwrap();
        let b = draw_threshold_limit(&[2.0], &[0.25], &cov, &[2.0], 0.4, 1.0, &mesh, &spec, key)
            .unwrap();
        assert!((a / 4.0 - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn short_truncation_rejected() {
        let spec = ArgmaxSpec {
            truncation: 10.0,
            resolution: 10,
        };
        assert!(two_sided_argmax(&spec, StreamKey::new(1, 0)).is_err());
    }
}
