//! Stochastic local-unit-root regressors and threshold predictive regression samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::innovations::{draw_innovations_keyed, CovarianceSpec, InnovationPanel};
use crate::rng::StreamKey;

const TAG_INNOVATIONS: u64 = 1;
const TAG_THRESHOLD: u64 = 2;

/// Magnitude beyond which a regressor path is reported as overflowing.
const OVERFLOW_BOUND: f64 = 1e150;

/// How the period-`t` autoregressive coefficient is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientForm {
    /// `exp{c/n + phi'u_phi/sqrt(n)}`.
    #[default]
    ExactExponential,
    /// `(1 + c/n) + phi'u_phi/sqrt(n) + (phi'u_phi)^2/(2n)`.
    ExpandedQuadratic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `x_0 = 0`, equivalently `x_1 = u_{x1}`.
    #[default]
    Zero,
    /// User supplied `x_0`.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceSpec {
    /// Localizing coefficients, one per regressor.
    pub c: Vec<f64>,
    /// Loadings on the exogenous shocks `u_phi`.
    pub phi: Vec<f64>,
    #[serde(default)]
    pub form: CoefficientForm,
    #[serde(default)]
    pub initial: InitialCondition,
}

impl PersistenceSpec {
    pub fn new(c: Vec<f64>, phi: Vec<f64>) -> Self {
        Self {
            c,
            phi,
            form: CoefficientForm::default(),
            initial: InitialCondition::default(),
        }
    }

    /// Scalar regressor with a scalar shock loading.
    pub fn scalar(c: f64, phi: f64) -> Self {
        Self::new(vec![c], vec![phi])
    }

    pub fn with_form(mut self, form: CoefficientForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    pub fn p(&self) -> usize {
        self.c.len()
    }

    /// Coefficient of regressor `i` given the shock index `s = phi'u_phi`.
    #[inline]
    pub fn coefficient(&self, i: usize, s: f64, n: usize) -> f64 {
        let nf = n as f64;
        match self.form {
            CoefficientForm::ExactExponential => (self.c[i] / nf + s / nf.sqrt()).exp(),
            CoefficientForm::ExpandedQuadratic => {
                (1.0 + self.c[i] / nf) + s / nf.sqrt() + s * s / (2.0 * nf)
            }
        }
    }
}

/// A simulated regressor path `x_0..x_n` with its realized coefficients.
#[derive(Debug, Clone)]
pub struct RegressorPath {
    /// `(n+1) x p`; row `t` is `x_t`.
    pub x: DMatrix<f64>,
    /// `n x p`; row `t-1` is the coefficient applied at period `t`.
    pub rho: DMatrix<f64>,
    pub spec: PersistenceSpec,
    /// `n x p` innovations used by the recursion.
    pub u_x: DMatrix<f64>,
    /// `n x d` exogenous shocks driving the coefficients.
    pub u_phi: DMatrix<f64>,
}

impl RegressorPath {
    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `x_0..x_{n-1}`, the lagged regressor aligned with `y_1..y_n`.
    pub fn x_lag(&self) -> DMatrix<f64> {
        self.x.rows(0, self.n()).into_owned()
    }

    /// Series `phi'u_phi,t` for `t = 1..n`.
    pub fn shock_index(&self) -> DVector<f64> {
        shock_index(&self.u_phi, &self.spec.phi)
    }

    /// Largest relative discrepancy of `x_t - rho_t x_{t-1} - u_t`.
    pub fn recursion_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 1..=self.n() {
            for i in 0..self.p() {
                let rebuilt = self.rho[(t - 1, i)] * self.x[(t - 1, i)] + self.u_x[(t - 1, i)];
                let scale = self.x[(t, i)].abs().max(1.0);
                worst = worst.max((rebuilt - self.x[(t, i)]).abs() / scale);
            }
        }
        worst
    }
}

fn shock_index(u_phi: &DMatrix<f64>, phi: &[f64]) -> DVector<f64> {
    DVector::from_fn(u_phi.nrows(), |t, _| {
        phi.iter().enumerate().map(|(j, f)| f * u_phi[(t, j)]).sum()
    })
}

/// Runs the recursion `x_t = rho_t * x_{t-1} + u_{xt}` over the first `n`
/// rows of `innovations`.
pub fn gen_regressor_path(
    spec: &PersistenceSpec,
    innovations: &InnovationPanel,
    n: usize,
) -> Result<RegressorPath> {
    let p = spec.p();
    if p == 0 {
        return Err(Error::DimensionMismatch(
            "need at least one regressor".into(),
        ));
    }
    if innovations.p != p {
        return Err(Error::DimensionMismatch(format!(
            "persistence has {p} regressors, innovations have {}",
            innovations.p
        )));
    }
    if spec.phi.len() != innovations.d {
        return Err(Error::DimensionMismatch(format!(
            "phi has length {}, innovations carry {} shocks",
            spec.phi.len(),
            innovations.d
        )));
    }
    if innovations.n < n {
        return Err(Error::DimensionMismatch(format!(
            "path of length {n} needs {n} innovation rows, panel has {}",
            innovations.n
        )));
    }
    if n < 2 {
        return Err(Error::InvalidSampleSize {
            got: n,
            reason: "path needs at least 2 periods",
        });
    }
    let u_x = innovations.draws.view((0, 1), (n, p)).into_owned();
    let u_phi = innovations
        .draws
        .view((0, 1 + p), (n, innovations.d))
        .into_owned();
    let shocks = shock_index(&u_phi, &spec.phi);

    let mut x = DMatrix::zeros(n + 1, p);
    if let InitialCondition::Fixed(x0) = &spec.initial {
        if x0.len() != p {
            return Err(Error::DimensionMismatch(
                "initial value must have length p".into(),
            ));
        }
        for (i, v) in x0.iter().enumerate() {
            x[(0, i)] = *v;
        }
    }
    let mut rho = DMatrix::zeros(n, p);
    for t in 1..=n {
        let s = shocks[t - 1];
        for i in 0..p {
            let r = spec.coefficient(i, s, n);
            rho[(t - 1, i)] = r;
            let v = r * x[(t - 1, i)] + u_x[(t - 1, i)];
            if !v.is_finite() || v.abs() > OVERFLOW_BOUND {
                return Err(Error::OverflowDetected { t });
            }
            x[(t, i)] = v;
        }
    }
    Ok(RegressorPath {
        x,
        rho,
        spec: spec.clone(),
        u_x,
        u_phi,
    })
}

/// Regime slopes of the response equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Slopes {
    /// Fixed slopes for `q <= gamma0` (`beta1`) and `q > gamma0` (`beta2`).
    Regimes { beta1: Vec<f64>, beta2: Vec<f64> },
    /// `beta2 = base`, `beta1 = base + delta0 * n^(-tau)`.
    Diminishing {
        base: Vec<f64>,
        delta0: Vec<f64>,
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdDistribution {
    #[default]
    StandardNormal,
    Uniform,
}

impl ThresholdDistribution {
    pub fn density(self, q: f64) -> f64 {
        match self {
            ThresholdDistribution::StandardNormal => {
                (-0.5 * q * q).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            ThresholdDistribution::Uniform => {
                if (0.0..=1.0).contains(&q) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn from_normal(self, z: f64) -> f64 {
        match self {
            ThresholdDistribution::StandardNormal => z,
            ThresholdDistribution::Uniform => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDgpSpec {
    /// Intercepts `(alpha_1, alpha_2)`.
    pub alpha: [f64; 2],
    pub slopes: Slopes,
    pub gamma0: f64,
    #[serde(default)]
    pub threshold_dist: ThresholdDistribution,
}

impl ThresholdDgpSpec {
    /// Slope `2 / n^0.25` on every regressor when `q <= 0.25`, zero otherwise,
    /// common zero intercept, standard normal threshold variable.
    pub fn benchmark(p: usize) -> Self {
        Self {
            alpha: [0.0, 0.0],
            slopes: Slopes::Diminishing {
                base: vec![0.0; p],
                delta0: vec![2.0; p],
                tau: 0.25,
            },
            gamma0: 0.25,
            threshold_dist: ThresholdDistribution::StandardNormal,
        }
    }

    /// No threshold effect and no predictability.
    pub fn null(p: usize) -> Self {
        Self {
            alpha: [0.0, 0.0],
            slopes: Slopes::Regimes {
                beta1: vec![0.0; p],
                beta2: vec![0.0; p],
            },
            gamma0: 0.25,
            threshold_dist: ThresholdDistribution::StandardNormal,
        }
    }

    pub fn p(&self) -> usize {
        match &self.slopes {
            Slopes::Regimes { beta1, .. } => beta1.len(),
            Slopes::Diminishing { base, .. } => base.len(),
        }
    }

    /// `(beta_1, beta_2)` at sample size `n`.
    pub fn regime_slopes(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.slopes {
            Slopes::Regimes { beta1, beta2 } => {
                if beta1.len() != beta2.len() {
                    return Err(Error::DimensionMismatch(
                        "regime slopes differ in length".into(),
                    ));
                }
                Ok((beta1.clone(), beta2.clone()))
            }
            Slopes::Diminishing { base, delta0, tau } => {
                if base.len() != delta0.len() {
                    return Err(Error::DimensionMismatch(
                        "base slope and delta0 differ in length".into(),
                    ));
                }
                if !(0.0..0.5).contains(tau) {
                    return Err(Error::InvalidConfig(format!(
                        "diminishing rate tau = {tau} must lie in [0, 1/2)"
                    )));
                }
                let scale = (n as f64).powf(-tau);
                let beta1 = base
                    .iter()
                    .zip(delta0)
                    .map(|(b, d)| b + d * scale)
                    .collect();
                Ok((beta1, base.clone()))
            }
        }
    }
}

/// Aligned estimation sample: `y_t`, `x_{t-1}`, `q_{t-1}` for `t = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub y: DVector<f64>,
    /// `n x p`.
    pub x_lag: DMatrix<f64>,
    pub q_lag: DVector<f64>,
    pub has_intercept: bool,
}

impl Sample {
    pub fn new(
        y: DVector<f64>,
        x_lag: DMatrix<f64>,
        q_lag: DVector<f64>,
        has_intercept: bool,
    ) -> Result<Self> {
        let n = y.len();
        if x_lag.nrows() != n || q_lag.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, x_lag {} and q_lag {}",
                x_lag.nrows(),
                q_lag.len()
            )));
        }
        if x_lag.ncols() == 0 {
            return Err(Error::DimensionMismatch("sample has no regressors".into()));
        }
        let finite = y
            .iter()
            .chain(x_lag.iter())
            .chain(q_lag.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(
                "sample contains non-finite values".into(),
            ));
        }
        Ok(Self {
            y,
            x_lag,
            q_lag,
            has_intercept,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x_lag.ncols()
    }

    pub fn scale_y(&self, k: f64) -> Self {
        Self {
            y: &self.y * k,
            ..self.clone()
        }
    }

    pub fn map_q(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            q_lag: self.q_lag.map(f),
            ..self.clone()
        }
    }
}

/// `y_t = alpha_r + beta_r' x_{t-1} + u_t` with regime `r` picked by
/// `q_{t-1} <= gamma0`.
pub fn threshold_response(
    dgp: &ThresholdDgpSpec,
    x_lag: &DMatrix<f64>,
    q_lag: &DVector<f64>,
    u_y: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = x_lag.nrows();
    if q_lag.len() != n || u_y.len() != n {
        return Err(Error::DimensionMismatch(
            "response inputs differ in length".into(),
        ));
    }
    let (b1, b2) = dgp.regime_slopes(n)?;
    if b1.len() != x_lag.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "slopes have length {}, sample has {} regressors",
            b1.len(),
            x_lag.ncols()
        )));
    }
    Ok(DVector::from_fn(n, |t, _| {
        let (a, b) = if q_lag[t] <= dgp.gamma0 {
            (dgp.alpha[0], &b1)
        } else {
            (dgp.alpha[1], &b2)
        };
        a + b
            .iter()
            .enumerate()
            .map(|(i, bi)| bi * x_lag[(t, i)])
            .sum::<f64>()
            + u_y[t]
    }))
}

/// Everything generated for one replication.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub sample: Sample,
    pub path: RegressorPath,
    /// `q_0..q_n`.
    pub q: DVector<f64>,
    /// `y_1..y_n`.
    pub y: DVector<f64>,
}

/// Simulates one replication of the threshold predictive regression.
pub fn simulate_threshold_keyed(
    dgp: &ThresholdDgpSpec,
    pers: &PersistenceSpec,
    cov: &CovarianceSpec,
    n: usize,
    key: StreamKey,
) -> Result<SimulatedSample> {
    if n < 20 {
        return Err(Error::InvalidSampleSize {
            got: n,
            reason: "threshold samples need n >= 20",
        });
    }
    if dgp.p() != pers.p() || cov.p() != pers.p() {
        return Err(Error::DimensionMismatch(format!(
            "slopes have {} regressors, persistence {}, covariance {}",
            dgp.p(),
            pers.p(),
            cov.p()
        )));
    }
    let panel = draw_innovations_keyed(cov, n, key.child(TAG_INNOVATIONS))?;
    let path = gen_regressor_path(pers, &panel, n)?;
    let mut qs = key.child(TAG_THRESHOLD).normals(1);
    let mut z = [0.0];
    let q = DVector::from_fn(n + 1, |t, _| {
        qs.row(t as u64, &mut z);
        dgp.threshold_dist.from_normal(z[0])
    });
    let x_lag = path.x_lag();
    let q_lag = q.rows(0, n).into_owned();
    let u_y = panel.u_y();
    let y = threshold_response(dgp, &x_lag, &q_lag, &u_y)?;
    let sample = Sample::new(y.clone(), x_lag, q_lag, true)?;
    Ok(SimulatedSample { sample, path, q, y })
}

/// One simulated sample keyed by `seed`.
pub fn gen_threshold_sample(
    dgp: &ThresholdDgpSpec,
    pers: &PersistenceSpec,
    cov: &CovarianceSpec,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    Ok(simulate_threshold_keyed(dgp, pers, cov, n, StreamKey::new(seed, 0))?.sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::draw_innovations;

    fn panel(n: usize, seed: u64) -> InnovationPanel {
        draw_innovations(&CovarianceSpec::identity(1, 1), n, seed).unwrap()
    }

    #[test]
    fn unit_root_reduction_is_bit_exact() {
        let pan = panel(300, 5);
        for form in [
            CoefficientForm::ExactExponential,
            CoefficientForm::ExpandedQuadratic,
        ] {
            let path = gen_regressor_path(
                &PersistenceSpec::scalar(0.0, 0.0).with_form(form),
                &pan,
                300,
            )
            .unwrap();
            assert!(path.rho.iter().all(|r| *r == 1.0));
            let mut acc = 0.0;
            for t in 1..=300 {
                acc += pan.draws[(t - 1, 1)];
                assert_eq!(path.x[(t, 0)], acc);
            }
        }
    }

    #[test]
    fn constant_local_to_unity_coefficient() {
        let path =
            gen_regressor_path(&PersistenceSpec::scalar(1.0, 0.0), &panel(250, 1), 250).unwrap();
        let expected = (1.0f64 / 250.0).exp();
        assert!((expected - 1.004_008_0).abs() < 1e-7);
        assert!(path.rho.iter().all(|r| *r == expected));
    }

    #[test]
    fn coefficient_forms_agree_to_second_order() {
        let n = 500;
        let pan = panel(n, 17);
        let exact = gen_regressor_path(&PersistenceSpec::scalar(1.0, 0.25), &pan, n).unwrap();
        let quad = gen_regressor_path(
            &PersistenceSpec::scalar(1.0, 0.25).with_form(CoefficientForm::ExpandedQuadratic),
            &pan,
            n,
        )
        .unwrap();
        let bound = 10.0 * (n as f64).powf(-1.5);
        let worst = (&exact.rho - &quad.rho).amax();
        assert!(worst < bound, "{worst} >= {bound}");
        assert!(worst > 0.0);
    }

    #[test]
    fn recursion_audit() {
        let path =
            gen_regressor_path(&PersistenceSpec::scalar(5.0, 0.5), &panel(400, 3), 400).unwrap();
        assert!(path.recursion_residual() <= 1e-12);
    }

    #[test]
    fn fixed_initial_value() {
        let spec =
            PersistenceSpec::scalar(0.0, 0.0).with_initial(InitialCondition::Fixed(vec![3.0]));
        let pan = panel(10, 0);
        let path = gen_regressor_path(&spec, &pan, 10).unwrap();
        assert_eq!(path.x[(0, 0)], 3.0);
        assert_eq!(path.x[(1, 0)], 3.0 + pan.draws[(0, 1)]);
    }

    #[test]
    fn overflow_is_reported() {
        let pan = panel(400, 2);
        let res = gen_regressor_path(&PersistenceSpec::scalar(200_000.0, 0.0), &pan, 400);
        assert!(matches!(res, Err(Error::OverflowDetected { .. })));
    }

    #[test]
    fn dimension_checks() {
        let pan = panel(10, 0);
        assert!(matches!(
            gen_regressor_path(&PersistenceSpec::new(vec![1.0, 1.0], vec![0.0]), &pan, 10),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            gen_regressor_path(&PersistenceSpec::scalar(1.0, 0.0), &pan, 11),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn benchmark_regime_slope() {
        let (b1, b2) = ThresholdDgpSpec::benchmark(1).regime_slopes(250).unwrap();
        assert!((b1[0] - 0.502_973).abs() < 1e-6);
        assert_eq!(b2[0], 0.0);
    }

    #[test]
    fn noiseless_response_is_exact() {
        let dgp = ThresholdDgpSpec {
            alpha: [0.0, 0.0],
            slopes: Slopes::Regimes {
                beta1: vec![1.0],
                beta2: vec![1.0],
            },
            gamma0: 0.0,
            threshold_dist: ThresholdDistribution::StandardNormal,
        };
        let x = DMatrix::from_fn(30, 1, |t, _| (t as f64).sqrt());
        let q = DVector::from_fn(30, |t, _| (t as f64 * 0.7).sin());
        let y = threshold_response(&dgp, &x, &q, &DVector::zeros(30)).unwrap();
        assert_eq!(y, x.column(0).into_owned());
    }

    #[test]
    fn null_configuration_has_no_threshold_effect() {
        let dgp = ThresholdDgpSpec::null(1);
        let (b1, b2) = dgp.regime_slopes(100).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(dgp.alpha[0], dgp.alpha[1]);
    }

    #[test]
    fn sample_size_precondition() {
        let res = gen_threshold_sample(
            &ThresholdDgpSpec::null(1),
            &PersistenceSpec::scalar(1.0, 0.0),
            &CovarianceSpec::identity(1, 1),
            10,
            0,
        );
        assert!(matches!(res, Err(Error::InvalidSampleSize { .. })));
    }

    #[test]
    fn simulated_sample_alignment() {
        let sim = simulate_threshold_keyed(
            &ThresholdDgpSpec::benchmark(2),
            &PersistenceSpec::new(vec![1.0, 2.0], vec![0.25]),
            &CovarianceSpec::identity(2, 1),
            60,
            StreamKey::new(4, 0),
        )
        .unwrap();
        assert_eq!(sim.sample.n(), 60);
        assert_eq!(sim.sample.p(), 2);
        assert_eq!(sim.sample.x_lag.row(5), sim.path.x.row(5));
        assert_eq!(sim.sample.q_lag[7], sim.q[7]);
        assert_eq!(sim.q.len(), 61);
    }
}
