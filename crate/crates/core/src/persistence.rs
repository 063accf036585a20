//! Nonlinear least-squares estimation of the persistence pair `(c, phi)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::RegressorPath;
use crate::error::{Error, Result};

/// One regressor series with the exogenous shocks driving its coefficient.
#[derive(Debug, Clone)]
pub struct PersistenceData {
    /// `x_0..x_n`.
    pub x: DVector<f64>,
    /// `n x d`; row `t-1` is `u_phi,t`.
    pub u_phi: DMatrix<f64>,
}

impl PersistenceData {
    pub fn new(x: DVector<f64>, u_phi: DMatrix<f64>) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::InvalidSampleSize {
                got: x.len().saturating_sub(1),
                reason: "persistence fit needs at least 2 transitions",
            });
        }
        if u_phi.nrows() != x.len() - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} transitions but {} exogenous rows",
                x.len() - 1,
                u_phi.nrows()
            )));
        }
        Ok(Self { x, u_phi })
    }

    /// Regressor `i` of a simulated path.
    pub fn from_path(path: &RegressorPath, i: usize) -> Result<Self> {
        if i >= path.p() {
            return Err(Error::DimensionMismatch(format!(
                "regressor {i} requested from a path with {}",
                path.p()
            )));
        }
        Self::new(path.x.column(i).into_owned(), path.u_phi.clone())
    }

    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn d(&self) -> usize {
        self.u_phi.ncols()
    }

    fn check_phi(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "phi has length {}, data carry {} shocks",
                phi.len(),
                self.d()
            )));
        }
        Ok(())
    }

    #[inline]
    fn log_rho(&self, t: usize, c: f64, phi: &[f64]) -> f64 {
        let nf = self.n() as f64;
        let s: f64 = phi
            .iter()
            .enumerate()
            .map(|(j, f)| f * self.u_phi[(t, j)])
            .sum();
        c / nf + s / nf.sqrt()
    }
}

/// `sum_t (x_t - exp{c/n + phi'u_phi,t/sqrt(n)} x_{t-1})^2`.
pub fn nlls_objective(data: &PersistenceData, c: f64, phi: &[f64]) -> Result<f64> {
    data.check_phi(phi)?;
    let mut f = 0.0;
    for t in 0..data.n() {
        let r = data.x[t + 1] - data.log_rho(t, c, phi).exp() * data.x[t];
        f += r * r;
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub c: (f64, f64),
    pub phi: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            c: (-20.0, 20.0),
            phi: (-2.0, 2.0),
        }
    }
}

impl Bounds {
    fn interval(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            self.c
        } else {
            self.phi
        }
    }

    fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().enumerate().all(|(k, v)| {
            let (lo, hi) = self.interval(k);
            (lo..=hi).contains(v)
        })
    }

    fn project(&self, theta: &mut [f64]) {
        for (k, v) in theta.iter_mut().enumerate() {
            let (lo, hi) = self.interval(k);
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stationarity tolerance on the cosine between residuals and each
    /// free Jacobian column.
    pub gradient_tol: f64,
    /// Coarse lattice points per coordinate for the fallback search.
    pub fallback_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-9,
            fallback_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceFit {
    pub c_hat: f64,
    pub phi_hat: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub used_fallback: bool,
    /// Objective after every accepted step, starting at the initial point.
    pub trace: Vec<f64>,
}

impl PersistenceFit {
    /// `MaxIterationsExceeded` unless the fit converged.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterationsExceeded {
                iterations: self.iterations,
            })
        }
    }
}

struct Linearization {
    f: f64,
    /// `J'r` with `r_t = x_t - rho_t x_{t-1}`.
    g: DVector<f64>,
    h: DMatrix<f64>,
}

fn linearize(data: &PersistenceData, theta: &[f64]) -> Linearization {
    let n = data.n();
    let k = theta.len();
    let nf = n as f64;
    let sn = nf.sqrt();
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    let mut f = 0.0;
    let mut jrow = vec![0.0; k];
    for t in 0..n {
        let m = data.log_rho(t, theta[0], &theta[1..]).exp() * data.x[t];
        let r = data.x[t + 1] - m;
        f += r * r;
        jrow[0] = -m / nf;
        for j in 1..k {
            jrow[j] = -m * data.u_phi[(t, j - 1)] / sn;
        }
        for a in 0..k {
            g[a] += jrow[a] * r;
            for b in 0..=a {
                h[(a, b)] += jrow[a] * jrow[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    Linearization { f, g, h }
}

fn objective_at(data: &PersistenceData, theta: &[f64]) -> f64 {
    nlls_objective(data, theta[0], &theta[1..]).expect("dimensions checked by caller")
}

/// Coordinates whose descent direction is not blocked by the box.
fn free_mask(theta: &[f64], g: &DVector<f64>, bounds: &Bounds) -> Vec<bool> {
    theta
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (lo, hi) = bounds.interval(k);
            // Descent moves along -g.
            !((*v <= lo && g[k] > 0.0) || (*v >= hi && g[k] < 0.0))
        })
        .collect()
}

/// First-order stationarity on the free coordinates: either every residual
/// cosine is below `tol`, or the Gauss-Newton model predicts no reduction
/// resolvable in double precision.
fn stationary(lin: &Linearization, free: &[bool], tol: f64, scale: f64) -> bool {
    if lin.f <= 1e-28 * scale {
        return true;
    }
    let rn = lin.f.sqrt();
    let cosines = (0..free.len()).all(|k| {
        if !free[k] {
            return true;
        }
        let jn = lin.h[(k, k)].sqrt();
        jn == 0.0 || lin.g[k].abs() / (jn * rn) <= tol
    });
    if cosines {
        return true;
    }
    let idx: Vec<usize> = (0..free.len()).filter(|k| free[*k]).collect();
    let h = DMatrix::from_fn(idx.len(), idx.len(), |a, b| lin.h[(idx[a], idx[b])]);
    let g = DVector::from_fn(idx.len(), |a, _| lin.g[idx[a]]);
    match h.cholesky() {
        Some(ch) => 0.5 * g.dot(&ch.solve(&g)) <= 1e-14 * lin.f,
        None => false,
    }
}

struct Descent {
    theta: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Projected Levenberg-Marquardt iterations from `theta`.
fn descend(
    data: &PersistenceData,
    mut theta: Vec<f64>,
    bounds: &Bounds,
    opts: &FitOptions,
) -> Descent {
    let k = theta.len();
    let scale = data.x.norm_squared().max(f64::MIN_POSITIVE);
    let mut lin = linearize(data, &theta);
    let mut trace = vec![lin.f];
    let mut mu = 1e-6;
    let mut iterations = 0;
    loop {
        let free = free_mask(&theta, &lin.g, bounds);
        if stationary(&lin, &free, opts.gradient_tol, scale) {
            return Descent {
                theta,
                f: lin.f,
                iterations,
                converged: true,
                trace,
            };
        }
        if iterations >= opts.max_iterations {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = DMatrix::zeros(k, k);
            let mut b = DVector::zeros(k);
            for i in 0..k {
                if !free[i] {
                    a[(i, i)] = 1.0;
                    continue;
                }
                b[i] = -lin.g[i];
                for j in 0..k {
                    if free[j] {
                        a[(i, j)] = lin.h[(i, j)];
                    }
                }
                a[(i, i)] += mu * lin.h[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = a.clone().cholesky().map(|ch| ch.solve(&b)) else {
                mu *= 4.0;
                continue;
            };
            let mut cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            bounds.project(&mut cand);
            let fc = objective_at(data, &cand);
            if fc < lin.f {
                theta = cand;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            if cand == theta {
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        lin = linearize(data, &theta);
        trace.push(lin.f);
    }
    Descent {
        theta,
        f: lin.f,
        iterations,
        converged: false,
        trace,
    }
}

fn lattice_best(data: &PersistenceData, bounds: &Bounds, per_axis: usize) -> Vec<f64> {
    let k = 1 + data.d();
    // Keep the lattice near a few thousand evaluations.
    let per_axis = if k > 2 {
        ((4000f64).powf(1.0 / k as f64).floor() as usize).max(3)
    } else {
        per_axis.max(3)
    };
    let axis = |i: usize, j: usize| {
        let (lo, hi) = bounds.interval(i);
        lo + (hi - lo) * j as f64 / (per_axis - 1) as f64
    };
    let total = per_axis.pow(k as u32);
    let mut best = (f64::INFINITY, vec![0.0; k]);
    let mut theta = vec![0.0; k];
    for idx in 0..total {
        let mut rem = idx;
        for (i, slot) in theta.iter_mut().enumerate() {
            *slot = axis(i, rem % per_axis);
            rem /= per_axis;
        }
        let f = objective_at(data, &theta);
        if f < best.0 {
            best = (f, theta.clone());
        }
    }
    best.1
}

/// Damped Gauss-Newton fit of `(c, phi)` inside `bounds`, restarting from
/// the best point of a coarse lattice when the iterations stall.
pub fn fit_persistence(
    data: &PersistenceData,
    init: (f64, &[f64]),
    bounds: &Bounds,
    opts: &FitOptions,
) -> Result<PersistenceFit> {
    data.check_phi(init.1)?;
    let theta0: Vec<f64> = std::iter::once(init.0)
        .chain(init.1.iter().cloned())
        .collect();
    if !bounds.contains(&theta0) {
        return Err(Error::InvalidConfig(format!(
            "initial point {theta0:?} lies outside the parameter box"
        )));
    }
    let first = descend(data, theta0, bounds, opts);
    let initial_objective = first.trace[0];
    let mut best = first;
    let mut used_fallback = false;
    if !best.converged {
        used_fallback = true;
        let start = lattice_best(data, bounds, opts.fallback_points);
        let second = descend(data, start, bounds, opts);
        if second.f < best.f || (second.converged && second.f <= best.f) {
            let iterations = best.iterations + second.iterations;
            let mut trace = best.trace;
            // Keep the recorded sequence monotone: the restart only enters
            // once it improves on the first run.
            trace.extend(second.trace.iter().cloned().filter(|f| *f < best.f));
            best = Descent {
                iterations,
                trace,
                ..second
            };
        }
    }
    Ok(PersistenceFit {
        c_hat: best.theta[0],
        phi_hat: best.theta[1..].to_vec(),
        objective: best.f,
        initial_objective,
        converged: best.converged,
        iterations: best.iterations,
        used_fallback,
        trace: best.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{gen_regressor_path, PersistenceSpec};
    use crate::innovations::{draw_innovations, CovarianceSpec};

    fn path(c: f64, phi: f64, n: usize, seed: u64) -> PersistenceData {
        let pan = draw_innovations(&CovarianceSpec::identity(1, 1), n, seed).unwrap();
        let p = gen_regressor_path(&PersistenceSpec::scalar(c, phi), &pan, n).unwrap();
        PersistenceData::from_path(&p, 0).unwrap()
    }

    /// `x_t = rho_t x_{t-1}` started at `x_0 = 1`.
    fn noiseless(c: f64, phi: f64, n: usize, seed: u64) -> PersistenceData {
        let pan = draw_innovations(&CovarianceSpec::identity(1, 1), n, seed).unwrap();
        let u = pan.u_phi();
        let nf = n as f64;
        let mut x = DVector::zeros(n + 1);
        x[0] = 1.0;
        for t in 1..=n {
            x[t] = (c / nf + phi * u[(t - 1, 0)] / nf.sqrt()).exp() * x[t - 1];
        }
        PersistenceData::new(x, u).unwrap()
    }

    #[test]
    fn objective_zero_on_noiseless_path() {
        let d = noiseless(2.0, 0.25, 300, 1);
        assert!(nlls_objective(&d, 2.0, &[0.25]).unwrap() < 1e-24);
    }

    #[test]
    fn objective_matches_loop() {
        let d = path(1.5, 0.3, 100, 2);
        let n = 100.0f64;
        let mut f = 0.0;
        for t in 1..=100 {
            let rho = (1.5 / n + 0.3 * d.u_phi[(t - 1, 0)] / n.sqrt()).exp();
            f += (d.x[t] - rho * d.x[t - 1]).powi(2);
        }
        let got = nlls_objective(&d, 1.5, &[0.3]).unwrap();
        assert!((got - f).abs() <= 1e-12 * f);
    }

    #[test]
    fn phi_zero_is_local_unit_root_criterion() {
        let d = path(3.0, 0.0, 80, 3);
        let rho = (3.0f64 / 80.0).exp();
        let f: f64 = (1..=80).map(|t| (d.x[t] - rho * d.x[t - 1]).powi(2)).sum();
        let got = nlls_objective(&d, 3.0, &[0.0]).unwrap();
        assert!((got - f).abs() <= 1e-12 * f);
    }

    #[test]
    fn zero_noise_recovery() {
        let d = noiseless(2.0, 0.25, 400, 4);
        let fit = fit_persistence(
            &d,
            (0.0, &[0.0]),
            &Bounds::default(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!((fit.c_hat - 2.0).abs() < 1e-8, "{}", fit.c_hat);
        assert!((fit.phi_hat[0] - 0.25).abs() < 1e-8, "{}", fit.phi_hat[0]);
    }

    #[test]
    fn start_at_truth_converges_quickly() {
        let d = path(2.0, 0.25, 1000, 5);
        let fit = fit_persistence(
            &d,
            (2.0, &[0.25]),
            &Bounds::default(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 3, "{} iterations", fit.iterations);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.objective <= fit.initial_objective);
    }

    #[test]
    fn wrong_phi_length_is_rejected() {
        let d = path(1.0, 0.1, 50, 6);
        assert!(matches!(
            nlls_objective(&d, 1.0, &[0.1, 0.2]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn init_outside_box_is_rejected() {
        let d = path(1.0, 0.1, 50, 6);
        assert!(fit_persistence(
            &d,
            (30.0, &[0.0]),
            &Bounds::default(),
            &FitOptions::default()
        )
        .is_err());
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let d = path(2.0, 0.25, 500, 7);
        let opts = FitOptions {
            max_iterations: 0,
            ..FitOptions::default()
        };
        let fit = fit_persistence(&d, (-15.0, &[1.5]), &Bounds::default(), &opts).unwrap();
        assert!(!fit.converged);
        assert!(matches!(
            fit.require_converged(),
            Err(Error::MaxIterationsExceeded { .. })
        ));
    }
}
