use rayon::prelude::*;
use stur_threshold::dgp::{gen_regressor_path, PersistenceSpec};
use stur_threshold::innovations::{draw_innovations, CovarianceSpec};
use stur_threshold::persistence::{fit_persistence, Bounds, FitOptions, PersistenceData};
use stur_threshold::stats;

fn data(c: f64, phi: f64, n: usize, seed: u64) -> PersistenceData {
    let panel = draw_innovations(&CovarianceSpec::identity(1, 1), n, seed).unwrap();
    let path = gen_regressor_path(&PersistenceSpec::scalar(c, phi), &panel, n).unwrap();
    PersistenceData::from_path(&path, 0).unwrap()
}

/// Objective written out from scratch for the oracle.
fn objective(d: &PersistenceData, c: f64, phi: f64) -> f64 {
    let n = d.n() as f64;
    (0..d.n())
        .map(|t| {
            let rho = (c / n + phi * d.u_phi[(t, 0)] / n.sqrt()).exp();
            let r = d.x[t + 1] - rho * d.x[t];
            r * r
        })
        .sum()
}

/// Best point of a `k x k` lattice over the default box.
fn grid_search(d: &PersistenceData, k: usize) -> (f64, f64, f64) {
    let b = Bounds::default();
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    (0..k * k)
        .into_par_iter()
        .map(|ij| {
            let (c, phi) = (at(b.c.0, b.c.1, ij / k), at(b.phi.0, b.phi.1, ij % k));
            (c, phi, objective(d, c, phi))
        })
        .reduce(
            || (0.0, 0.0, f64::INFINITY),
            |a, b| if b.2 < a.2 { b } else { a },
        )
}

fn fit(d: &PersistenceData) -> stur_threshold::persistence::PersistenceFit {
    fit_persistence(d, (0.0, &[0.0]), &Bounds::default(), &FitOptions::default()).unwrap()
}

#[test]
fn fit_lies_in_grid_oracle_band() {
    let (c0, phi0, n) = (2.0, 0.25, 2000);
    let runs: Vec<_> = (0..12u64)
        .map(|s| {
            let d = data(c0, phi0, n, 100 + s);
            (grid_search(&d, 200), fit(&d))
        })
        .collect();
    let gc: Vec<f64> = runs.iter().map(|(g, _)| g.0).collect();
    let gp: Vec<f64> = runs.iter().map(|(g, _)| g.1).collect();
    // Lattice spacing plus three dispersion units of the oracle estimates.
    let band_c = 40.0 / 199.0 + 3.0 * stats::variance(&gc).sqrt();
    let band_p = 4.0 / 199.0 + 3.0 * stats::variance(&gp).sqrt();
    for ((gc, gp, gobj), f) in &runs {
        assert!(
            f.objective <= gobj + 1e-6,
            "fit {} above lattice {}",
            f.objective,
            gobj
        );
        assert!(
            (f.c_hat - c0).abs() <= band_c,
            "c_hat {} band {band_c}",
            f.c_hat
        );
        assert!(
            (f.phi_hat[0] - phi0).abs() <= band_p,
            "phi_hat {} band {band_p}",
            f.phi_hat[0]
        );
        assert!((f.c_hat - gc).abs() <= 2.0 * 40.0 / 199.0 + 1e-9 || f.objective < *gobj);
        assert!((f.phi_hat[0] - gp).abs() <= 2.0 * 4.0 / 199.0 + 1e-9 || f.objective < *gobj);
    }
}

#[test]
fn randomized_suite_never_worse_than_lattice() {
    let cases: Vec<(f64, f64, u64)> = (0..50u64)
        .map(|i| {
            let c = -15.0 + 30.0 * ((i * 37) % 50) as f64 / 49.0;
            let phi = -1.5 + 3.0 * ((i * 11) % 50) as f64 / 49.0;
            (c, phi, 9000 + i)
        })
        .collect();
    for (c, phi, seed) in cases {
        let d = data(c, phi, 500, seed);
        let (_, _, g) = grid_search(&d, 200);
        let f = fit(&d);
        assert!(
            f.objective <= g + 1e-6,
            "c={c} phi={phi}: fit {} lattice {g}",
            f.objective
        );
        assert!(f.objective <= f.initial_objective);
        assert!(f.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

/// `c_hat - c` has a nondegenerate limit law, so the bias settles at a
/// nonzero constant as `n` grows instead of vanishing.
#[test]
fn c_hat_bias_settles_with_n() {
    let (c0, phi0, reps) = (2.0, 0.25, 500u64);
    let errors = |n: usize| -> Vec<f64> {
        (0..reps)
            .into_par_iter()
            .map(|b| fit(&data(c0, phi0, n, 50_000 + b)).c_hat - c0)
            .collect()
    };
    let e: Vec<Vec<f64>> = [250, 1000, 4000].into_iter().map(errors).collect();
    let bias: Vec<f64> = e.iter().map(|v| stats::mean(v)).collect();
    let se: Vec<f64> = e
        .iter()
        .map(|v| (stats::variance(v) / reps as f64).sqrt())
        .collect();
    eprintln!("c_hat bias at n = 250, 1000, 4000: {bias:?} (se {se:?})");
    let gap = (bias[2] - bias[1]).abs();
    assert!(
        gap < 3.0 * (se[1].powi(2) + se[2].powi(2)).sqrt(),
        "{bias:?}"
    );
    assert!(bias[2].abs() > 3.0 * se[2], "bias vanished: {bias:?}");
    // Dispersion stays of order one too.
    let iqr: Vec<f64> = e.iter().map(|v| stats::iqr(v)).collect();
    assert!(iqr.iter().all(|q| *q > 0.5), "{iqr:?}");
}
