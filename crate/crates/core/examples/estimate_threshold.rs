//! Least-squares threshold estimate on a simulated sample.

use stur_threshold::dgp::{gen_threshold_sample, PersistenceSpec, ThresholdDgpSpec};
use stur_threshold::estimate::{estimate_threshold, ThresholdGrid};
use stur_threshold::innovations::CovarianceSpec;

fn main() -> stur_threshold::Result<()> {
    let dgp = ThresholdDgpSpec::benchmark(1);
    let sample = gen_threshold_sample(
        &dgp,
        &PersistenceSpec::scalar(1.0, 0.25),
        &CovarianceSpec::identity(1, 1),
        500,
        11,
    )?;
    let grid = ThresholdGrid::for_sample(&sample, 0.15, 0.85)?;
    let fit = estimate_threshold(&sample, &grid)?;
    println!("true gamma  = {:.4}", dgp.gamma0);
    println!("gamma hat   = {:.4}", fit.gamma_hat);
    println!("theta hat   = {:.4?}", fit.theta_hat);
    println!("sigma2 hat  = {:.4}", fit.sigma2_hat);
    println!("regimes     = {:?}", fit.regime_sizes);
    Ok(())
}
