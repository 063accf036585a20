//! IVX slope estimates at a fixed threshold, with and without the
//! instrument correction that uses the observed shocks.

use stur_threshold::dgp::{simulate_threshold_keyed, PersistenceSpec, ThresholdDgpSpec};
use stur_threshold::innovations::CovarianceSpec;
use stur_threshold::ivx::{ivx_fit, Correction, IvxConfig};
use stur_threshold::rng::StreamKey;

fn main() -> stur_threshold::Result<()> {
    let dgp = ThresholdDgpSpec::benchmark(1);
    let sim = simulate_threshold_keyed(
        &dgp,
        &PersistenceSpec::scalar(2.0, 0.5),
        &CovarianceSpec::identity(1, 1).with_cross_xy(-0.9),
        500,
        StreamKey::new(21, 0),
    )?;
    let cfg = IvxConfig::default();
    let correction = Correction::from_path(&sim.path);
    for (label, corr) in [("plain", None), ("corrected", Some(&correction))] {
        let fit = ivx_fit(&sim.sample, dgp.gamma0, &cfg, corr)?;
        println!(
            "{label:>9}: beta1 = {:.4} (se {:.4}), beta2 = {:.4} (se {:.4})",
            fit.beta_ivx[0][0],
            fit.avar[(0, 0)].sqrt(),
            fit.beta_ivx[1][0],
            fit.avar[(1, 1)].sqrt()
        );
    }
    let (lo, hi) = dgp.regime_slopes(500)?;
    println!("     true: beta1 = {:.4}, beta2 = {:.4}", lo[0], hi[0]);
    Ok(())
}
