//! Draws one sample from the benchmark threshold design and prints the
//! first few observations.

use stur_threshold::dgp::{simulate_threshold_keyed, PersistenceSpec, ThresholdDgpSpec};
use stur_threshold::innovations::CovarianceSpec;
use stur_threshold::rng::StreamKey;

fn main() -> stur_threshold::Result<()> {
    let sim = simulate_threshold_keyed(
        &ThresholdDgpSpec::benchmark(1),
        &PersistenceSpec::scalar(2.0, 0.25),
        &CovarianceSpec::identity(1, 1).with_cross_xy(-0.5),
        250,
        StreamKey::new(7, 0),
    )?;
    println!(
        "{:>4} {:>10} {:>10} {:>10}",
        "t", "y_t", "x_{t-1}", "q_{t-1}"
    );
    for t in 0..8 {
        println!(
            "{:>4} {:>10.4} {:>10.4} {:>10.4}",
            t + 1,
            sim.sample.y[t],
            sim.sample.x_lag[(t, 0)],
            sim.sample.q_lag[t]
        );
    }
    println!("regressor ends at x_n = {:.4}", sim.path.x[(250, 0)]);
    Ok(())
}
