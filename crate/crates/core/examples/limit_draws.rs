//! Draws from the limit laws: the pivotal IVX sup-Wald limit against its
//! chi-square pointwise marginal, and the threshold argmax law against its
//! closed-form distribution function.

use stur_threshold::limitsim::{
    argmax_cdf, draw_ivx_h2_limit, two_sided_argmax, ArgmaxSpec, MeshSpec,
};
use stur_threshold::rng::StreamKey;
use stur_threshold::stats;

fn main() -> stur_threshold::Result<()> {
    let mesh = MeshSpec::new(1000, 2000, 0)?;
    let sup: Vec<f64> = (0..2000)
        .map(|r| draw_ivx_h2_limit((0.15, 0.85), 1, &mesh, StreamKey::new(1, r)))
        .collect::<Result<_, _>>()?;
    println!(
        "IVX sup limit 95% quantile {:.3} (pointwise chi2(2): {:.3})",
        stats::quantile(&sup, 0.95),
        stats::chi2_quantile(2, 0.95)
    );

    let spec = ArgmaxSpec::default();
    let am: Vec<f64> = (0..2000)
        .map(|r| two_sided_argmax(&spec, StreamKey::new(2, r)))
        .collect::<Result<_, _>>()?;
    println!(
        "argmax law: KS distance to closed form {:.4}, P(L <= 5) = {:.4} vs {:.4}",
        stats::ks_one_sample(&am, argmax_cdf),
        am.iter().filter(|v| **v <= 5.0).count() as f64 / am.len() as f64,
        argmax_cdf(5.0)
    );
    Ok(())
}
