//! OLS and IVX sup-Wald tests of linearity and predictability, with the
//! IVX p-value from the simulated limit.

use stur_threshold::dgp::{gen_threshold_sample, PersistenceSpec, ThresholdDgpSpec};
use stur_threshold::estimate::ThresholdGrid;
use stur_threshold::innovations::CovarianceSpec;
use stur_threshold::ivx::IvxConfig;
use stur_threshold::limitsim::{
    tabulate_critical_values, Functional, MeshSpec, TableParams, DEFAULT_LEVELS,
};
use stur_threshold::wald::{sup_wald, Hypothesis, Method};

fn main() -> stur_threshold::Result<()> {
    let sample = gen_threshold_sample(
        &ThresholdDgpSpec::benchmark(1),
        &PersistenceSpec::scalar(1.0, 0.25),
        &CovarianceSpec::identity(1, 1),
        500,
        3,
    )?;
    let grid = ThresholdGrid::for_sample(&sample, 0.15, 0.85)?;
    let hyp = Hypothesis::JointLinearityPredictability;
    let ols = sup_wald(&sample, &grid, hyp, &Method::Ols)?;
    let ivx = sup_wald(&sample, &grid, hyp, &Method::ivx(IvxConfig::default()))?;

    let table = tabulate_critical_values(
        Functional::SupWaldIvxH2,
        &TableParams::scalar(1.0, 0.25),
        &MeshSpec::new(1000, 2000, 0)?,
        &DEFAULT_LEVELS,
    )?;
    println!(
        "OLS sup-Wald = {:.3} at gamma = {:.3}",
        ols.sup_stat, ols.argmax_gamma
    );
    println!(
        "IVX sup-Wald = {:.3} at gamma = {:.3}, p-value {:.4}, 5% cv {:.3}",
        ivx.sup_stat,
        ivx.argmax_gamma,
        table.pvalue(ivx.sup_stat).unwrap_or(f64::NAN),
        table.critical_value(0.95).unwrap_or(f64::NAN)
    );
    Ok(())
}
