//! Nonlinear least-squares fit of the persistence parameters `(c, phi)`.

use stur_threshold::dgp::{gen_regressor_path, PersistenceSpec};
use stur_threshold::innovations::{draw_innovations, CovarianceSpec};
use stur_threshold::persistence::{fit_persistence, Bounds, FitOptions, PersistenceData};

fn main() -> stur_threshold::Result<()> {
    let n = 1000;
    let truth = PersistenceSpec::scalar(3.0, 0.5);
    let panel = draw_innovations(&CovarianceSpec::identity(1, 1), n, 5)?;
    let path = gen_regressor_path(&truth, &panel, n)?;
    let data = PersistenceData::from_path(&path, 0)?;
    let fit = fit_persistence(
        &data,
        (0.0, &[0.0]),
        &Bounds::default(),
        &FitOptions::default(),
    )?
    .require_converged()?;
    println!("true   c = 3.0000, phi = 0.5000");
    println!(
        "fitted c = {:.4}, phi = {:.4} after {} iterations",
        fit.c_hat, fit.phi_hat[0], fit.iterations
    );
    Ok(())
}
