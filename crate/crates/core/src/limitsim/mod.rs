//! Simulation of the limiting functionals of the threshold tests and the
//! threshold estimator, and critical-value tabulation.

mod argmax;
mod gpath;
mod pivotal;
mod sheet;
mod table;

pub use argmax::{argmax_cdf, draw_threshold_limit, two_sided_argmax, ArgmaxSpec};
pub use gpath::{draw_increments, g_path_from_increments, simulate_g_path, GPath, Increments};
pub use pivotal::draw_ivx_h2_limit;
pub use sheet::{
    draw_ols_h1_limit, draw_ols_h2_limit, draw_sheet_functionals, LambdaGrid, OlsLimitSpec,
    SheetDraw, SheetRoute,
};
pub use table::{
    draw_functional, tabulate_critical_values, CriticalValueTable, Functional, TableParams,
    DEFAULT_LEVELS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of `[0, 1]` and Monte Carlo size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            steps: 2000,
            reps: 2000,
            seed: 0,
        }
    }
}

impl MeshSpec {
    pub fn new(steps: usize, reps: usize, seed: u64) -> Result<Self> {
        let m = Self { steps, reps, seed };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 100 {
            return Err(Error::InvalidConfig(format!(
                "mesh needs at least 100 steps, got {}",
                self.steps
            )));
        }
        if self.reps < 100 {
            return Err(Error::InvalidConfig(format!(
                "mesh needs at least 100 replications, got {}",
                self.reps
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_trimming(trimming: (f64, f64)) -> Result<()> {
    let (a, b) = trimming;
    if !(0.0 < a && a <= b && b < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "trimming must satisfy 0 < pi1 <= pi2 < 1, got [{a}, {b}]"
        )));
    }
    Ok(())
}
