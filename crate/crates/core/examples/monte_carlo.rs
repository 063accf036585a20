//! A small size experiment printed as a markdown table.

use stur_threshold::limitsim::MeshSpec;
use stur_threshold::mc::{run_experiment, summarize, ExperimentKind, ExperimentSpec, ReportFormat};

fn main() -> stur_threshold::Result<()> {
    let mut spec = ExperimentSpec::benchmark(ExperimentKind::Size);
    spec.n_list = vec![200];
    spec.c_list = vec![1.0, 5.0];
    spec.phi_list = vec![0.25];
    spec.reps = 200;
    spec.table_mesh = Some(MeshSpec::new(500, 1000, 0)?);
    let result = run_experiment(&spec)?;
    print!("{}", summarize(&result, ReportFormat::Markdown)?);
    Ok(())
}
