//! Tabulates critical values of the sup-Wald limits and writes one table
//! to a temporary CSV file.

use stur_threshold::limitsim::{
    tabulate_critical_values, Functional, MeshSpec, TableParams, DEFAULT_LEVELS,
};

fn main() -> stur_threshold::Result<()> {
    let mesh = MeshSpec::new(1000, 1000, 1)?;
    let params = TableParams::scalar(2.0, 0.25);
    for f in [
        Functional::SupWaldOlsH1,
        Functional::SupWaldOlsH2,
        Functional::SupWaldIvxH2,
    ] {
        let t = tabulate_critical_values(f, &params, &mesh, &DEFAULT_LEVELS)?;
        let row: Vec<String> = t
            .levels
            .iter()
            .zip(&t.quantiles)
            .zip(&t.quantile_se)
            .map(|((l, q), se)| format!("{l}: {q:.3} ({se:.3})"))
            .collect();
        println!("{:<16} {}", f.as_str(), row.join("  "));
        if f == Functional::SupWaldIvxH2 {
            let path = std::env::temp_dir().join("ivx-critvals.csv");
            t.save_csv(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
