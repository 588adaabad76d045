//! Well-prepared singular-limit study: compressible runs at decreasing epsilon
//! against the Euler-Boussinesq limit.
//!
//! `cargo run --release --example well_prepared_study -- [config]`

use std::path::PathBuf;

use lowmach::harness::{run_limit_study, ExperimentConfig};

fn main() -> lowmach::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/examples/configs/well_prepared.ini".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let report = run_limit_study(&cfg, &PathBuf::from(&cfg.out_dir), false)?;
    for f in &report.fits {
        let order = f.fit.as_ref().map_or(f64::NAN, |c| c.order);
        println!(
            "{:<10} {:?} order {order:.3} min reduction {:.2}",
            f.metric,
            f.values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            f.min_reduction()
        );
    }
    for f in &report.failures {
        println!("eps {} failed: {}", f.epsilon, f.message);
    }
    Ok(())
}
