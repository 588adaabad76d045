//! Ill-prepared singular-limit study on a sponge-layer box.
//!
//! `cargo run --release --example ill_prepared_study -- [config] [n]`

use std::path::PathBuf;

use lowmach::harness::{run_limit_study, ExperimentConfig};

fn main() -> lowmach::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "crates/core/examples/configs/ill_prepared.ini".into());
    let mut cfg = ExperimentConfig::load(path.as_ref())?;
    if let Some(n) = args.next() {
        let n: usize = n.parse().expect("grid size");
        cfg.grid = lowmach::grid::Grid::new(2, &[n, n], cfg.grid.lengths(), cfg.grid.boundary())?;
    }
    let out = PathBuf::from(&cfg.out_dir);
    let report = run_limit_study(&cfg, &out, false)?;
    for c in &report.ill {
        println!(
            "eps {:<6} eta {:<6} sup E corrected {:.3e} uncorrected {:.3e} ratio {:.2} inner decay {:.2}",
            c.epsilon,
            c.eta,
            c.sup_corrected,
            c.sup_uncorrected,
            c.ratio(),
            c.inner_decay
        );
    }
    for f in &report.fits {
        println!("{:<10} {:?} monotone {} min reduction {:.2}", f.metric, f.values, f.monotone(), f.min_reduction());
    }
    for f in &report.failures {
        println!("eps {} failed: {}", f.epsilon, f.message);
    }
    Ok(())
}
