//! Gaussian acoustic pulse at rest in a box with absorbing bands. Prints the
//! total and inner-box acoustic energy as the pulse leaves the centre.

use lowmach::acoustics::{run_acoustic, AcousticOptions, AcousticState};
use lowmach::grid::{BoundaryKind, Grid, ScalarField, VectorField};
use lowmach::params::SimParams;
use lowmach::sponge::{sponge_profile, SpongeParams};

fn main() -> lowmach::Result<()> {
    let eps = 0.1;
    let grid = Grid::uniform(2, 96, 1.0, BoundaryKind::Sponge)?;
    let params = SimParams::new(eps, 1.5, 1.0, 1.0)?.with_t_end(0.3)?;
    let sigma = sponge_profile(&grid, &SpongeParams { width: 0.2, sigma_max: 40.0 / eps })?;
    let phi = ScalarField::from_fn(&grid, |x| {
        let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
        (-r2 / 0.005).exp()
    });
    let initial = AcousticState { phi, z: grid.zeros(), t: 0.0 };
    let options = AcousticOptions {
        output_times: (0..=6).map(|k| 0.05 * k as f64).collect(),
        sponge: Some(sigma),
        diag_stride: usize::MAX,
        ..Default::default()
    };
    let zero = VectorField::zeros(&grid);
    let run = run_acoustic(initial, grid.zeros(), &grid, &params, &mut |_| Ok(zero.clone()), &options)?;
    println!("{:>6} {:>12} {:>12}", "t", "E total", "E inner");
    for d in &run.diagnostics {
        println!("{:>6.3} {:>12.4e} {:>12.4e}", d.t, d.e_ac_total, d.e_ac_innerbox);
    }
    Ok(())
}
