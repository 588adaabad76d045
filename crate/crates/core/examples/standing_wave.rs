//! Standing acoustic wave in a slip-wall box, compared with the exact solution
//! `Phi = cos(kx) cos(wt)` after ten periods.

use std::f64::consts::PI;

use lowmach::acoustics::{acoustic_c2, acoustic_energy, acoustic_step, AcousticState};
use lowmach::grid::{BoundaryKind, Grid, ScalarField};
use lowmach::params::SimParams;
use lowmach::spectral::Spectral;

fn main() -> lowmach::Result<()> {
    let eps: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let grid = Grid::new(2, &[48, 32], &[2.0, 1.0], &[BoundaryKind::SlipWall; 2])?;
    let params = SimParams::new(eps, 1.5, 1.0, 1.0)?;
    let sp = Spectral::new(&grid)?;
    let k = [PI, 2.0 * PI];
    let shape = |x: &[f64]| (k[0] * x[0]).cos() * (k[1] * x[1]).cos();
    let omega = k[0].hypot(k[1]) * acoustic_c2(&params).sqrt() / eps;
    let period = 2.0 * PI / omega;

    let mut state = AcousticState { phi: ScalarField::from_fn(&grid, shape), z: grid.zeros(), t: 0.0 };
    let e0 = acoustic_energy(&state, &sp, &params, None)?;
    let steps = 250;
    for _ in 0..steps {
        state = acoustic_step(&state, &sp, &params, 10.0 * period / steps as f64);
    }
    let exact = ScalarField::from_fn(&grid, |x| shape(x) * (omega * state.t).cos());
    let err = state.phi.lin_comb(1.0, &exact, -1.0).max_abs();
    let e1 = acoustic_energy(&state, &sp, &params, None)?;
    println!("eps = {eps}, period = {period:.4e}, max error after 10 periods = {err:.2e}");
    println!("relative energy change = {:.2e}", (e1 - e0) / e0);
    Ok(())
}
