//! Taylor-Green vortex for the Euler-Boussinesq system. The steady vortex should
//! be preserved to round-off by the spectral projection.

use std::f64::consts::PI;

use lowmach::boussinesq::{run_eb, BoussinesqState, EbOptions};
use lowmach::grid::{vector_l2, BoundaryKind, Grid, VectorField};
use lowmach::params::SimParams;
use lowmach::potential::PotentialSpec;

fn main() -> lowmach::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let grid = Grid::uniform(2, n, 1.0, BoundaryKind::Periodic)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?.with_t_end(1.0)?;
    let tp = 2.0 * PI;
    let u = VectorField::from_fn(&grid, |x| {
        vec![(tp * x[0]).sin() * (tp * x[1]).cos(), -(tp * x[0]).cos() * (tp * x[1]).sin()]
    });
    let initial = BoussinesqState::new(u.clone(), grid.zeros(), &grid.zeros(), &params, 0.0);
    let run = run_eb(initial, &grid, &params, &PotentialSpec::Zero, &EbOptions::default())?;
    let drift = vector_l2(&run.final_state.u.lin_comb(1.0, &u, -1.0), &grid, None)?;
    println!("n = {n}, steps = {}, L2 velocity drift at t = 1: {drift:.3e}", run.steps);
    Ok(())
}
