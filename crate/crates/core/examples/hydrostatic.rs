//! Isothermal hydrostatic equilibrium under an affine potential, slip walls.
//! Prints the L1 drift of density after t_end.

use lowmach::euler_fv::{cons_from_prim, run_euler, EulerOptions, PrimitiveState};
use lowmach::grid::{norm, BoundaryKind, Grid, NormKind, ScalarField, VectorField};
use lowmach::params::SimParams;
use lowmach::potential::{eval_potential, PotentialSpec};

fn main() -> lowmach::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let grid = Grid::uniform(2, n, 1.0, BoundaryKind::SlipWall)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?.with_t_end(1.0)?;
    let potential = PotentialSpec::Affine { gradient: vec![0.0, -1.0], offset: 0.0 };
    let (f, _) = eval_potential(&potential, &grid)?;

    let rho = f.map(|fv| params.rho_bar * (params.epsilon * fv / params.theta_bar).exp());
    let prim = PrimitiveState {
        rho: rho.clone(),
        u: VectorField::zeros(&grid),
        theta: ScalarField::constant(&grid, params.theta_bar),
    };
    let initial = cons_from_prim(&prim, &params)?;
    let start = std::time::Instant::now();
    let run = run_euler(
        initial,
        &grid,
        &params,
        &potential,
        &EulerOptions { diag_stride: 100, ..Default::default() },
        &mut [],
    )?;
    let drift = norm(&run.final_state.rho.lin_comb(1.0, &rho, -1.0), &grid, NormKind::L1, None)?;
    println!(
        "n = {n}, steps = {}, L1 density drift = {drift:.3e}, max |m| = {:.3e}, {:.1?}",
        run.steps,
        run.final_state.m.max_abs(),
        start.elapsed()
    );
    Ok(())
}
