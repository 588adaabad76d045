//! Explicit finite-volume solver for the scaled compressible Euler system with
//! a potential force, Mach number `epsilon` and Froude number `sqrt(epsilon)`.

mod flux;
mod solver;

pub use flux::{gravity_source, numerical_flux, physical_flux, FluxKind, Limiter, Reconstruction, Scheme};
pub use solver::{
    run_euler, stable_dt, step, EnergyDrain, Equilibrium, EulerDiagnostics, EulerHook, EulerOptions, EulerRun,
    HydrostaticSponge,
};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::params::SimParams;
use crate::thermo;

/// Evolved variables: density, momentum and the scaled total energy
/// `|m|^2/(2 rho) + (c_v/epsilon^2) p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    pub rho: ScalarField,
    pub m: VectorField,
    pub e_tot: ScalarField,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveState {
    pub rho: ScalarField,
    pub u: VectorField,
    pub theta: ScalarField,
}

/// Recovers `p = (epsilon^2/c_v)(e_tot - |m|^2/(2 rho))` for one cell.
pub(crate) fn cell_pressure(rho: f64, m: &[f64], e_tot: f64, params: &SimParams) -> f64 {
    let ke: f64 = 0.5 * m.iter().map(|v| v * v).sum::<f64>() / rho;
    params.epsilon * params.epsilon / params.c_v * (e_tot - ke)
}

impl ConservedState {
    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn momentum_at(&self, lin: usize) -> Vec<f64> {
        self.m.at(lin)
    }

    /// Pressure field; fails on the first cell with `rho <= 0` or `p <= 0`.
    pub fn pressure(&self, params: &SimParams) -> Result<ScalarField> {
        let mut p = self.rho.clone();
        let mut mv = vec![0.0; self.dim()];
        for i in 0..self.len() {
            let rho = self.rho[i];
            for (a, v) in mv.iter_mut().enumerate() {
                *v = self.m.comp(a)[i];
            }
            let pi = cell_pressure(rho, &mv, self.e_tot[i], params);
            if !(rho > 0.0) || !(pi > 0.0) || !pi.is_finite() {
                return Err(Error::InvalidState { cell: i, reason: format!("rho = {rho}, recovered p = {pi}") });
            }
            p[i] = pi;
        }
        Ok(p)
    }

    /// Uniform state `(rho, rho u, theta)`.
    pub fn uniform(grid: &Grid, rho: f64, u: &[f64], theta: f64, params: &SimParams) -> Result<Self> {
        let prim = PrimitiveState {
            rho: ScalarField::constant(grid, rho),
            u: VectorField::from_fn(grid, |_| u.to_vec()),
            theta: ScalarField::constant(grid, theta),
        };
        cons_from_prim(&prim, params)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        grid.check_field(&self.rho)?;
        grid.check_field(&self.e_tot)?;
        if self.m.dim() != grid.dim() {
            return Err(Error::ShapeMismatch("momentum has the wrong number of components".into()));
        }
        for c in self.m.components() {
            grid.check_field(c)?;
        }
        Ok(())
    }
}

pub fn cons_from_prim(prim: &PrimitiveState, params: &SimParams) -> Result<ConservedState> {
    let n = prim.rho.len();
    let dim = prim.u.dim();
    let mut m = prim.u.clone();
    let mut e_tot = prim.rho.clone();
    let scale = params.c_v / (params.epsilon * params.epsilon);
    for i in 0..n {
        let rho = prim.rho[i];
        let theta = prim.theta[i];
        if !(rho > 0.0) || !(theta > 0.0) {
            return Err(Error::InvalidState { cell: i, reason: format!("rho = {rho}, theta = {theta}") });
        }
        let mut u2 = 0.0;
        for a in 0..dim {
            let u = prim.u.comp(a)[i];
            m.comp_mut(a)[i] = rho * u;
            u2 += u * u;
        }
        e_tot[i] = 0.5 * rho * u2 + scale * rho * theta;
    }
    Ok(ConservedState { rho: prim.rho.clone(), m, e_tot, t: 0.0 })
}

pub fn prim_from_cons(cons: &ConservedState, params: &SimParams) -> Result<PrimitiveState> {
    let p = cons.pressure(params)?;
    let mut u = cons.m.clone();
    for a in 0..cons.dim() {
        let c = u.comp_mut(a);
        for i in 0..c.len() {
            c[i] /= cons.rho[i];
        }
    }
    let theta = p.zip_map(&cons.rho, |p, r| p / r);
    Ok(PrimitiveState { rho: cons.rho.clone(), u, theta })
}

/// Pointwise entropy `s(rho, p)` of a state.
pub fn entropy_field(cons: &ConservedState, params: &SimParams) -> Result<ScalarField> {
    let p = cons.pressure(params)?;
    Ok(cons.rho.zip_map(&p, |r, p| thermo::entropy(r, p, params.c_v)))
}
