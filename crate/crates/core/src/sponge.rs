//! Absorbing band next to the walls of a box.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Grid, ScalarField};

/// Band width and peak damping rate of the sponge layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpongeParams {
    pub width: f64,
    pub sigma_max: f64,
}

impl SpongeParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.sigma_max >= 0.0) || !self.sigma_max.is_finite() {
            return Err(Error::InvalidParameter("sponge sigma_max must be finite and >= 0".into()));
        }
        let half = grid.lengths().iter().copied().fold(f64::INFINITY, f64::min) / 2.0;
        if !(self.width > 0.0 && self.width < half) {
            return Err(Error::InvalidParameter(format!("sponge width {} must lie in (0, {half})", self.width)));
        }
        Ok(())
    }
}

/// Damping rate per cell: zero away from the walls, rising as the fourth power
/// of the depth into the band and reaching `sigma_max` at the wall. Only axes of
/// kind `Sponge` carry a band.
pub fn sponge_profile(grid: &Grid, sp: &SpongeParams) -> Result<ScalarField> {
    sp.validate(grid)?;
    let mut out = grid.zeros();
    for lin in 0..grid.len() {
        let x = grid.position(lin);
        let mut depth: f64 = 0.0;
        for a in 0..grid.dim() {
            if grid.boundary()[a] != BoundaryKind::Sponge {
                continue;
            }
            let d = x[a].min(grid.lengths()[a] - x[a]);
            if d < sp.width {
                depth = depth.max((sp.width - d) / sp.width);
            }
        }
        out[lin] = sp.sigma_max * depth.powi(4);
    }
    Ok(out)
}

/// Relaxes `field` toward `target` by the factor `exp(-sigma dt)` per cell.
pub fn relax_toward(field: &mut ScalarField, target: &ScalarField, sigma: &ScalarField, dt: f64) {
    for i in 0..field.len() {
        if sigma[i] > 0.0 {
            let k = (-sigma[i] * dt).exp();
            field[i] = target[i] + k * (field[i] - target[i]);
        }
    }
}
