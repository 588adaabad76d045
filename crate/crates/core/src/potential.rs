//! Time-independent potential forces `F` and their analytic gradients.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Grid, ScalarField, VectorField};

/// A point mass located outside the fluid domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub position: Vec<f64>,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    /// `F = g . x + offset`
    Affine {
        gradient: Vec<f64>,
        offset: f64,
    },
    /// `F = A exp(-|x - c|^2 / (2 w^2))`, periodised over neighbouring images on periodic axes.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Newtonian potential of masses lying outside the domain. The kernel is the
    /// free-space Green's function of the grid dimension: `q / |x - y|` in 3D and
    /// `-q ln|x - y|` in 2D, so `F` is harmonic inside the domain either way.
    ExternalMass {
        masses: Vec<PointMass>,
    },
    /// `base - shift`.
    Shifted {
        base: Box<PotentialSpec>,
        shift: f64,
    },
}

impl PotentialSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let dim = grid.dim();
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Affine { gradient, .. } => {
                if gradient.len() != dim {
                    return Err(Error::InvalidPotential("affine gradient has wrong length".into()));
                }
                for (a, g) in gradient.iter().enumerate() {
                    if *g != 0.0 && grid.boundary()[a] == BoundaryKind::Periodic {
                        return Err(Error::InvalidPotential(format!(
                            "affine potential varies along periodic axis {a}"
                        )));
                    }
                }
                Ok(())
            }
            PotentialSpec::GaussianBump { center, width, .. } => {
                if center.len() != dim {
                    return Err(Error::InvalidPotential("gaussian centre has wrong length".into()));
                }
                if !(*width > 0.0) {
                    return Err(Error::InvalidPotential("gaussian width must be positive".into()));
                }
                Ok(())
            }
            PotentialSpec::ExternalMass { masses } => {
                if grid.boundary().iter().any(|b| *b == BoundaryKind::Periodic) {
                    return Err(Error::InvalidPotential("external-mass potential needs a walled domain".into()));
                }
                for (j, m) in masses.iter().enumerate() {
                    if m.position.len() != dim {
                        return Err(Error::InvalidPotential(format!("mass {j} has wrong dimension")));
                    }
                    let inside = m.position.iter().zip(grid.lengths()).all(|(&y, &l)| (0.0..=l).contains(&y));
                    if inside {
                        return Err(Error::InvalidPotential(format!(
                            "mass {j} at {:?} lies inside the fluid domain",
                            m.position
                        )));
                    }
                }
                Ok(())
            }
            PotentialSpec::Shifted { base, shift } => {
                if !shift.is_finite() {
                    return Err(Error::InvalidPotential("shift must be finite".into()));
                }
                base.validate(grid)
            }
        }
    }

    /// The same force with `F` shifted to zero cell-average mean on `grid`.
    pub fn zero_mean(&self, grid: &Grid) -> Result<PotentialSpec> {
        let base = match self {
            PotentialSpec::Shifted { base, .. } => base.as_ref().clone(),
            other => other.clone(),
        };
        let (f, _) = eval_potential(&base, grid)?;
        let shift = f.as_slice().iter().sum::<f64>() / grid.len() as f64;
        Ok(PotentialSpec::Shifted { base: Box::new(base), shift })
    }

    /// Pointwise value and gradient at `x`.
    pub fn eval_point(&self, grid: &Grid, x: &[f64]) -> (f64, Vec<f64>) {
        let dim = x.len();
        match self {
            PotentialSpec::Zero => (0.0, vec![0.0; dim]),
            PotentialSpec::Affine { gradient, offset } => {
                let f = offset + gradient.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>();
                (f, gradient.clone())
            }
            PotentialSpec::GaussianBump { amplitude, center, width } => {
                let w2 = width * width;
                let mut f = 0.0;
                let mut g = vec![0.0; dim];
                for shift in image_shifts(grid) {
                    let d: Vec<f64> = (0..dim).map(|a| x[a] - center[a] - shift[a]).collect();
                    let r2: f64 = d.iter().map(|v| v * v).sum();
                    let val = amplitude * (-0.5 * r2 / w2).exp();
                    f += val;
                    for a in 0..dim {
                        g[a] -= val * d[a] / w2;
                    }
                }
                (f, g)
            }
            PotentialSpec::ExternalMass { masses } => {
                let mut f = 0.0;
                let mut g = vec![0.0; dim];
                for m in masses {
                    let d: Vec<f64> = (0..dim).map(|a| x[a] - m.position[a]).collect();
                    let r2: f64 = d.iter().map(|v| v * v).sum();
                    let r = r2.sqrt();
                    if dim == 3 {
                        f += m.strength / r;
                        for a in 0..dim {
                            g[a] -= m.strength * d[a] / (r2 * r);
                        }
                    } else {
                        f -= m.strength * r.ln();
                        for a in 0..dim {
                            g[a] -= m.strength * d[a] / r2;
                        }
                    }
                }
                (f, g)
            }
            PotentialSpec::Shifted { base, shift } => {
                let (f, g) = base.eval_point(grid, x);
                (f - shift, g)
            }
        }
    }
}

pub(crate) fn image_shifts(grid: &Grid) -> Vec<Vec<f64>> {
    let mut shifts = vec![vec![]];
    for a in 0..grid.dim() {
        let offsets: &[f64] = if grid.boundary()[a] == BoundaryKind::Periodic { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        let l = grid.lengths()[a];
        shifts = shifts
            .into_iter()
            .flat_map(|s| {
                offsets.iter().map(move |o| {
                    let mut t = s.clone();
                    t.push(o * l);
                    t
                })
            })
            .collect();
    }
    shifts
}

/// Samples `F` and its analytic gradient at every cell centre.
pub fn eval_potential(spec: &PotentialSpec, grid: &Grid) -> Result<(ScalarField, VectorField)> {
    spec.validate(grid)?;
    let mut f = grid.zeros();
    let mut grad = VectorField::zeros(grid);
    for lin in 0..grid.len() {
        let (v, g) = spec.eval_point(grid, &grid.position(lin));
        f[lin] = v;
        for (a, ga) in g.into_iter().enumerate() {
            grad.comp_mut(a)[lin] = ga;
        }
    }
    Ok((f, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_affine() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::SlipWall).unwrap();
        let (f, gf) = eval_potential(&PotentialSpec::Zero, &g).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert_eq!(gf.max_abs(), 0.0);

        let spec = PotentialSpec::Affine { gradient: vec![0.5, -2.0], offset: 0.0 };
        let (f, gf) = eval_potential(&spec, &g).unwrap();
        for lin in 0..g.len() {
            let x = g.position(lin);
            assert!((f[lin] - (0.5 * x[0] - 2.0 * x[1])).abs() < 1e-15);
            assert_eq!(gf.at(lin), vec![0.5, -2.0]);
        }
    }

    #[test]
    fn affine_rejected_along_periodic_axis() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
        let spec = PotentialSpec::Affine { gradient: vec![1.0, 0.0], offset: 0.0 };
        assert!(eval_potential(&spec, &g).is_err());
    }

    #[test]
    fn gaussian_gradient_matches_finite_differences() {
        let g = Grid::uniform(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let spec = PotentialSpec::GaussianBump { amplitude: 1.3, center: vec![0.9, 0.4], width: 0.15 };
        let x = [0.05, 0.47];
        let (_, grad) = spec.eval_point(&g, &x);
        let h = 1e-6;
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (spec.eval_point(&g, &xp).0 - spec.eval_point(&g, &xm).0) / (2.0 * h);
            assert!((fd - grad[a]).abs() < 1e-7, "axis {a}: {fd} vs {}", grad[a]);
        }
    }

    #[test]
    fn external_mass_matches_direct_summation() {
        let g = Grid::uniform(3, 8, 1.0, BoundaryKind::SlipWall).unwrap();
        let nearest = [0.0625, 0.5625, 0.5625];
        let d = 0.3;
        let y = vec![nearest[0] - d, nearest[1], nearest[2]];
        let spec = PotentialSpec::ExternalMass { masses: vec![PointMass { position: y.clone(), strength: 1.0 }] };
        let (f, _) = eval_potential(&spec, &g).unwrap();
        assert!((f.max_abs() - 1.0 / d).abs() < 1e-12);
        for lin in 0..g.len() {
            let x = g.position(lin);
            let r = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!((f[lin] - 1.0 / r).abs() < 1e-13);
        }
    }

    #[test]
    fn external_mass_inside_domain_rejected() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::SlipWall).unwrap();
        let spec = PotentialSpec::ExternalMass { masses: vec![PointMass { position: vec![0.5, 0.5], strength: 1.0 }] };
        assert!(eval_potential(&spec, &g).is_err());
    }

    #[test]
    fn zero_mean_shift_keeps_gradient() {
        let g = Grid::uniform(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let base = PotentialSpec::GaussianBump { amplitude: 2.0, center: vec![0.3, 0.6], width: 0.1 };
        let shifted = base.zero_mean(&g).unwrap();
        let (f0, g0) = eval_potential(&base, &g).unwrap();
        let (f1, g1) = eval_potential(&shifted, &g).unwrap();
        assert!(f1.as_slice().iter().sum::<f64>().abs() < 1e-12);
        assert_eq!(g0, g1);
        let d = f0[5] - f1[5];
        assert!(f0.as_slice().iter().zip(f1.as_slice()).all(|(a, b)| (a - b - d).abs() < 1e-14));
        assert_eq!(shifted.zero_mean(&g).unwrap(), shifted);
    }
}
