//! Spectral representation of cell-centred fields: complex Fourier series on
//! fully periodic boxes, cosine series (Neumann eigenfunctions) on fully walled boxes.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Grid, ScalarField, VectorField};

#[derive(Clone)]
enum Basis {
    Fourier { fwd: Vec<Arc<dyn Fft<f64>>>, inv: Vec<Arc<dyn Fft<f64>>> },
    Cosine { plans: Vec<Arc<dyn TransformType2And3<f64>>> },
}

/// Transforms bound to one grid. Coefficients are stored in the same
/// row-major layout as the fields; for cosine series the imaginary parts are zero.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    basis: Basis,
    /// Per axis, the wavenumber of each 1D mode index (Nyquist set to zero).
    k: Vec<Vec<f64>>,
    /// Per mode, the Laplacian eigenvalue `-lambda` with `lambda = |k|^2`.
    lambda: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.basis {
            Basis::Fourier { .. } => "fourier",
            Basis::Cosine { .. } => "cosine",
        };
        f.debug_struct("Spectral").field("basis", &kind).field("n", &self.grid.n()).finish()
    }
}

fn for_each_line<T: Copy + Default>(data: &mut [T], grid: &Grid, axis: usize, mut f: impl FnMut(&mut [T])) {
    let n = grid.n()[axis];
    let stride = grid.strides()[axis];
    let mut hi = grid.n().to_vec();
    hi[axis] = 1;
    let mut line = vec![T::default(); n];
    for start in crate::grid::Region::new(vec![0; grid.dim()], hi).cells(grid) {
        for i in 0..n {
            line[i] = data[start + i * stride];
        }
        f(&mut line);
        for i in 0..n {
            data[start + i * stride] = line[i];
        }
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Result<Self> {
        let dim = grid.dim();
        let (basis, k) = if grid.all_periodic() {
            let mut planner = FftPlanner::new();
            let fwd = grid.n().iter().map(|&n| planner.plan_fft_forward(n)).collect();
            let inv = grid.n().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
            let k: Vec<Vec<f64>> = (0..dim)
                .map(|a| {
                    let n = grid.n()[a];
                    let l = grid.lengths()[a];
                    (0..n)
                        .map(|j| {
                            if 2 * j == n {
                                0.0
                            } else if 2 * j < n {
                                2.0 * std::f64::consts::PI * j as f64 / l
                            } else {
                                2.0 * std::f64::consts::PI * (j as f64 - n as f64) / l
                            }
                        })
                        .collect()
                })
                .collect();
            (Basis::Fourier { fwd, inv }, k)
        } else if grid.boundary().iter().all(|b| *b != BoundaryKind::Periodic) {
            let mut planner = DctPlanner::new();
            let plans = grid.n().iter().map(|&n| planner.plan_dct2(n)).collect();
            let k: Vec<Vec<f64>> = (0..dim)
                .map(|a| {
                    let l = grid.lengths()[a];
                    (0..grid.n()[a]).map(|j| std::f64::consts::PI * j as f64 / l).collect()
                })
                .collect();
            (Basis::Cosine { plans }, k)
        } else {
            return Err(Error::Unsupported("spectral transforms need all axes periodic or all axes walled".into()));
        };
        let mut lambda = vec![0.0; grid.len()];
        for (lin, l) in lambda.iter_mut().enumerate() {
            let idx = grid.multi_index(lin);
            *l = (0..dim).map(|a| k[a][idx[a]] * k[a][idx[a]]).sum();
        }
        Ok(Spectral { grid: grid.clone(), basis, k, lambda })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self.basis, Basis::Fourier { .. })
    }

    /// `|k|^2` per mode, in the coefficient layout.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    pub fn forward(&self, f: &ScalarField) -> Vec<Complex64> {
        match &self.basis {
            Basis::Fourier { fwd, .. } => {
                let mut c: Vec<Complex64> = f.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
                for (a, plan) in fwd.iter().enumerate() {
                    for_each_line(&mut c, &self.grid, a, |line| plan.process(line));
                }
                c
            }
            Basis::Cosine { plans } => {
                let mut r = f.as_slice().to_vec();
                for (a, plan) in plans.iter().enumerate() {
                    for_each_line(&mut r, &self.grid, a, |line| plan.process_dct2(line));
                }
                r.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
            }
        }
    }

    /// Inverse transform; for the cosine basis `sine_axis` selects an axis that
    /// is synthesised with sines (mode `k` maps to `sin(pi k x / L)`), which is how
    /// derivatives along that axis are evaluated.
    fn inverse_mixed(&self, c: &[Complex64], sine_axis: Option<usize>) -> ScalarField {
        match &self.basis {
            Basis::Fourier { inv, .. } => {
                let mut c = c.to_vec();
                for (a, plan) in inv.iter().enumerate() {
                    for_each_line(&mut c, &self.grid, a, |line| plan.process(line));
                }
                let scale = 1.0 / self.grid.len() as f64;
                let data = c.iter().map(|z| z.re * scale).collect();
                ScalarField::from_vec(&self.grid, data).expect("shape")
            }
            Basis::Cosine { plans } => {
                let mut r: Vec<f64> = c.iter().map(|z| z.re).collect();
                for (a, plan) in plans.iter().enumerate() {
                    let n = self.grid.n()[a];
                    let scale = 2.0 / n as f64;
                    if sine_axis == Some(a) {
                        for_each_line(&mut r, &self.grid, a, |line| {
                            // coefficient of sin(pi k x/L), k = 1..n-1, sits at line[k]
                            line.rotate_left(1);
                            line[n - 1] = 0.0;
                            plan.process_dst3(line);
                            for v in line.iter_mut() {
                                *v *= scale;
                            }
                        });
                    } else {
                        for_each_line(&mut r, &self.grid, a, |line| {
                            plan.process_dct3(line);
                            for v in line.iter_mut() {
                                *v *= scale;
                            }
                        });
                    }
                }
                ScalarField::from_vec(&self.grid, r).expect("shape")
            }
        }
    }

    pub fn inverse(&self, c: &[Complex64]) -> ScalarField {
        self.inverse_mixed(c, None)
    }

    /// Multiplies every mode by `mult(|k|)`.
    pub fn filter(&self, f: &ScalarField, mult: impl Fn(f64) -> f64) -> ScalarField {
        let mut c = self.forward(f);
        for (z, l) in c.iter_mut().zip(&self.lambda) {
            *z *= mult(l.sqrt());
        }
        self.inverse(&c)
    }

    /// Gradient of the field whose coefficients are `c`.
    pub fn gradient_coeffs(&self, c: &[Complex64]) -> VectorField {
        let dim = self.grid.dim();
        let comps = (0..dim)
            .map(|a| {
                let mut d = c.to_vec();
                for (lin, z) in d.iter_mut().enumerate() {
                    let j = (lin / self.grid.strides()[a]) % self.grid.n()[a];
                    let k = self.k[a][j];
                    *z = match self.basis {
                        Basis::Fourier { .. } => Complex64::new(0.0, k) * *z,
                        Basis::Cosine { .. } => -k * *z,
                    };
                }
                self.inverse_mixed(&d, Some(a))
            })
            .collect();
        VectorField::from_components(comps).expect("shape")
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        self.gradient_coeffs(&self.forward(f))
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut c = self.forward(f);
        for (z, l) in c.iter_mut().zip(&self.lambda) {
            *z *= -l;
        }
        self.inverse(&c)
    }

    /// Zero-mean solution of `Laplacian phi = g`; modes with `|k| = 0` are dropped.
    pub fn solve_poisson(&self, g: &ScalarField) -> ScalarField {
        let mut c = self.forward(g);
        for (z, &l) in c.iter_mut().zip(&self.lambda) {
            *z = if l > 0.0 { -*z / l } else { Complex64::new(0.0, 0.0) };
        }
        self.inverse(&c)
    }

    /// Spectral divergence; periodic boxes only.
    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        if !self.is_fourier() {
            return Err(Error::Unsupported("spectral divergence needs a periodic box".into()));
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for a in 0..self.grid.dim() {
            let c = self.forward(v.comp(a));
            for (lin, z) in c.iter().enumerate() {
                let j = (lin / self.grid.strides()[a]) % self.grid.n()[a];
                acc[lin] += Complex64::new(0.0, self.k[a][j]) * z;
            }
        }
        Ok(self.inverse(&acc))
    }

    /// Leray projection `v = H v + grad phi` on a periodic box. Returns
    /// `(H v, grad phi, phi)`.
    pub fn project(&self, v: &VectorField) -> Result<(VectorField, VectorField, ScalarField)> {
        if !self.is_fourier() {
            return Err(Error::Unsupported("spectral projection needs a periodic box".into()));
        }
        let dim = self.grid.dim();
        let coeffs: Vec<Vec<Complex64>> = (0..dim).map(|a| self.forward(v.comp(a))).collect();
        let mut phi = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for lin in 0..self.grid.len() {
            let l = self.lambda[lin];
            if l == 0.0 {
                continue;
            }
            let idx = self.grid.multi_index(lin);
            // phi_hat = (i k . v_hat) / (-|k|^2)
            let mut kv = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                kv += Complex64::new(0.0, self.k[a][idx[a]]) * coeffs[a][lin];
            }
            phi[lin] = -kv / l;
        }
        let grad = self.gradient_coeffs(&phi);
        let h = v.lin_comb(1.0, &grad, -1.0);
        Ok((h, grad, self.inverse(&phi)))
    }

    /// Zeroes every mode whose index exceeds a third of the axis length on some
    /// axis (the two-thirds rule); periodic boxes only.
    pub fn dealias(&self, f: &ScalarField) -> ScalarField {
        let mut c = self.forward(f);
        for (lin, z) in c.iter_mut().enumerate() {
            let idx = self.grid.multi_index(lin);
            let cut = idx.iter().zip(self.grid.n()).any(|(&j, &n)| {
                let m = if 2 * j <= n { j } else { n - j };
                3 * m > n
            });
            if cut {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.lin_comb(1.0, b, -1.0).max_abs()
    }

    #[test]
    fn round_trips() {
        for kind in [BoundaryKind::Periodic, BoundaryKind::SlipWall] {
            let grid = Grid::new(2, &[12, 8], &[1.0, 2.0], &[kind; 2]).unwrap();
            let sp = Spectral::new(&grid).unwrap();
            let f = ScalarField::from_fn(&grid, |x| (3.0 * x[0]).exp() * x[1].cos() + x[0] * x[1]);
            assert!(max_diff(&sp.inverse(&sp.forward(&f)), &f) < 1e-12, "{kind}");
        }
    }

    #[test]
    fn fourier_gradient_and_laplacian_exact_on_modes() {
        let grid = Grid::uniform(2, 16, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (2.0 * x[0]).sin() * (3.0 * x[1]).cos());
        let g = sp.gradient(&f);
        let gx = ScalarField::from_fn(&grid, |x| 2.0 * (2.0 * x[0]).cos() * (3.0 * x[1]).cos());
        let gy = ScalarField::from_fn(&grid, |x| -3.0 * (2.0 * x[0]).sin() * (3.0 * x[1]).sin());
        assert!(max_diff(g.comp(0), &gx) < 1e-12);
        assert!(max_diff(g.comp(1), &gy) < 1e-12);
        assert!(max_diff(&sp.laplacian(&f), &f.map(|v| -13.0 * v)) < 1e-11);
    }

    #[test]
    fn cosine_gradient_exact_on_neumann_modes() {
        let grid = Grid::new(2, &[16, 12], &[1.0, 2.0], &[BoundaryKind::SlipWall; 2]).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        let (k1, k2) = (3.0 * PI, 2.0 * PI / 2.0);
        let f = ScalarField::from_fn(&grid, |x| (k1 * x[0]).cos() * (k2 * x[1]).cos() + 0.5);
        let g = sp.gradient(&f);
        let gx = ScalarField::from_fn(&grid, |x| -k1 * (k1 * x[0]).sin() * (k2 * x[1]).cos());
        let gy = ScalarField::from_fn(&grid, |x| -k2 * (k1 * x[0]).cos() * (k2 * x[1]).sin());
        assert!(max_diff(g.comp(0), &gx) < 1e-11);
        assert!(max_diff(g.comp(1), &gy) < 1e-11);
        let lap = sp.laplacian(&f);
        let want = ScalarField::from_fn(&grid, |x| -(k1 * k1 + k2 * k2) * (k1 * x[0]).cos() * (k2 * x[1]).cos());
        assert!(max_diff(&lap, &want) < 1e-10);
    }

    #[test]
    fn poisson_inverts_laplacian_on_zero_mean_fields() {
        for kind in [BoundaryKind::Periodic, BoundaryKind::SlipWall] {
            let grid = Grid::uniform(2, 16, 1.0, kind).unwrap();
            let sp = Spectral::new(&grid).unwrap();
            let f = ScalarField::from_fn(&grid, |x| (x[0] - 0.3).powi(2) * (2.0 * PI * x[1]).cos());
            let mean = f.as_slice().iter().sum::<f64>() / f.len() as f64;
            let f = f.map(|v| v - mean);
            let phi = sp.solve_poisson(&sp.laplacian(&f));
            // recovered up to modes the Laplacian annihilates
            let back = sp.laplacian(&phi);
            assert!(max_diff(&back, &sp.laplacian(&f)) < 1e-9, "{kind}");
        }
    }

    #[test]
    fn projection_removes_gradients_and_keeps_curls() {
        let grid = Grid::uniform(2, 32, 1.0, BoundaryKind::Periodic).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        let tp = 2.0 * PI;
        let grad = VectorField::from_fn(&grid, |x| {
            vec![tp * (tp * x[0]).cos() * (tp * x[1]).sin(), tp * (tp * x[0]).sin() * (tp * x[1]).cos()]
        });
        let (h, _, _) = sp.project(&grad).unwrap();
        assert!(h.max_abs() < 1e-10);

        // curl of psi = sin(2 pi x) sin(4 pi y)
        let curl = VectorField::from_fn(&grid, |x| {
            vec![
                -2.0 * tp * (tp * x[0]).sin() * (2.0 * tp * x[1]).cos(),
                tp * (tp * x[0]).cos() * (2.0 * tp * x[1]).sin(),
            ]
        });
        let (h, _, _) = sp.project(&curl).unwrap();
        assert!(h.lin_comb(1.0, &curl, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn mixed_boundaries_rejected() {
        let grid = Grid::new(2, &[8, 8], &[1.0, 1.0], &[BoundaryKind::Periodic, BoundaryKind::SlipWall]).unwrap();
        assert!(Spectral::new(&grid).is_err());
    }
}
