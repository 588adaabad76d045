//! Sampling of configured perturbation shapes and assembly of the initial data
//! for the compressible, limit and acoustic solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::config::{ExperimentConfig, IcMode, Shape};
use crate::acoustics::{prepare_ill_data, IllPreparedData, RegularizationParams};
use crate::boussinesq::{boussinesq_r, BoussinesqState, Projector};
use crate::error::{Error, Result};
use crate::euler_fv::{cons_from_prim, ConservedState, PrimitiveState};
use crate::grid::{compensated_sum, Grid, ScalarField, VectorField};
use crate::params::SimParams;
use crate::potential::{eval_potential, image_shifts, PotentialSpec};

/// Tolerance on the pointwise Boussinesq compatibility of well-prepared data.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

struct Mode {
    k: Vec<f64>,
    amp: f64,
    phase: f64,
}

/// Samples `shape` and its analytic gradient at the cell centres. `salt`
/// separates the random streams of different shapes under one seed.
pub fn sample_shape(shape: &Shape, grid: &Grid, seed: u64, salt: u64) -> (ScalarField, VectorField) {
    let dim = grid.dim();
    let modes = match shape {
        Shape::Random { amplitude, kmax } => random_modes(grid, *amplitude, *kmax, seed, salt),
        Shape::Cosine { amplitude, modes, phase } => vec![Mode {
            k: modes.iter().zip(grid.lengths()).map(|(m, l)| 2.0 * PI * m / l).collect(),
            amp: *amplitude,
            phase: *phase,
        }],
        _ => Vec::new(),
    };
    let mut v = grid.zeros();
    let mut g = VectorField::zeros(grid);
    for lin in 0..grid.len() {
        let x = grid.position(lin);
        let (val, grad) = match shape {
            Shape::Zero => (0.0, vec![0.0; dim]),
            Shape::Constant(c) => (*c, vec![0.0; dim]),
            Shape::Gaussian { amplitude, center, width } => gaussian(grid, &x, *amplitude, center, *width),
            Shape::Cosine { .. } | Shape::Random { .. } => {
                let mut val = 0.0;
                let mut grad = vec![0.0; dim];
                for m in &modes {
                    let arg = m.k.iter().zip(&x).map(|(k, xi)| k * xi).sum::<f64>() + m.phase;
                    let (s, c) = arg.sin_cos();
                    val += m.amp * c;
                    for a in 0..dim {
                        grad[a] -= m.amp * m.k[a] * s;
                    }
                }
                (val, grad)
            }
        };
        v[lin] = val;
        for (a, ga) in grad.into_iter().enumerate() {
            g.comp_mut(a)[lin] = ga;
        }
    }
    (v, g)
}

fn gaussian(grid: &Grid, x: &[f64], amp: f64, center: &[f64], width: f64) -> (f64, Vec<f64>) {
    let dim = x.len();
    let w2 = width * width;
    let mut val = 0.0;
    let mut grad = vec![0.0; dim];
    for shift in image_shifts(grid) {
        let d: Vec<f64> = (0..dim).map(|a| x[a] - center[a] - shift[a]).collect();
        let r2: f64 = d.iter().map(|v| v * v).sum();
        let e = amp * (-0.5 * r2 / w2).exp();
        val += e;
        for a in 0..dim {
            grad[a] -= e * d[a] / w2;
        }
    }
    (val, grad)
}

fn random_modes(grid: &Grid, amplitude: f64, kmax: usize, seed: u64, salt: u64) -> Vec<Mode> {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let span = 2 * kmax + 1;
    let total = span.pow(dim as u32);
    let mut modes = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut k = Vec::with_capacity(dim);
        for a in 0..dim {
            let ka = (c % span) as f64 - kmax as f64;
            c /= span;
            k.push(2.0 * PI * ka / grid.lengths()[a]);
        }
        if k.iter().all(|&v| v == 0.0) {
            continue;
        }
        modes.push(Mode { k, amp: rng.gen_range(-1.0..1.0), phase: rng.gen_range(0.0..2.0 * PI) });
    }
    let norm = (modes.len().max(1) as f64).sqrt();
    for m in &mut modes {
        m.amp *= amplitude / norm;
    }
    modes
}

fn remove_mean(f: &ScalarField) -> ScalarField {
    let m = compensated_sum(f.as_slice().iter().copied()) / f.len() as f64;
    f.map(|v| v - m)
}

/// The `epsilon`-independent part of the initial data.
#[derive(Debug, Clone)]
pub struct InitialData {
    /// The potential actually used, shifted to zero mean when configured.
    pub potential: PotentialSpec,
    pub f: ScalarField,
    pub rho1: ScalarField,
    pub theta1: ScalarField,
    pub u0: VectorField,
    pub eb: BoussinesqState,
}

impl InitialData {
    /// `(rho_bar + eps rho1, u0, theta_bar + eps theta1)` in conserved variables.
    pub fn compressible(&self, params: &SimParams) -> Result<ConservedState> {
        compressible_state(&self.rho1, &self.theta1, &self.u0, params)
    }
}

/// The potential of the configuration after the optional zero-mean shift.
pub fn effective_potential(cfg: &ExperimentConfig) -> Result<PotentialSpec> {
    if cfg.zero_mean_potential {
        cfg.potential.zero_mean(&cfg.grid)
    } else {
        Ok(cfg.potential.clone())
    }
}

/// `u_0 = curl psi + grad phi`, with `curl psi = (d_y psi, -d_x psi[, 0])`.
fn velocity(cfg: &ExperimentConfig) -> (VectorField, VectorField) {
    let grid = &cfg.grid;
    let (_, gs) = sample_shape(&cfg.stream, grid, cfg.seed, 3);
    let (_, gp) = sample_shape(&cfg.gradient, grid, cfg.seed, 4);
    let mut curl = VectorField::zeros(grid);
    *curl.comp_mut(0) = gs.comp(1).clone();
    *curl.comp_mut(1) = gs.comp(0).map(|v| -v);
    (curl, gp)
}

/// Compressible data at `epsilon` together with the limit data.
pub fn build_initial_data(cfg: &ExperimentConfig, epsilon: f64) -> Result<(ConservedState, InitialData)> {
    let data = prepare(cfg)?;
    Ok((data.compressible(&cfg.params_for(epsilon)?)?, data))
}

/// Perturbations, potential and limit-system data; checks the well-prepared constraints.
pub fn prepare(cfg: &ExperimentConfig) -> Result<InitialData> {
    let grid = &cfg.grid;
    let params = cfg.params;
    let potential = effective_potential(cfg)?;
    let (f, _) = eval_potential(&potential, grid)?;
    let (theta1, _) = sample_shape(&cfg.theta1, grid, cfg.seed, 1);
    let mut projector = Projector::new(grid)?;
    let (curl, grad) = velocity(cfg);

    let (rho1, theta1, u0, eb) = match cfg.mode {
        IcMode::WellPrepared => {
            let u0 = projector.project(&curl)?.solenoidal.lin_comb(1.0, &grad, 1.0);
            let div = projector.divergence(&u0)?.max_abs();
            if div > cfg.div_tol {
                return Err(Error::Config(format!(
                    "well-prepared data needs div u0 = 0: max |div u0| = {div:.3e} exceeds div_tol = {:.1e}",
                    cfg.div_tol
                )));
            }
            let compatible = boussinesq_r(&theta1, &f, &params);
            let rho1 = match &cfg.rho1 {
                None => compatible,
                Some(shape) => {
                    let (r, _) = sample_shape(shape, grid, cfg.seed, 2);
                    let scale = params.rho_bar / params.theta_bar;
                    let worst =
                        (0..grid.len()).map(|i| (r[i] + scale * theta1[i] - scale * f[i]).abs()).fold(0.0, f64::max);
                    if worst > COMPATIBILITY_TOL {
                        return Err(Error::Config(format!(
                            "well-prepared data violates the Boussinesq relation \
                             rho1 + (rho_bar/theta_bar) theta1 = (rho_bar/theta_bar) F by {worst:.3e}"
                        )));
                    }
                    r
                }
            };
            let eb = BoussinesqState::new(u0.clone(), theta1.clone(), &f, &params, 0.0);
            (rho1, theta1, u0, eb)
        }
        IcMode::IllPrepared => {
            let rho1 = match &cfg.rho1 {
                None => boussinesq_r(&theta1, &f, &params),
                Some(shape) => sample_shape(shape, grid, cfg.seed, 2).0,
            };
            let (rho1, theta1) = (remove_mean(&rho1), remove_mean(&theta1));
            let u0 = curl.lin_comb(1.0, &grad, 1.0);
            let split = projector.project(&u0)?;
            let theta_eb = limit_theta(&rho1, &theta1, &f, &params);
            let eb = BoussinesqState::new(split.solenoidal, theta_eb, &f, &params, 0.0);
            (rho1, theta1, u0, eb)
        }
    };
    Ok(InitialData { potential, f, rho1, theta1, u0, eb })
}

/// `Theta_0 = theta_bar/(c_v+1) (c_v theta1/theta_bar - rho1/rho_bar + F/theta_bar)`.
fn limit_theta(rho1: &ScalarField, theta1: &ScalarField, f: &ScalarField, params: &SimParams) -> ScalarField {
    let (rb, tb, cv) = (params.rho_bar, params.theta_bar, params.c_v);
    let mut out = theta1.clone();
    for i in 0..out.len() {
        out[i] = tb / (cv + 1.0) * (cv * theta1[i] / tb - rho1[i] / rb + f[i] / tb);
    }
    out
}

pub fn compressible_state(
    rho1: &ScalarField,
    theta1: &ScalarField,
    u0: &VectorField,
    params: &SimParams,
) -> Result<ConservedState> {
    let eps = params.epsilon;
    let prim = PrimitiveState {
        rho: rho1.map(|r| params.rho_bar + eps * r),
        u: u0.clone(),
        theta: theta1.map(|t| params.theta_bar + eps * t),
    };
    if prim.rho.min() <= 0.0 || prim.theta.min() <= 0.0 {
        return Err(Error::Config(format!(
            "epsilon = {eps} is too large for the perturbation: density or temperature is not positive"
        )));
    }
    cons_from_prim(&prim, params)
}

/// Regularised acoustic data for the ill-prepared comparison at cut-off `eta`.
pub fn acoustic_data(data: &InitialData, params: &SimParams, eta: f64, grid: &Grid) -> Result<IllPreparedData> {
    let rp = RegularizationParams::new(eta)?;
    prepare_ill_data(&data.rho1, &data.theta1, &data.u0, &data.f, params, &rp, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boussinesq::helmholtz_project;
    use crate::grid::BoundaryKind;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_exact_rest_state() {
        let c = cfg("[grid]\nn = 8\n[physics]\nrho_bar = 1.3\ntheta_bar = 0.7\n");
        let (euler, d) = build_initial_data(&c, 0.1).unwrap();
        let p = &c.params;
        let e = p.c_v * p.rho_bar * p.theta_bar / 0.01;
        for i in 0..c.grid.len() {
            assert_eq!(euler.rho[i], 1.3);
            assert_eq!(euler.m.comp(0)[i], 0.0);
            assert!((euler.e_tot[i] - e).abs() <= 1e-15 * e);
        }
        assert_eq!(d.eb.u.max_abs(), 0.0);
        assert_eq!(d.eb.theta.max_abs(), 0.0);
    }

    const WELL: &str = "
[grid]
n = 32
[potential]
kind = gaussian-bump
center = 0.5, 0.5
width = 0.15
[ic]
theta = gaussian
theta.amplitude = 0.5
theta.center = 0.3, 0.5
theta.width = 0.1
stream = random
stream.kmax = 2
";

    #[test]
    fn well_prepared_data_is_compatible_and_solenoidal() {
        let c = cfg(WELL);
        let (euler, d) = build_initial_data(&c, 0.1).unwrap();
        let pr = Projector::new(&c.grid).unwrap();
        assert!(pr.divergence(&d.u0).unwrap().max_abs() < 1e-10);
        let s = c.params.rho_bar / c.params.theta_bar;
        for i in 0..c.grid.len() {
            assert!((d.rho1[i] + s * d.theta1[i] - s * d.f[i]).abs() < 1e-13);
        }
        assert!((euler.rho[7] - (1.0 + 0.1 * d.rho1[7])).abs() < 1e-15);
        assert!(d.u0.max_abs() > 0.1);
    }

    #[test]
    fn well_prepared_violations_are_config_errors() {
        let bad = format!("{WELL}rho = constant\nrho.value = 0.2\n");
        let err = build_initial_data(&cfg(&bad), 0.1).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("Boussinesq relation")), "{err}");
        let bad = format!("{WELL}gradient = cosine\ngradient.modes = 1, 0\n");
        let err = build_initial_data(&cfg(&bad), 0.1).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("div u0")), "{err}");
        assert!(matches!(build_initial_data(&cfg(WELL), 50.0), Err(Error::Config(_))));
    }

    #[test]
    fn ill_prepared_gradient_velocity_goes_to_the_acoustics() {
        let text = "
[grid]
n = 32
[ic]
mode = ill-prepared
gradient = gaussian
gradient.amplitude = 0.05
gradient.center = 0.5, 0.5
gradient.width = 0.1
theta = cosine
theta.modes = 1, 2
";
        let c = cfg(text);
        let d = prepare(&c).unwrap();
        assert!(d.eb.u.max_abs() < 1e-12);
        assert!(d.rho1.as_slice().iter().sum::<f64>().abs() < 1e-12);
        let params = c.params_for(0.1).unwrap();
        let ac = acoustic_data(&d, &params, 0.01, &c.grid).unwrap();
        let (_, g) = helmholtz_project(&d.u0, &c.grid).unwrap();
        let sp = crate::spectral::Spectral::new(&c.grid).unwrap();
        let gp = sp.gradient(&ac.acoustic.phi);
        let err = gp.lin_comb(1.0, &g, -1.0).max_abs();
        assert!(err < 0.05 * g.max_abs(), "{err}");
    }

    #[test]
    fn shapes_match_analytic_gradients() {
        let grid = Grid::uniform(2, 64, 1.0, BoundaryKind::Periodic).unwrap();
        let sp = crate::spectral::Spectral::new(&grid).unwrap();
        for shape in [
            Shape::Random { amplitude: 1.0, kmax: 2 },
            Shape::Cosine { amplitude: 0.5, modes: vec![2.0, -1.0], phase: 0.3 },
            Shape::Gaussian { amplitude: 1.0, center: vec![0.9, 0.1], width: 0.1 },
        ] {
            let (v, g) = sample_shape(&shape, &grid, 7, 1);
            let gs = sp.gradient(&v);
            assert!(gs.lin_comb(1.0, &g, -1.0).max_abs() < 1e-8 * g.max_abs(), "{shape:?}");
        }
        let a = sample_shape(&Shape::Random { amplitude: 1.0, kmax: 1 }, &grid, 7, 1).0;
        let b = sample_shape(&Shape::Random { amplitude: 1.0, kmax: 1 }, &grid, 7, 1).0;
        let c = sample_shape(&Shape::Random { amplitude: 1.0, kmax: 1 }, &grid, 8, 1).0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
