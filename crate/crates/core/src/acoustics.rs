//! Acoustic correction for ill-prepared data: the fast wave system for the
//! potential `Phi` and `Z = (theta_bar/rho_bar) R + T - F`, the invariant
//! `W = (c_v rho_bar/theta_bar) T - R` carried by `U + grad Phi`, the band-limiting
//! regularisation of initial data and the sponge layer.

use crate::boussinesq::{BoussinesqState, Projector};
use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, Region, ScalarField, VectorField};
use crate::params::SimParams;
use crate::spectral::Spectral;

/// `e^{-1/t}` for `t > 0`, zero otherwise.
fn bump_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, infinitely differentiable.
pub fn smooth_step(t: f64) -> f64 {
    let a = bump_exp(t);
    let b = bump_exp(1.0 - t);
    if a + b == 0.0 {
        if t >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

/// Spatial cutoff profile: 1 on `[0, 1]`, 0 beyond 2.
pub fn psi(s: f64) -> f64 {
    1.0 - smooth_step(s - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationParams {
    /// Band parameter, in `(0, 1)`.
    pub eta: f64,
    /// Centre of the spatial cutoff; the box centre when `None`.
    pub center: Option<Vec<f64>>,
}

impl RegularizationParams {
    pub fn new(eta: f64) -> Result<Self> {
        let rp = RegularizationParams { eta, center: None };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        Ok(())
    }

    /// Spectral window: 0 below `eta/2` and above `2/eta`, 1 on `[eta, 1/eta]`,
    /// smooth in between; even in `z`.
    pub fn window(&self, z: f64) -> f64 {
        let z = z.abs();
        let eta = self.eta;
        if z < 0.5 * eta {
            0.0
        } else if z < eta {
            smooth_step((z - 0.5 * eta) / (0.5 * eta))
        } else if z <= 1.0 / eta {
            1.0
        } else if z < 2.0 / eta {
            1.0 - smooth_step((z - 1.0 / eta) / (1.0 / eta))
        } else {
            0.0
        }
    }

    /// `psi(eta |x - centre|)`.
    pub fn cutoff(&self, grid: &Grid, x: &[f64]) -> f64 {
        let r2: f64 = (0..grid.dim())
            .map(|a| {
                let c = self.center.as_ref().map_or(0.5 * grid.lengths()[a], |c| c[a]);
                (x[a] - c) * (x[a] - c)
            })
            .sum();
        psi(self.eta * r2.sqrt())
    }
}

/// `[v]_eta`: multiply by the spatial cutoff, then apply the spectral window
/// to every Laplacian eigenmode.
pub fn regularize(v: &ScalarField, rp: &RegularizationParams, grid: &Grid) -> Result<ScalarField> {
    rp.validate()?;
    let sp = Spectral::new(grid)?;
    Ok(regularize_with(v, rp, grid, &sp))
}

fn regularize_with(v: &ScalarField, rp: &RegularizationParams, grid: &Grid, sp: &Spectral) -> ScalarField {
    let mut cut = v.clone();
    for lin in 0..grid.len() {
        cut[lin] *= rp.cutoff(grid, &grid.position(lin));
    }
    sp.filter(&cut, |k| rp.window(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticState {
    pub phi: ScalarField,
    pub z: ScalarField,
    pub t: f64,
}

/// Squared wave speed `C = (c_v + 1) theta_bar / c_v`.
pub fn acoustic_c2(params: &SimParams) -> f64 {
    (params.c_v + 1.0) * params.theta_bar / params.c_v
}

/// Advances every Laplacian eigenmode of `(Phi, Z)` by its exact rotation
/// under `dZ/dt = -(C/eps) Lap Phi`, `dPhi/dt = -Z/eps`.
pub fn acoustic_step(state: &AcousticState, sp: &Spectral, params: &SimParams, dt: f64) -> AcousticState {
    let eps = params.epsilon;
    let c = acoustic_c2(params).sqrt();
    let ph = sp.forward(&state.phi);
    let zh = sp.forward(&state.z);
    let mut out_p = ph.clone();
    let mut out_z = zh.clone();
    for (i, &l) in sp.lambda().iter().enumerate() {
        if l == 0.0 {
            out_p[i] = ph[i] - zh[i] * (dt / eps);
            continue;
        }
        let omega = l.sqrt() * c / eps;
        let (s, co) = (omega * dt).sin_cos();
        out_p[i] = ph[i] * co - zh[i] * (s / (eps * omega));
        out_z[i] = ph[i] * (eps * omega * s) + zh[i] * co;
    }
    AcousticState { phi: sp.inverse(&out_p), z: sp.inverse(&out_z), t: state.t + dt }
}

/// `int 1/2 rho_bar |grad Phi|^2 + 1/2 rho_bar c_v / ((c_v + 1) theta_bar) Z^2`
/// over the grid or a sub-box.
pub fn acoustic_energy(
    state: &AcousticState,
    sp: &Spectral,
    params: &SimParams,
    region: Option<&Region>,
) -> Result<f64> {
    let grid = sp.grid();
    let g = sp.gradient(&state.phi);
    let alpha = params.rho_bar * params.c_v / ((params.c_v + 1.0) * params.theta_bar);
    let mut dens = state.z.map(|z| 0.5 * alpha * z * z);
    for c in g.components() {
        for (d, v) in dens.as_mut_slice().iter_mut().zip(c.as_slice()) {
            *d += 0.5 * params.rho_bar * v * v;
        }
    }
    integrate(&dens, grid, region)
}

/// Fourth-order centred difference with even mirror ghosts at walls.
fn difference4(f: &ScalarField, grid: &Grid, axis: usize) -> ScalarField {
    let n = grid.n()[axis] as isize;
    let stride = grid.strides()[axis];
    let periodic = grid.boundary()[axis] == crate::grid::BoundaryKind::Periodic;
    let inv = 1.0 / (12.0 * grid.dx()[axis]);
    let mut out = ScalarField::zeros_like(f);
    for i in 0..f.len() {
        let j = ((i / stride) as isize) % n;
        let base = i - (j as usize) * stride;
        let at = |off: isize| {
            let mut k = j + off;
            if periodic {
                k = k.rem_euclid(n);
            } else if k < 0 {
                k = -1 - k;
            } else if k >= n {
                k = 2 * n - 1 - k;
            }
            f[base + k as usize * stride]
        };
        out[i] = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) * inv;
    }
    out
}

fn w_rate(w: &ScalarField, u: &VectorField, projector: &Projector) -> ScalarField {
    let grid = projector.grid();
    let mut out = ScalarField::zeros_like(w);
    for a in 0..u.dim() {
        let d = if projector.is_spectral() { projector.derivative(w, a, false) } else { difference4(w, grid, a) };
        let ua = u.comp(a);
        for i in 0..out.len() {
            out[i] -= ua[i] * d[i];
        }
    }
    out
}

/// SSP-RK2 advection of `W` (spectral derivatives on periodic grids, fourth-order
/// differences otherwise) by `u_old` (first stage) and `u_new` (second stage).
pub fn transport_w_between(
    w: &ScalarField,
    u_old: &VectorField,
    u_new: &VectorField,
    projector: &Projector,
    dt: f64,
) -> ScalarField {
    let w1 = w.lin_comb(1.0, &w_rate(w, u_old, projector), dt);
    let w2 = w1.lin_comb(1.0, &w_rate(&w1, u_new, projector), dt);
    w.lin_comb(0.5, &w2, 0.5)
}

/// `dW/dt + U~ . grad W = 0` over one step with a frozen velocity.
pub fn transport_w(w: &ScalarField, u_tilde: &VectorField, projector: &Projector, dt: f64) -> ScalarField {
    transport_w_between(w, u_tilde, u_tilde, projector, dt)
}

/// Inverts `Z = (theta_bar/rho_bar) R + T - F`, `W = (c_v rho_bar/theta_bar) T - R`.
pub fn recover_rt(z: &ScalarField, w: &ScalarField, f: &ScalarField, params: &SimParams) -> (ScalarField, ScalarField) {
    let (rb, tb, cv) = (params.rho_bar, params.theta_bar, params.c_v);
    let mut r = z.clone();
    let mut t = z.clone();
    for i in 0..z.len() {
        let zf = z[i] + f[i];
        let ri = (cv * rb / tb * zf - w[i]) / (cv + 1.0);
        r[i] = ri;
        t[i] = zf - tb / rb * ri;
    }
    (r, t)
}

/// `(Z, W)` from `(R, T)`.
pub fn zw_from_rt(r: &ScalarField, t: &ScalarField, f: &ScalarField, params: &SimParams) -> (ScalarField, ScalarField) {
    let (rb, tb, cv) = (params.rho_bar, params.theta_bar, params.c_v);
    let mut z = r.clone();
    let mut w = r.clone();
    for i in 0..r.len() {
        z[i] = tb / rb * r[i] + t[i] - f[i];
        w[i] = cv * rb / tb * t[i] - r[i];
    }
    (z, w)
}

fn mean(f: &ScalarField) -> f64 {
    crate::grid::compensated_sum(f.as_slice().iter().copied()) / f.len() as f64
}

/// Relaxes `Z` toward its spatial mean by `exp(-sigma dt)` per cell, turning
/// the wave equation for `Phi` into `Phi_tt + sigma Phi_t = (C/eps^2) Lap Phi`
/// inside the band.
pub fn sponge_apply(state: &mut AcousticState, sigma: &ScalarField, dt: f64) {
    let m = mean(&state.z);
    let target = ScalarField::zeros_like(&state.z).map(|_| m);
    crate::sponge::relax_toward(&mut state.z, &target, sigma, dt);
}

/// Initial data for the ill-prepared comparison.
#[derive(Debug, Clone)]
pub struct IllPreparedData {
    /// `[rho_0^(1)]_eta`
    pub r0: ScalarField,
    /// `[theta_0^(1)]_eta`
    pub t0: ScalarField,
    pub phi0: ScalarField,
    /// The declared limit density deviation `rho_0^(1)`; the state below carries
    /// the `r` implied by `Theta_0` and `F` instead.
    pub declared_r0: ScalarField,
    pub eb: BoussinesqState,
    pub acoustic: AcousticState,
    pub w0: ScalarField,
}

/// Builds regularised acoustic data and the limit-system data from
/// `(rho_0^(1), theta_0^(1), u_0)`.
pub fn prepare_ill_data(
    rho1: &ScalarField,
    theta1: &ScalarField,
    u0: &VectorField,
    f: &ScalarField,
    params: &SimParams,
    rp: &RegularizationParams,
    grid: &Grid,
) -> Result<IllPreparedData> {
    rp.validate()?;
    let sp = Spectral::new(grid)?;
    let mut projector = Projector::new(grid)?;
    let split = projector.project(u0)?;
    let r0 = regularize_with(rho1, rp, grid, &sp);
    let t0 = regularize_with(theta1, rp, grid, &sp);
    let phi0 = regularize_with(&split.potential, rp, grid, &sp);

    let (rb, tb, cv) = (params.rho_bar, params.theta_bar, params.c_v);
    let mut theta_eb = grid.zeros();
    for i in 0..grid.len() {
        theta_eb[i] = tb / (cv + 1.0) * (cv * theta1[i] / tb - rho1[i] / rb + f[i] / tb);
    }
    let eb = BoussinesqState::new(split.solenoidal, theta_eb, f, params, 0.0);
    let (z0, w0) = zw_from_rt(&r0, &t0, f, params);
    Ok(IllPreparedData {
        r0,
        t0,
        phi0: phi0.clone(),
        declared_r0: rho1.clone(),
        eb,
        acoustic: AcousticState { phi: phi0, z: z0, t: 0.0 },
        w0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcousticDiagnostics {
    pub t: f64,
    pub e_ac_total: f64,
    pub e_ac_innerbox: f64,
}

impl AcousticDiagnostics {
    pub const CSV_HEADER: &'static str = "t,E_ac_total,E_ac_innerbox";

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e}", self.t, self.e_ac_total, self.e_ac_innerbox)
    }
}

#[derive(Debug, Clone)]
pub struct AcousticSnapshot {
    pub state: AcousticState,
    pub w: ScalarField,
    /// `grad Phi` at the snapshot time.
    pub grad_phi: VectorField,
}

#[derive(Debug, Clone)]
pub struct AcousticOptions {
    pub output_times: Vec<f64>,
    /// Per-cell damping rate; `None` disables the sponge.
    pub sponge: Option<ScalarField>,
    /// Advective Courant number for the transport of `W`.
    pub cfl_advective: f64,
    /// Fraction of the fast time `eps dx / sqrt(C)` used as a step bound.
    pub cfl_acoustic: f64,
    pub inner_box: Option<Region>,
    /// Record diagnostics every this many steps besides the output times.
    pub diag_stride: usize,
}

impl Default for AcousticOptions {
    fn default() -> Self {
        AcousticOptions {
            output_times: Vec::new(),
            sponge: None,
            cfl_advective: 0.1,
            cfl_acoustic: 0.5,
            inner_box: None,
            diag_stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcousticRun {
    pub diagnostics: Vec<AcousticDiagnostics>,
    pub snapshots: Vec<AcousticSnapshot>,
    pub steps: usize,
}

/// Evolves `(Phi, Z)` and `W` to `params.t_end`. The limit velocity is supplied
/// by `velocity(t)`; `W` is carried by `velocity(t) + grad Phi`. The sponge, if
/// any, is Strang-split around the exact wave rotation.
pub fn run_acoustic(
    initial: AcousticState,
    w0: ScalarField,
    grid: &Grid,
    params: &SimParams,
    velocity: &mut dyn FnMut(f64) -> Result<VectorField>,
    options: &AcousticOptions,
) -> Result<AcousticRun> {
    let sp = Spectral::new(grid)?;
    let projector = Projector::new(grid)?;
    let inner = options.inner_box.clone().unwrap_or_else(|| grid.central_half());
    let mut targets: Vec<f64> =
        options.output_times.iter().copied().filter(|&t| t >= initial.t && t <= params.t_end).collect();
    targets.push(params.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let diag = |s: &AcousticState| -> Result<AcousticDiagnostics> {
        Ok(AcousticDiagnostics {
            t: s.t,
            e_ac_total: acoustic_energy(s, &sp, params, None)?,
            e_ac_innerbox: acoustic_energy(s, &sp, params, Some(&inner))?,
        })
    };
    let mut state = initial;
    let mut w = w0;
    let mut grad_phi = sp.gradient(&state.phi);
    let mut u_tilde = velocity(state.t)?.lin_comb(1.0, &grad_phi, 1.0);
    let mut diagnostics = vec![diag(&state)?];
    let mut snapshots = Vec::new();
    let mut next = 0;
    while next < targets.len() && targets[next] <= state.t {
        snapshots.push(AcousticSnapshot { state: state.clone(), w: w.clone(), grad_phi: grad_phi.clone() });
        next += 1;
    }
    let fast = options.cfl_acoustic * params.epsilon * grid.min_dx() / acoustic_c2(params).sqrt();
    let mut steps = 0;
    while next < targets.len() {
        let target = targets[next];
        let umax = u_tilde.max_abs();
        let mut dt = if umax > 0.0 { fast.min(options.cfl_advective * grid.min_dx() / umax) } else { fast };
        let landing = state.t + dt >= target;
        if landing {
            dt = target - state.t;
        }
        if let Some(sigma) = &options.sponge {
            sponge_apply(&mut state, sigma, 0.5 * dt);
        }
        state = acoustic_step(&state, &sp, params, dt);
        if let Some(sigma) = &options.sponge {
            sponge_apply(&mut state, sigma, 0.5 * dt);
        }
        if landing {
            state.t = target;
        }
        grad_phi = sp.gradient(&state.phi);
        let u_new = velocity(state.t)?.lin_comb(1.0, &grad_phi, 1.0);
        w = transport_w_between(&w, &u_tilde, &u_new, &projector, dt);
        u_tilde = u_new;
        steps += 1;
        if !w.all_finite() || !state.phi.all_finite() {
            return Err(Error::NonFinite("run_acoustic"));
        }
        if landing || steps % options.diag_stride.max(1) == 0 {
            diagnostics.push(diag(&state)?);
        }
        if landing {
            snapshots.push(AcousticSnapshot { state: state.clone(), w: w.clone(), grad_phi: grad_phi.clone() });
            next += 1;
        }
    }
    Ok(AcousticRun { diagnostics, snapshots, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm, BoundaryKind, NormKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> SimParams {
        SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn window_branches() {
        let rp = RegularizationParams::new(0.1).unwrap();
        assert_eq!(rp.window(0.0), 0.0);
        assert_eq!(rp.window(0.049), 0.0);
        assert_eq!(rp.window(0.1), 1.0);
        assert_eq!(rp.window(5.0), 1.0);
        assert_eq!(rp.window(10.0), 1.0);
        assert_eq!(rp.window(20.0), 0.0);
        assert_eq!(rp.window(-5.0), 1.0);
        for k in 0..1000 {
            let z = 25.0 * k as f64 / 1000.0;
            let g = rp.window(z);
            assert!((0.0..=1.0).contains(&g));
        }
        assert_eq!(psi(0.5), 1.0);
        assert_eq!(psi(2.5), 0.0);
        assert!(psi(1.5) > 0.0 && psi(1.5) < 1.0);
    }

    #[test]
    fn regularize_examples() {
        let grid = Grid::uniform(2, 32, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let rp = RegularizationParams::new(0.05).unwrap();
        // box half-diagonal well inside 1/eta, so the spatial cutoff is one
        let mode = ScalarField::from_fn(&grid, |x| (3.0 * x[0]).cos() * x[1].sin());
        let out = regularize(&mode, &rp, &grid).unwrap();
        assert!(out.lin_comb(1.0, &mode, -1.0).max_abs() < 1e-12);
        let c = ScalarField::constant(&grid, 2.5);
        assert!(regularize(&c, &rp, &grid).unwrap().max_abs() < 1e-13);

        // |k| = sqrt(26) > 2/eta = 4; the cutoff is not one here but the output is band-limited
        let rp = RegularizationParams::new(0.5).unwrap();
        let high = ScalarField::from_fn(&grid, |x| (5.0 * x[0]).cos() * x[1].cos());
        let out = regularize(&high, &rp, &grid).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        for (z, l) in sp.forward(&out).iter().zip(sp.lambda()) {
            if l.sqrt() > 4.0 {
                assert!(z.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn window_is_idempotent_on_plateau_modes() {
        let grid = Grid::uniform(2, 32, 1.0, BoundaryKind::SlipWall).unwrap();
        let rp = RegularizationParams::new(0.02).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (PI * x[0]).cos() + (3.0 * PI * x[1]).cos() * (2.0 * PI * x[0]).cos());
        let once = regularize(&f, &rp, &grid).unwrap();
        let twice = regularize(&once, &rp, &grid).unwrap();
        assert!(twice.lin_comb(1.0, &once, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn standing_wave_is_exact() {
        let grid = Grid::uniform(2, 32, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let prm = params();
        let sp = Spectral::new(&grid).unwrap();
        let k = 2.0;
        let omega = k / prm.epsilon * acoustic_c2(&prm).sqrt();
        let mut s = AcousticState { phi: ScalarField::from_fn(&grid, |x| (k * x[0]).cos()), z: grid.zeros(), t: 0.0 };
        let e0 = acoustic_energy(&s, &sp, &prm, None).unwrap();
        for _ in 0..37 {
            s = acoustic_step(&s, &sp, &prm, 0.0123);
        }
        let want = ScalarField::from_fn(&grid, |x| (k * x[0]).cos() * (omega * s.t).cos());
        assert!(s.phi.lin_comb(1.0, &want, -1.0).max_abs() < 1e-12);
        let e1 = acoustic_energy(&s, &sp, &prm, None).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-12);
    }

    #[test]
    fn energy_of_cosine_potential() {
        let grid = Grid::uniform(2, 32, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        let prm = params();
        let s = AcousticState { phi: ScalarField::from_fn(&grid, |x| x[0].cos()), z: grid.zeros(), t: 0.0 };
        assert!((acoustic_energy(&s, &sp, &prm, None).unwrap() - PI * PI).abs() < 1e-12);
        let zero = AcousticState { phi: grid.zeros(), z: grid.zeros(), t: 0.0 };
        assert_eq!(acoustic_energy(&zero, &sp, &prm, None).unwrap(), 0.0);
        assert_eq!(acoustic_step(&zero, &sp, &prm, 0.3).phi.max_abs(), 0.0);
    }

    #[test]
    fn energy_conserved_on_walled_box() {
        let grid = Grid::new(2, &[24, 16], &[2.0, 1.0], &[BoundaryKind::SlipWall; 2]).unwrap();
        let sp = Spectral::new(&grid).unwrap();
        let prm = params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = AcousticState {
            phi: ScalarField::from_fn(&grid, |_| rng.gen_range(-1.0..1.0)),
            z: ScalarField::from_fn(&grid, |_| rng.gen_range(-1.0..1.0)),
            t: 0.0,
        };
        let e0 = acoustic_energy(&s, &sp, &prm, None).unwrap();
        for _ in 0..50 {
            s = acoustic_step(&s, &sp, &prm, 0.0317);
        }
        let e1 = acoustic_energy(&s, &sp, &prm, None).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-12, "{}", (e1 - e0) / e0);
    }

    #[test]
    fn recover_examples_and_round_trip() {
        let grid = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
        let prm = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| x[0] - 2.0 * x[1]);
        let (r, t) = recover_rt(&f.map(|v| -v), &grid.zeros(), &f, &prm);
        assert!(r.max_abs() < 1e-15 && t.max_abs() < 1e-15);

        let z = f.map(|v| 1.0 - v);
        let (r, t) = recover_rt(&z, &grid.zeros(), &f, &prm);
        for i in 0..grid.len() {
            assert!((r[i] - 0.6).abs() < 1e-15 && (t[i] - 0.4).abs() < 1e-15);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prm = SimParams::new(0.1, 2.5, 1.3, 0.7).unwrap();
        let z = ScalarField::from_fn(&grid, |_| rng.gen_range(-2.0..2.0));
        let w = ScalarField::from_fn(&grid, |_| rng.gen_range(-2.0..2.0));
        let (r, t) = recover_rt(&z, &w, &f, &prm);
        let (z2, w2) = zw_from_rt(&r, &t, &f, &prm);
        assert!(z2.lin_comb(1.0, &z, -1.0).max_abs() < 1e-13);
        assert!(w2.lin_comb(1.0, &w, -1.0).max_abs() < 1e-13);
    }

    #[test]
    fn transport_trivial_cases() {
        let grid = Grid::uniform(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let pr = Projector::new(&grid).unwrap();
        let w = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).sin());
        assert_eq!(transport_w(&w, &VectorField::zeros(&grid), &pr, 0.1), w);
        let c = ScalarField::constant(&grid, 3.0);
        let u = VectorField::from_fn(&grid, |x| vec![x[1].sin(), 1.0]);
        assert!(transport_w(&c, &u, &pr, 0.01).lin_comb(1.0, &c, -1.0).max_abs() < 1e-13);
    }

    #[test]
    fn fourth_order_difference_is_exact_on_cubics_away_from_walls() {
        let grid = Grid::uniform(2, 16, 1.0, BoundaryKind::SlipWall).unwrap();
        let f = ScalarField::from_fn(&grid, |x| x[0].powi(3) - x[1]);
        let d0 = difference4(&f, &grid, 0);
        let d1 = difference4(&f, &grid, 1);
        for lin in 0..grid.len() {
            let idx = grid.multi_index(lin);
            if (2..14).contains(&idx[0]) {
                let x = grid.position(lin)[0];
                assert!((d0[lin] - 3.0 * x * x).abs() < 1e-12);
            }
            if (2..14).contains(&idx[1]) {
                assert!((d1[lin] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solid_rotation_of_gaussian() {
        let n = 128;
        let grid = Grid::uniform(2, n, 2.0, BoundaryKind::SlipWall).unwrap();
        let pr = Projector::new(&grid).unwrap();
        let gauss = |x: &[f64]| (-((x[0] - 1.4).powi(2) + (x[1] - 1.0).powi(2)) / (2.0 * 0.1f64.powi(2))).exp();
        let w0 = ScalarField::from_fn(&grid, gauss);
        let u = VectorField::from_fn(&grid, |x| vec![-(x[1] - 1.0), x[0] - 1.0]);
        let period = 2.0 * PI;
        let steps = (period / (0.1 * grid.min_dx() / u.max_abs())).ceil() as usize;
        let dt = period / steps as f64;
        let mut w = w0.clone();
        for _ in 0..steps {
            w = transport_w(&w, &u, &pr, dt);
        }
        let err = norm(&w.lin_comb(1.0, &w0, -1.0), &grid, NormKind::L2, None).unwrap();
        assert!(err <= 5e-3, "rotation L2 error {err}");
    }

    #[test]
    fn ill_data_examples() {
        let grid = Grid::uniform(2, 32, 1.0, BoundaryKind::Periodic).unwrap();
        let prm = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let rp = RegularizationParams::new(0.02).unwrap();
        let zero = grid.zeros();
        let tp = 2.0 * PI;
        let sol = VectorField::from_fn(&grid, |x| vec![(tp * x[1]).sin(), (tp * x[0]).cos()]);
        let d = prepare_ill_data(&zero, &zero, &sol, &zero, &prm, &rp, &grid).unwrap();
        assert!(d.r0.max_abs() < 1e-14 && d.t0.max_abs() < 1e-14);
        assert!(d.phi0.max_abs() < 1e-12);
        assert!(d.eb.theta.max_abs() < 1e-14);
        assert!(d.eb.u.lin_comb(1.0, &sol, -1.0).max_abs() < 1e-12);

        let one = ScalarField::constant(&grid, 1.0);
        let d = prepare_ill_data(&zero, &one, &VectorField::zeros(&grid), &zero, &prm, &rp, &grid).unwrap();
        assert!(d.eb.theta.as_slice().iter().all(|&v| (v - 0.6).abs() < 1e-15));

        let grad = VectorField::from_fn(&grid, |x| {
            vec![tp * (tp * x[0]).cos() * (tp * x[1]).cos(), -tp * (tp * x[0]).sin() * (tp * x[1]).sin()]
        });
        let d = prepare_ill_data(&zero, &zero, &grad, &zero, &prm, &rp, &grid).unwrap();
        assert!(d.eb.u.max_abs() < 1e-10);
        let sp = Spectral::new(&grid).unwrap();
        assert!(sp.gradient(&d.phi0).lin_comb(1.0, &grad, -1.0).max_abs() < 1e-10);
    }

    #[test]
    fn sponge_absorbs_an_outgoing_pulse() {
        let grid = Grid::uniform(2, 64, 2.0, BoundaryKind::Sponge).unwrap();
        let prm = params().with_t_end(3.0 * 0.1 * 2.0 / acoustic_c2(&params()).sqrt()).unwrap();
        let z = ScalarField::from_fn(&grid, |x| (-((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)) / 0.02).exp());
        let z = z.map(|v| v - mean(&z));
        let start = AcousticState { phi: grid.zeros(), z, t: 0.0 };
        let mut still = |_: f64| Ok(VectorField::zeros(&grid));
        let sigma = crate::sponge::sponge_profile(&grid, &crate::sponge::SpongeParams { width: 0.4, sigma_max: 600.0 })
            .unwrap();
        let damped = AcousticOptions { sponge: Some(sigma), ..AcousticOptions::default() };
        let run = run_acoustic(start.clone(), grid.zeros(), &grid, &prm, &mut still, &damped).unwrap();
        let (e0, e1) = (run.diagnostics[0].e_ac_total, run.diagnostics.last().unwrap().e_ac_total);
        assert!(e1 < 1e-2 * e0, "{e1} {e0}");
        let free = run_acoustic(start, grid.zeros(), &grid, &prm, &mut still, &AcousticOptions::default()).unwrap();
        let e2 = free.diagnostics.last().unwrap().e_ac_total;
        assert!((e2 - e0).abs() < 1e-12 * e0);
    }

    #[test]
    fn sponge_leaves_means_and_identity_cases() {
        let grid = Grid::uniform(2, 16, 2.0, BoundaryKind::Sponge).unwrap();
        let sigma =
            crate::sponge::sponge_profile(&grid, &crate::sponge::SpongeParams { width: 0.5, sigma_max: 0.0 }).unwrap();
        let mut s = AcousticState { phi: ScalarField::from_fn(&grid, |x| x[0]), z: grid.zeros(), t: 0.0 };
        let before = s.clone();
        sponge_apply(&mut s, &sigma, 0.1);
        assert_eq!(s, before);
        let sigma =
            crate::sponge::sponge_profile(&grid, &crate::sponge::SpongeParams { width: 0.5, sigma_max: 30.0 }).unwrap();
        let mut flat =
            AcousticState { phi: ScalarField::constant(&grid, 2.0), z: ScalarField::constant(&grid, -1.0), t: 0.0 };
        let before = flat.clone();
        sponge_apply(&mut flat, &sigma, 0.1);
        assert!(flat.phi.lin_comb(1.0, &before.phi, -1.0).max_abs() < 1e-15);
        assert!(flat.z.lin_comb(1.0, &before.z, -1.0).max_abs() < 1e-15);
    }

    #[test]
    fn invariant_transport_matches_limit_temperature() {
        // With Phi = 0 and Z = 0 the recovered T obeys the limit temperature
        // equation, so it tracks Theta of the Boussinesq solver.
        let grid = Grid::uniform(2, 32, 1.0, BoundaryKind::Periodic).unwrap();
        let prm = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let tp = 2.0 * PI;
        let f = ScalarField::from_fn(&grid, |x| 0.3 * (tp * x[0]).cos());
        let u = VectorField::from_fn(&grid, |x| vec![(tp * x[1]).sin(), 0.5]);
        let theta = ScalarField::from_fn(&grid, |x| 0.2 * (tp * x[1]).sin());
        let eb = BoussinesqState::new(u.clone(), theta.clone(), &f, &prm, 0.0);
        // Z = 0 means T = F - (theta_bar/rho_bar) R; choose R = r, so T = Theta
        let (z, w) = zw_from_rt(&eb.r, &eb.theta, &f, &prm);
        assert!(z.max_abs() < 1e-15);
        let pr = Projector::new(&grid).unwrap();
        let dt = 1e-3;
        let mut w_t = w;
        let mut th = theta;
        let gf = Spectral::new(&grid).unwrap().gradient(&f);
        for _ in 0..100 {
            w_t = transport_w(&w_t, &u, &pr, dt);
            // Theta advanced with the same scheme: advection plus source
            let rate = |t: &ScalarField| {
                let mut r = w_rate(t, &u, &pr);
                for i in 0..r.len() {
                    r[i] += (u.comp(0)[i] * gf.comp(0)[i] + u.comp(1)[i] * gf.comp(1)[i]) / (1.0 + prm.c_v);
                }
                r
            };
            let t1 = th.lin_comb(1.0, &rate(&th), dt);
            let t2 = t1.lin_comb(1.0, &rate(&t1), dt);
            th = th.lin_comb(0.5, &t2, 0.5);
        }
        let (_, t_rec) = recover_rt(&grid.zeros(), &w_t, &f, &prm);
        let drift = t_rec.lin_comb(1.0, &th, -1.0).max_abs();
        assert!(drift < 1e-10, "recovered T drift {drift}");
    }

    proptest::proptest! {
        #[test]
        fn recovery_inverts_the_invariants(
            eps in 0.01f64..1.0, c_v in 1.0f64..4.0, rho_bar in 0.2f64..3.0, theta_bar in 0.2f64..3.0,
            seed in 0u64..1000,
        ) {
            let grid = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
            let prm = SimParams::new(eps, c_v, rho_bar, theta_bar).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut field = || ScalarField::from_fn(&grid, |_| rng.gen_range(-2.0..2.0));
            let (z, w, f) = (field(), field(), field());
            let (r, t) = recover_rt(&z, &w, &f, &prm);
            let (z2, w2) = zw_from_rt(&r, &t, &f, &prm);
            let scale = 1.0 + rho_bar / theta_bar + c_v * rho_bar / theta_bar;
            proptest::prop_assert!(z2.lin_comb(1.0, &z, -1.0).max_abs() <= 1e-13 * scale);
            proptest::prop_assert!(w2.lin_comb(1.0, &w, -1.0).max_abs() <= 1e-13 * scale * scale);
        }

        #[test]
        fn regularization_is_idempotent_on_plateau_modes(eta in 0.02f64..0.1, seed in 0u64..1000) {
            let grid = Grid::uniform(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
            let rp = RegularizationParams::new(eta).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tp = 2.0 * PI;
            let v = ScalarField::from_fn(&grid, |x| {
                a[0] * (tp * x[0]).cos() + a[1] * (tp * x[0]).sin() + a[2] * (tp * x[1]).cos()
                    + a[3] * (tp * x[1]).sin() + a[4] * (tp * (x[0] + x[1])).cos() + a[5] * (tp * (x[0] - x[1])).sin()
            });
            let once = regularize(&v, &rp, &grid).unwrap();
            let twice = regularize(&once, &rp, &grid).unwrap();
            proptest::prop_assert!(once.lin_comb(1.0, &v, -1.0).max_abs() <= 1e-12);
            proptest::prop_assert!(twice.lin_comb(1.0, &once, -1.0).max_abs() <= 1e-12);
        }
    }
}
