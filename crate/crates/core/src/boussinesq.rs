//! Incompressible Euler–Boussinesq solver: solenoidal velocity `U`, temperature
//! deviation `Theta`, and the density deviation `r` tied to them by
//! `r + (rho_bar/theta_bar) Theta = (rho_bar/theta_bar) F`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{integrate, norm, vector_l2, Grid, NormKind, ScalarField, VectorField};
use crate::params::SimParams;
use crate::potential::{eval_potential, PotentialSpec};
use crate::spectral::Spectral;

/// `r = (rho_bar/theta_bar)(F - Theta)`.
pub fn boussinesq_r(theta: &ScalarField, f: &ScalarField, params: &SimParams) -> ScalarField {
    let c = params.rho_bar / params.theta_bar;
    f.zip_map(theta, |fv, t| c * (fv - t))
}

/// Centred difference along `axis`. Past a wall the ghost value mirrors the
/// first interior cell, negated when `odd` (the normal velocity component).
pub fn centered_difference(f: &ScalarField, grid: &Grid, axis: usize, odd: bool) -> ScalarField {
    let inv = 0.5 / grid.dx()[axis];
    let mut out = ScalarField::zeros_like(f);
    for i in 0..f.len() {
        let ghost = |nb: Option<usize>| match nb {
            Some(j) => f[j],
            None if odd => -f[i],
            None => f[i],
        };
        out[i] = (ghost(grid.neighbor(i, axis, 1)) - ghost(grid.neighbor(i, axis, -1))) * inv;
    }
    out
}

/// Discrete divergence with reflected normal ghosts; the negative adjoint of
/// the mirrored-ghost gradient.
pub fn fd_divergence(u: &VectorField, grid: &Grid) -> ScalarField {
    let mut out = grid.zeros();
    for a in 0..grid.dim() {
        let d = centered_difference(u.comp(a), grid, a, true);
        for (o, v) in out.as_mut_slice().iter_mut().zip(d.as_slice()) {
            *o += v;
        }
    }
    out
}

pub fn fd_gradient(f: &ScalarField, grid: &Grid) -> VectorField {
    let comps = (0..grid.dim()).map(|a| centered_difference(f, grid, a, false)).collect();
    VectorField::from_components(comps).expect("shape")
}

/// How the Neumann–Poisson problem behind the wall projection is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonMethod {
    /// Cosine transform: the centred operators are diagonal in the Neumann basis.
    Direct,
    /// Conjugate gradients on the zero-mean subspace.
    Cg,
}

#[derive(Debug, Clone)]
enum ProjKind {
    Fourier(Spectral),
    Wall { dct: Option<(Spectral, Vec<f64>)> },
}

/// Result of a Helmholtz decomposition `u = H u + grad phi`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub solenoidal: VectorField,
    pub gradient: VectorField,
    pub potential: ScalarField,
    pub iterations: usize,
}

/// Helmholtz projector bound to a grid: spectral on periodic boxes, centred
/// differences with a Neumann–Poisson solve otherwise.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    kind: ProjKind,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    warm: Option<ScalarField>,
}

impl Projector {
    pub fn new(grid: &Grid) -> Result<Self> {
        Self::with_method(grid, PoissonMethod::Direct)
    }

    pub fn with_method(grid: &Grid, method: PoissonMethod) -> Result<Self> {
        let kind = if grid.all_periodic() {
            ProjKind::Fourier(Spectral::new(grid)?)
        } else if grid.all_walls() && method == PoissonMethod::Direct {
            let sp = Spectral::new(grid)?;
            let mut mu = vec![0.0; grid.len()];
            for (lin, m) in mu.iter_mut().enumerate() {
                let idx = grid.multi_index(lin);
                *m = (0..grid.dim())
                    .map(|a| {
                        let s = (std::f64::consts::PI * idx[a] as f64 / grid.n()[a] as f64).sin() / grid.dx()[a];
                        s * s
                    })
                    .sum();
            }
            ProjKind::Wall { dct: Some((sp, mu)) }
        } else {
            ProjKind::Wall { dct: None }
        };
        Ok(Projector { grid: grid.clone(), kind, cg_tol: 1e-10, cg_max_iter: 20_000, warm: None })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.kind, ProjKind::Fourier(_))
    }

    pub fn divergence(&self, u: &VectorField) -> Result<ScalarField> {
        match &self.kind {
            ProjKind::Fourier(sp) => sp.divergence(u),
            ProjKind::Wall { .. } => Ok(fd_divergence(u, &self.grid)),
        }
    }

    /// Derivative along `axis`; `odd` marks fields that flip sign across walls.
    pub fn derivative(&self, f: &ScalarField, axis: usize, odd: bool) -> ScalarField {
        match &self.kind {
            ProjKind::Fourier(sp) => {
                let mut c = sp.forward(f);
                let k = sp.wavenumbers(axis);
                for (lin, z) in c.iter_mut().enumerate() {
                    let j = (lin / self.grid.strides()[axis]) % self.grid.n()[axis];
                    *z *= Complex64::new(0.0, k[j]);
                }
                sp.inverse(&c)
            }
            ProjKind::Wall { .. } => centered_difference(f, &self.grid, axis, odd),
        }
    }

    pub fn project(&mut self, u: &VectorField) -> Result<Projection> {
        match &self.kind {
            ProjKind::Fourier(sp) => {
                let (h, g, phi) = sp.project(u)?;
                Ok(Projection { solenoidal: h, gradient: g, potential: phi, iterations: 0 })
            }
            ProjKind::Wall { dct } => {
                let div = fd_divergence(u, &self.grid);
                let (phi, iterations) = match dct {
                    Some((sp, mu)) => {
                        let mut c = sp.forward(&div);
                        for (z, &m) in c.iter_mut().zip(mu) {
                            *z = if m > 0.0 { -*z / m } else { Complex64::new(0.0, 0.0) };
                        }
                        (sp.inverse(&c), 0)
                    }
                    None => {
                        let start = self.warm.clone().unwrap_or_else(|| self.grid.zeros());
                        let out = cg_neumann(&div, &self.grid, start, self.cg_tol, self.cg_max_iter)?;
                        self.warm = Some(out.0.clone());
                        out
                    }
                };
                let g = fd_gradient(&phi, &self.grid);
                let h = u.lin_comb(1.0, &g, -1.0);
                Ok(Projection { solenoidal: h, gradient: g, potential: phi, iterations })
            }
        }
    }
}

fn remove_mean(f: &mut ScalarField) {
    let mean = crate::grid::compensated_sum(f.as_slice().iter().copied()) / f.len() as f64;
    for v in f.as_mut_slice() {
        *v -= mean;
    }
}

fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
    crate::grid::compensated_sum(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y))
}

/// Solves `D G phi = div` on the zero-mean subspace by conjugate gradients on
/// the positive semidefinite `-D G`, stopping once `max |D G phi - div| <= tol`
/// (scaled by `max(1, max |div|)`).
pub fn cg_neumann(
    div: &ScalarField,
    grid: &Grid,
    start: ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, usize)> {
    let apply = |p: &ScalarField| fd_divergence(&fd_gradient(p, grid), grid).map(|v| -v);
    let mut b = div.map(|v| -v);
    remove_mean(&mut b);
    let target = tol * b.max_abs().max(1.0);
    let mut x = start;
    remove_mean(&mut x);
    let mut r = b.lin_comb(1.0, &apply(&x), -1.0);
    if r.max_abs() <= target {
        return Ok((x, 0));
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x = x.lin_comb(1.0, &p, alpha);
        r = r.lin_comb(1.0, &ap, -alpha);
        if r.max_abs() <= target {
            remove_mean(&mut x);
            return Ok((x, it));
        }
        let rr_new = dot(&r, &r);
        p = r.lin_comb(1.0, &p, rr_new / rr);
        rr = rr_new;
    }
    Err(Error::PoissonNotConverged { iterations: max_iter, residual: r.max_abs() })
}

/// Splits `u` into its solenoidal part and its gradient part.
pub fn helmholtz_project(u: &VectorField, grid: &Grid) -> Result<(VectorField, VectorField)> {
    let p = Projector::new(grid)?.project(u)?;
    Ok((p.solenoidal, p.gradient))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoussinesqState {
    pub u: VectorField,
    pub theta: ScalarField,
    /// Always `boussinesq_r(theta, F)`.
    pub r: ScalarField,
    pub t: f64,
}

impl BoussinesqState {
    pub fn new(u: VectorField, theta: ScalarField, f: &ScalarField, params: &SimParams, t: f64) -> Self {
        let r = boussinesq_r(&theta, f, params);
        BoussinesqState { u, theta, r, t }
    }

    pub fn rest(grid: &Grid, f: &ScalarField, params: &SimParams) -> Self {
        Self::new(VectorField::zeros(grid), grid.zeros(), f, params, 0.0)
    }
}

fn advect(projector: &Projector, u: &VectorField, f: &ScalarField, odd_axis: Option<usize>) -> ScalarField {
    let mut out = ScalarField::zeros_like(f);
    for a in 0..u.dim() {
        let d = projector.derivative(f, a, odd_axis == Some(a));
        let ua = u.comp(a);
        for i in 0..out.len() {
            out[i] += ua[i] * d[i];
        }
    }
    out
}

/// Unprojected momentum forcing `-U . grad U + (r/rho_bar) grad F`.
fn momentum_forcing(
    state: &BoussinesqState,
    grad_f: &VectorField,
    params: &SimParams,
    projector: &Projector,
) -> VectorField {
    let dim = state.u.dim();
    let comps = (0..dim)
        .map(|b| {
            let adv = advect(projector, &state.u, state.u.comp(b), Some(b));
            let g = grad_f.comp(b);
            let mut out = adv.map(|v| -v);
            for i in 0..out.len() {
                out[i] += state.r[i] / params.rho_bar * g[i];
            }
            out
        })
        .collect();
    VectorField::from_components(comps).expect("shape")
}

/// Time derivatives `(dU/dt, dTheta/dt)`.
pub fn eb_rhs(
    state: &BoussinesqState,
    grad_f: &VectorField,
    params: &SimParams,
    projector: &mut Projector,
    dealias: bool,
) -> Result<(VectorField, ScalarField)> {
    let mut forcing = momentum_forcing(state, grad_f, params, projector);
    let mut dtheta = advect(projector, &state.u, &state.theta, None).map(|v| -v);
    let coupling = 1.0 / (1.0 + params.c_v);
    for a in 0..state.u.dim() {
        let (ua, g) = (state.u.comp(a), grad_f.comp(a));
        for i in 0..dtheta.len() {
            dtheta[i] += coupling * ua[i] * g[i];
        }
    }
    if dealias {
        if let ProjKind::Fourier(sp) = &projector.kind {
            dtheta = sp.dealias(&dtheta);
            let comps = forcing.components().iter().map(|c| sp.dealias(c)).collect();
            forcing = VectorField::from_components(comps)?;
        }
    }
    let du = projector.project(&forcing)?.solenoidal;
    Ok((du, dtheta))
}

/// Pressure `Pi` with `grad Pi` the gradient part of the momentum forcing.
pub fn eb_pressure(
    state: &BoussinesqState,
    grad_f: &VectorField,
    params: &SimParams,
    projector: &mut Projector,
) -> Result<ScalarField> {
    let forcing = momentum_forcing(state, grad_f, params, projector);
    Ok(projector.project(&forcing)?.potential)
}

/// One SSP-RK2 step; the velocity is re-projected after each stage and `r`
/// refreshed from `Theta`.
#[allow(clippy::too_many_arguments)]
pub fn step_eb(
    state: &BoussinesqState,
    f: &ScalarField,
    grad_f: &VectorField,
    params: &SimParams,
    projector: &mut Projector,
    dt: f64,
    dealias: bool,
) -> Result<BoussinesqState> {
    let (du0, dth0) = eb_rhs(state, grad_f, params, projector, dealias)?;
    let u1 = projector.project(&state.u.lin_comb(1.0, &du0, dt))?.solenoidal;
    let s1 = BoussinesqState::new(u1, state.theta.lin_comb(1.0, &dth0, dt), f, params, state.t + dt);
    let (du1, dth1) = eb_rhs(&s1, grad_f, params, projector, dealias)?;
    let u2 = s1.u.lin_comb(1.0, &du1, dt);
    let th2 = s1.theta.lin_comb(1.0, &dth1, dt);
    let u = projector.project(&state.u.lin_comb(0.5, &u2, 0.5))?.solenoidal;
    let theta = state.theta.lin_comb(0.5, &th2, 0.5);
    if !u.all_finite() || !theta.all_finite() {
        return Err(Error::NonFinite("step_eb"));
    }
    Ok(BoussinesqState::new(u, theta, f, params, state.t + dt))
}

#[derive(Debug, Clone)]
pub struct EbOptions {
    /// Advective Courant number.
    pub cfl: f64,
    /// Step cap, used when the flow is at rest.
    pub max_dt: f64,
    pub output_times: Vec<f64>,
    pub dealias: bool,
    pub poisson: PoissonMethod,
}

impl Default for EbOptions {
    fn default() -> Self {
        EbOptions { cfl: 0.1, max_dt: 1e-2, output_times: Vec::new(), dealias: false, poisson: PoissonMethod::Direct }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbDiagnostics {
    pub t: f64,
    pub div_linf: f64,
    pub kinetic_energy: f64,
    pub theta_l2: f64,
}

impl EbDiagnostics {
    pub const CSV_HEADER: &'static str = "t,div_Linf,kinetic_energy,theta_L2";

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e},{:.16e}", self.t, self.div_linf, self.kinetic_energy, self.theta_l2)
    }
}

#[derive(Debug, Clone)]
pub struct EbRun {
    pub diagnostics: Vec<EbDiagnostics>,
    pub snapshots: Vec<BoussinesqState>,
    pub final_state: BoussinesqState,
    /// First time the enstrophy exceeded ten times its initial value.
    pub lost_resolution: Option<f64>,
    pub steps: usize,
}

/// `int |curl U|^2`.
pub fn enstrophy(u: &VectorField, projector: &Projector) -> Result<f64> {
    let grid = projector.grid();
    let d = |f: &ScalarField, a: usize, odd: bool| projector.derivative(f, a, odd);
    let mut w2 = grid.zeros();
    let pairs: &[(usize, usize)] = if u.dim() == 2 { &[(0, 1)] } else { &[(0, 1), (1, 2), (2, 0)] };
    for &(a, b) in pairs {
        let w = d(u.comp(b), a, false).lin_comb(1.0, &d(u.comp(a), b, false), -1.0);
        for i in 0..w2.len() {
            w2[i] += w[i] * w[i];
        }
    }
    integrate(&w2, grid, None)
}

fn diagnose(state: &BoussinesqState, projector: &Projector) -> Result<EbDiagnostics> {
    let grid = projector.grid();
    let ke = 0.5 * vector_l2(&state.u, grid, None)?.powi(2);
    Ok(EbDiagnostics {
        t: state.t,
        div_linf: projector.divergence(&state.u)?.max_abs(),
        kinetic_energy: ke,
        theta_l2: norm(&state.theta, grid, NormKind::L2, None)?,
    })
}

/// Advances the limit system to `params.t_end`, landing on every output time.
pub fn run_eb(
    initial: BoussinesqState,
    grid: &Grid,
    params: &SimParams,
    potential: &PotentialSpec,
    options: &EbOptions,
) -> Result<EbRun> {
    let (f, grad_f) = eval_potential(potential, grid)?;
    let mut projector = Projector::with_method(grid, options.poisson)?;
    let mut targets: Vec<f64> =
        options.output_times.iter().copied().filter(|&t| t >= initial.t && t <= params.t_end).collect();
    targets.push(params.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut state = BoussinesqState::new(initial.u, initial.theta, &f, params, initial.t);
    let ens0 = enstrophy(&state.u, &projector)?;
    let mut lost_resolution = None;
    let mut diagnostics = vec![diagnose(&state, &projector)?];
    let mut snapshots = Vec::new();
    let mut next = 0;
    while next < targets.len() && targets[next] <= state.t {
        snapshots.push(state.clone());
        next += 1;
    }
    let mut steps = 0;
    while next < targets.len() {
        let target = targets[next];
        let umax = state.u.max_abs();
        let mut dt = if umax > 0.0 { options.cfl * grid.min_dx() / umax } else { options.max_dt };
        dt = dt.min(options.max_dt);
        let landing = state.t + dt >= target;
        if landing {
            dt = target - state.t;
        }
        state = step_eb(&state, &f, &grad_f, params, &mut projector, dt, options.dealias)?;
        steps += 1;
        if landing {
            state.t = target;
            diagnostics.push(diagnose(&state, &projector)?);
            snapshots.push(state.clone());
            next += 1;
            if lost_resolution.is_none() && ens0 > 0.0 && enstrophy(&state.u, &projector)? > 10.0 * ens0 {
                lost_resolution = Some(state.t);
            }
        }
    }
    Ok(EbRun { diagnostics, snapshots, final_state: state, lost_resolution, steps })
}
