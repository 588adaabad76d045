use rayon::prelude::*;

use super::flux::{hllc_prim, low_mach_fix, rusanov_prim, FluxKind, Prim, Reconstruction, Scheme, MAX_VARS};
use super::{cell_pressure, ConservedState};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, integrate, BoundaryKind, Grid, ScalarField, VectorField};
use crate::params::SimParams;
use crate::potential::{eval_potential, PotentialSpec};
use crate::thermo::{self, EssResCutoff, Renormalization};

/// Maximum stable step `cfl * min dx_a / (|u_a| + sqrt(gamma theta)/epsilon)`.
pub fn stable_dt(cons: &ConservedState, grid: &Grid, params: &SimParams) -> Result<f64> {
    let p = cons.pressure(params)?;
    let gamma = params.gamma();
    let mut best = f64::INFINITY;
    for i in 0..cons.len() {
        let c = (gamma * p[i] / cons.rho[i]).sqrt() / params.epsilon;
        for a in 0..grid.dim() {
            let u = (cons.m.comp(a)[i] / cons.rho[i]).abs();
            best = best.min(grid.dx()[a] / (u + c));
        }
    }
    Ok(params.cfl * best)
}

struct Rates {
    rho: Vec<f64>,
    m: Vec<Vec<f64>>,
    e: Vec<f64>,
}

struct PrimArrays {
    rho: Vec<f64>,
    u: Vec<Vec<f64>>,
    p: Vec<f64>,
}

fn primitives(cons: &ConservedState, params: &SimParams) -> std::result::Result<PrimArrays, (usize, String)> {
    let dim = cons.dim();
    let n = cons.len();
    let mut u = vec![vec![0.0; n]; dim];
    let mut p = vec![0.0; n];
    let mut mv = [0.0; 3];
    for i in 0..n {
        let rho = cons.rho[i];
        for a in 0..dim {
            mv[a] = cons.m.comp(a)[i];
        }
        let pi = cell_pressure(rho, &mv[..dim], cons.e_tot[i], params);
        if !(rho > 0.0 && pi > 0.0 && pi.is_finite()) {
            return Err((i, format!("rho = {rho}, p = {pi}")));
        }
        for a in 0..dim {
            u[a][i] = mv[a] / rho;
        }
        p[i] = pi;
    }
    Ok(PrimArrays { rho: cons.rho.as_slice().to_vec(), u, p })
}

fn line_starts(grid: &Grid, axis: usize) -> Vec<usize> {
    let mut hi = grid.n().to_vec();
    hi[axis] = 1;
    crate::grid::Region::new(vec![0; grid.dim()], hi).cells(grid)
}

/// Flux divergence along one grid line, returned as `-(F_{i+1/2} - F_{i-1/2})/dx`
/// for every cell of the line.
fn line_update(
    prim: &PrimArrays,
    grid: &Grid,
    axis: usize,
    start: usize,
    params: &SimParams,
    scheme: Scheme,
    eq: Option<&Equilibrium>,
) -> Vec<Prim> {
    let dim = grid.dim();
    let n = grid.n()[axis] as isize;
    let stride = grid.strides()[axis];
    let periodic = grid.boundary()[axis] == BoundaryKind::Periodic;
    let ng = 2isize;

    let mut q: Vec<Prim> = Vec::with_capacity((n + 2 * ng) as usize);
    for j in -ng..n + ng {
        let (src, flip) = if (0..n).contains(&j) {
            (j, false)
        } else if periodic {
            (j.rem_euclid(n), false)
        } else if j < 0 {
            (-1 - j, true)
        } else {
            (2 * n - 1 - j, true)
        };
        let lin = start + src as usize * stride;
        let mut v = [0.0; MAX_VARS];
        v[0] = prim.rho[lin];
        for a in 0..dim {
            v[1 + a] = prim.u[a][lin];
        }
        if flip {
            v[1 + axis] = -v[1 + axis];
        }
        v[dim + 1] = prim.p[lin];
        q.push(v);
    }

    let nv = dim + 2;
    let padded_src = |j: isize| -> usize {
        let src = if (0..n).contains(&j) {
            j
        } else if periodic {
            j.rem_euclid(n)
        } else if j < 0 {
            -1 - j
        } else {
            2 * n - 1 - j
        };
        start + src as usize * stride
    };
    // equilibrium (rho, p) at padded cells and faces
    let (eq_cells, eq_faces): (Vec<[f64; 2]>, Vec<[f64; 2]>) = match eq {
        Some(e) => {
            let cells = (-ng..n + ng).map(|j| e.cell(padded_src(j))).collect();
            let faces = (0..=n)
                .map(|f| if f < n { e.lower(axis, padded_src(f)) } else { e.upper(axis, padded_src(n - 1)) })
                .collect();
            for (v, c) in q.iter_mut().zip(&cells) {
                let c: &[f64; 2] = c;
                v[0] -= c[0];
                v[dim + 1] -= c[1];
            }
            (cells, faces)
        }
        None => (Vec::new(), Vec::new()),
    };
    // half-slopes for padded cells 1..n+2 (cells -1..n)
    let mut half = vec![[0.0; MAX_VARS]; q.len()];
    if let Reconstruction::Muscl(lim) = scheme.reconstruction {
        for j in 1..q.len() - 1 {
            for k in 0..nv {
                half[j][k] = 0.5 * lim.slope(q[j][k] - q[j - 1][k], q[j + 1][k] - q[j][k]);
            }
        }
    }

    let inv_dx = 1.0 / grid.dx()[axis];
    let mut faces: Vec<Prim> = Vec::with_capacity(n as usize + 1);
    // face f sits between padded cells f+1 and f+2, i.e. cells f-1 and f
    for f in 0..=n as usize {
        let (jl, jr) = (f + 1, f + 2);
        let mut l = q[jl];
        let mut r = q[jr];
        for k in 0..nv {
            l[k] += half[jl][k];
            r[k] -= half[jr][k];
        }
        let mut base_l = q[jl];
        let mut base_r = q[jr];
        if eq.is_some() {
            let e = eq_faces[f];
            for v in [&mut l, &mut r, &mut base_l, &mut base_r] {
                v[0] += e[0];
                v[dim + 1] += e[1];
            }
        }
        if !(l[0] > 0.0 && r[0] > 0.0 && l[dim + 1] > 0.0 && r[dim + 1] > 0.0) {
            l = base_l;
            r = base_r;
            if eq.is_some() && !(l[0] > 0.0 && r[0] > 0.0 && l[dim + 1] > 0.0 && r[dim + 1] > 0.0) {
                l = q[jl];
                r = q[jr];
                for (v, c) in [(&mut l, eq_cells[jl]), (&mut r, eq_cells[jr])] {
                    v[0] += c[0];
                    v[dim + 1] += c[1];
                }
            }
        }
        if scheme.low_mach {
            low_mach_fix(&mut l, &mut r, dim, params);
        }
        faces.push(match scheme.flux {
            FluxKind::Rusanov => rusanov_prim(&l, &r, dim, axis, params),
            FluxKind::Hllc => hllc_prim(&l, &r, dim, axis, params),
        });
    }
    (0..n as usize)
        .map(|i| {
            let mut d = [0.0; MAX_VARS];
            for k in 0..nv {
                d[k] = -(faces[i + 1][k] - faces[i][k]) * inv_dx;
            }
            d
        })
        .collect()
}

/// Isothermal hydrostatic profile `p = rho_bar theta_bar exp(eps F / theta_bar)`,
/// `rho = p / theta_bar`, at cell centres and at both faces of every cell.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    p: Vec<f64>,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
    theta_bar: f64,
}

impl Equilibrium {
    pub fn new(potential: &PotentialSpec, grid: &Grid, params: &SimParams) -> Result<Self> {
        potential.validate(grid)?;
        let prof = |x: &[f64]| {
            let (f, _) = potential.eval_point(grid, x);
            params.p_bar() * (params.epsilon * f / params.theta_bar).exp()
        };
        let p = (0..grid.len()).map(|i| prof(&grid.position(i))).collect();
        let mut lower = Vec::with_capacity(grid.dim());
        let mut upper = Vec::with_capacity(grid.dim());
        for a in 0..grid.dim() {
            let h = 0.5 * grid.dx()[a];
            let at = |i: usize, sign: f64| {
                let mut x = grid.position(i);
                x[a] += sign * h;
                prof(&x)
            };
            lower.push((0..grid.len()).map(|i| at(i, -1.0)).collect());
            upper.push((0..grid.len()).map(|i| at(i, 1.0)).collect());
        }
        Ok(Equilibrium { p, lower, upper, theta_bar: params.theta_bar })
    }

    /// Pressure profile at cell centres.
    pub fn pressure(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_vec(grid, self.p.clone()).expect("shape")
    }

    fn pair(&self, p: f64) -> [f64; 2] {
        [p / self.theta_bar, p]
    }

    fn cell(&self, lin: usize) -> [f64; 2] {
        self.pair(self.p[lin])
    }

    fn lower(&self, axis: usize, lin: usize) -> [f64; 2] {
        self.pair(self.lower[axis][lin])
    }

    fn upper(&self, axis: usize, lin: usize) -> [f64; 2] {
        self.pair(self.upper[axis][lin])
    }

    /// Discrete `grad F` for which `rho grad F / eps` cancels the face-difference
    /// pressure gradient of the profile exactly.
    pub fn balanced_gradient(&self, grid: &Grid, params: &SimParams) -> VectorField {
        let comps = (0..grid.dim())
            .map(|a| {
                let mut g = grid.zeros();
                for i in 0..grid.len() {
                    let rho_eq = self.p[i] / self.theta_bar;
                    g[i] = (self.upper[a][i] - self.lower[a][i]) / (grid.dx()[a] * params.epsilon * rho_eq);
                }
                g
            })
            .collect();
        VectorField::from_components(comps).expect("shape")
    }
}

/// Semi-discrete right-hand side and the rate of work `(1/eps) int m . grad F`.
fn rhs(
    cons: &ConservedState,
    grid: &Grid,
    grad_f: &VectorField,
    params: &SimParams,
    scheme: Scheme,
    eq: Option<&Equilibrium>,
) -> std::result::Result<(Rates, f64), (usize, String)> {
    let dim = grid.dim();
    let n = grid.len();
    let prim = primitives(cons, params)?;
    let mut rates = Rates { rho: vec![0.0; n], m: vec![vec![0.0; n]; dim], e: vec![0.0; n] };
    for axis in 0..dim {
        let starts = line_starts(grid, axis);
        let updates: Vec<Vec<Prim>> =
            starts.par_iter().map(|&s| line_update(&prim, grid, axis, s, params, scheme, eq)).collect();
        let stride = grid.strides()[axis];
        for (s, upd) in starts.iter().zip(updates) {
            for (i, d) in upd.iter().enumerate() {
                let lin = s + i * stride;
                rates.rho[lin] += d[0];
                for a in 0..dim {
                    rates.m[a][lin] += d[1 + a];
                }
                rates.e[lin] += d[dim + 1];
            }
        }
    }
    let inv_eps = 1.0 / params.epsilon;
    let mut work = Vec::with_capacity(n);
    for i in 0..n {
        let mut mg = 0.0;
        for a in 0..dim {
            let g = grad_f.comp(a)[i];
            rates.m[a][i] += inv_eps * cons.rho[i] * g;
            mg += cons.m.comp(a)[i] * g;
        }
        let src = inv_eps * mg;
        rates.e[i] += src;
        work.push(src);
    }
    let w = compensated_sum(work) * grid.cell_volume();
    Ok((rates, w))
}

fn axpy(base: &ConservedState, dt: f64, r: &Rates) -> ConservedState {
    let mut out = base.clone();
    for (v, d) in out.rho.as_mut_slice().iter_mut().zip(&r.rho) {
        *v += dt * d;
    }
    for (a, ra) in r.m.iter().enumerate() {
        for (v, d) in out.m.comp_mut(a).as_mut_slice().iter_mut().zip(ra) {
            *v += dt * d;
        }
    }
    for (v, d) in out.e_tot.as_mut_slice().iter_mut().zip(&r.e) {
        *v += dt * d;
    }
    out
}

fn average(a: &ConservedState, b: &ConservedState) -> ConservedState {
    let mut out = a.lin_comb_half(b);
    out.t = a.t;
    out
}

impl ConservedState {
    fn lin_comb_half(&self, other: &ConservedState) -> ConservedState {
        ConservedState {
            rho: self.rho.lin_comb(0.5, &other.rho, 0.5),
            m: self.m.lin_comb(0.5, &other.m, 0.5),
            e_tot: self.e_tot.lin_comb(0.5, &other.e_tot, 0.5),
            t: self.t,
        }
    }
}

/// One SSP-RK2 step with an explicit reconstruction; also returns the work
/// `(1/eps) int m . grad F` done over the step, integrated with the same
/// two-stage weights as the energy equation.
pub(crate) fn step_with_work(
    cons: &ConservedState,
    grid: &Grid,
    grad_f: &VectorField,
    params: &SimParams,
    dt: f64,
    scheme: Scheme,
    eq: Option<&Equilibrium>,
) -> Result<(ConservedState, f64)> {
    let lost = |(cell, reason): (usize, String)| Error::PositivityLoss { t: cons.t, cell, reason };
    let (r0, w0) = rhs(cons, grid, grad_f, params, scheme, eq).map_err(lost)?;
    let q1 = axpy(cons, dt, &r0);
    let (r1, w1) = rhs(&q1, grid, grad_f, params, scheme, eq).map_err(lost)?;
    let q2 = axpy(&q1, dt, &r1);
    let mut out = average(cons, &q2);
    out.t = cons.t + dt;
    if let Err((cell, reason)) = primitives(&out, params) {
        return Err(Error::PositivityLoss { t: out.t, cell, reason });
    }
    Ok((out, 0.5 * dt * (w0 + w1)))
}

/// Advances the state by `dt` with the default reconstruction.
pub fn step(
    cons: &ConservedState,
    grid: &Grid,
    grad_f: &VectorField,
    params: &SimParams,
    dt: f64,
) -> Result<ConservedState> {
    Ok(step_with_work(cons, grid, grad_f, params, dt, Scheme::default(), None)?.0)
}

/// Post-step modification of the state, invoked on the stepping thread.
pub trait EulerHook {
    fn after_step(&mut self, state: &mut ConservedState, grid: &Grid, params: &SimParams, dt: f64) -> Result<()>;
}

/// Removes energy uniformly at a fixed total rate.
#[derive(Debug, Clone, Copy)]
pub struct EnergyDrain {
    pub rate: f64,
}

impl EulerHook for EnergyDrain {
    fn after_step(&mut self, state: &mut ConservedState, grid: &Grid, _: &SimParams, dt: f64) -> Result<()> {
        let per_cell = self.rate * dt / grid.volume();
        for v in state.e_tot.as_mut_slice() {
            *v -= per_cell;
        }
        Ok(())
    }
}

/// Sponge for the compressible solver: damps momentum and relaxes pressure
/// isentropically toward the isothermal hydrostatic profile
/// `rho_bar theta_bar exp(epsilon F / theta_bar)`.
#[derive(Debug, Clone)]
pub struct HydrostaticSponge {
    sigma: ScalarField,
    p_ref: ScalarField,
}

impl HydrostaticSponge {
    pub fn new(sigma: ScalarField, f: &ScalarField, params: &SimParams) -> Self {
        let p_ref = f.map(|fv| params.p_bar() * (params.epsilon * fv / params.theta_bar).exp());
        HydrostaticSponge { sigma, p_ref }
    }
}

impl EulerHook for HydrostaticSponge {
    fn after_step(&mut self, state: &mut ConservedState, _: &Grid, params: &SimParams, dt: f64) -> Result<()> {
        let dim = state.dim();
        let inv_gamma = 1.0 / params.gamma();
        let scale = params.c_v / (params.epsilon * params.epsilon);
        let mut mv = [0.0; 3];
        for i in 0..state.len() {
            let s = self.sigma[i];
            if s <= 0.0 {
                continue;
            }
            let k = (-s * dt).exp();
            let rho = state.rho[i];
            for a in 0..dim {
                mv[a] = state.m.comp(a)[i];
            }
            let p = cell_pressure(rho, &mv[..dim], state.e_tot[i], params);
            let p_new = self.p_ref[i] + k * (p - self.p_ref[i]);
            let rho_new = rho * (p_new / p).powf(inv_gamma);
            let mut ke = 0.0;
            for a in 0..dim {
                let m = k * mv[a];
                state.m.comp_mut(a)[i] = m;
                ke += m * m;
            }
            state.rho[i] = rho_new;
            state.e_tot[i] = 0.5 * ke / rho_new + scale * p_new;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EulerOptions {
    pub reconstruction: Reconstruction,
    pub flux: FluxKind,
    pub low_mach: bool,
    pub well_balanced: bool,
    /// Times at which snapshots are kept; `t_end` is always appended.
    pub output_times: Vec<f64>,
    /// Record diagnostics every `diag_stride` steps as well as at output times.
    pub diag_stride: usize,
    /// Renormalisation for the entropy diagnostic; `None` uses the clamp whose
    /// bounds cover the essential entropy range.
    pub renormalization: Option<Renormalization>,
    pub tol_s: f64,
    pub max_steps: usize,
    pub keep_snapshots: bool,
}

impl Default for EulerOptions {
    fn default() -> Self {
        EulerOptions {
            reconstruction: Reconstruction::default(),
            flux: FluxKind::Rusanov,
            low_mach: false,
            well_balanced: false,
            output_times: Vec::new(),
            diag_stride: 1,
            renormalization: None,
            tol_s: 1e-8,
            max_steps: 10_000_000,
            keep_snapshots: true,
        }
    }
}

impl EulerOptions {
    pub fn scheme(&self) -> Scheme {
        Scheme {
            reconstruction: self.reconstruction,
            flux: self.flux,
            low_mach: self.low_mach,
            well_balanced: self.well_balanced,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.reconstruction = scheme.reconstruction;
        self.flux = scheme.flux;
        self.low_mach = scheme.low_mach;
        self.well_balanced = scheme.well_balanced;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// Cumulative `(1/eps) int_0^t int m . grad F`.
    pub work_integral: f64,
    pub entropy_chi: f64,
    pub min_entropy: f64,
    pub dt: f64,
}

impl EulerDiagnostics {
    pub const CSV_HEADER: &'static str = "t,mass,energy,work_integral,entropy_chi,min_entropy,dt";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t, self.mass, self.energy, self.work_integral, self.entropy_chi, self.min_entropy, self.dt
        )
    }
}

#[derive(Debug, Clone)]
pub struct EulerRun {
    pub diagnostics: Vec<EulerDiagnostics>,
    /// States at the requested output times, in order.
    pub snapshots: Vec<ConservedState>,
    pub final_state: ConservedState,
    /// Recorded times where `int rho chi(s)` dropped by more than `1e-8 (1 + |S|)`.
    pub entropy_violations: Vec<f64>,
    /// Recorded times where the entropy floor failed although it held initially.
    pub floor_violations: Vec<f64>,
    pub steps: usize,
}

fn record(
    state: &ConservedState,
    grid: &Grid,
    params: &SimParams,
    chi: &Renormalization,
    work: f64,
    dt: f64,
) -> Result<EulerDiagnostics> {
    let p = state.pressure(params)?;
    let mut rho_chi = grid.zeros();
    let mut min_entropy = f64::INFINITY;
    for i in 0..state.len() {
        let s = thermo::entropy(state.rho[i], p[i], params.c_v);
        min_entropy = min_entropy.min(s);
        rho_chi[i] = state.rho[i] * chi.apply(s);
    }
    Ok(EulerDiagnostics {
        t: state.t,
        mass: integrate(&state.rho, grid, None)?,
        energy: integrate(&state.e_tot, grid, None)?,
        work_integral: work,
        entropy_chi: integrate(&rho_chi, grid, None)?,
        min_entropy,
        dt,
    })
}

/// Advances `initial` to `params.t_end`, landing exactly on every output time.
pub fn run_euler(
    initial: ConservedState,
    grid: &Grid,
    params: &SimParams,
    potential: &PotentialSpec,
    options: &EulerOptions,
    hooks: &mut [&mut dyn EulerHook],
) -> Result<EulerRun> {
    params.validate()?;
    initial.check_grid(grid)?;
    let (_, mut grad_f) = eval_potential(potential, grid)?;
    let scheme = options.scheme();
    let eq = if scheme.well_balanced {
        let e = Equilibrium::new(potential, grid, params)?;
        grad_f = e.balanced_gradient(grid, params);
        Some(e)
    } else {
        None
    };
    let chi = match options.renormalization {
        Some(c) => c,
        None => Renormalization::Clamp(EssResCutoff::for_params(params).entropy_bounds(params.c_v)?),
    };
    let t_end = params.t_end;
    let mut targets: Vec<f64> =
        options.output_times.iter().copied().filter(|&t| t >= initial.t && t <= t_end).collect();
    targets.push(t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut state = initial;
    state.pressure(params)?;
    let mut work = 0.0;
    let mut diagnostics = vec![record(&state, grid, params, &chi, work, 0.0)?];
    let mut snapshots = Vec::new();
    let mut next = 0;
    while next < targets.len() && targets[next] <= state.t {
        if options.keep_snapshots {
            snapshots.push(state.clone());
        }
        next += 1;
    }
    let p0 = state.pressure(params)?;
    let floor_holds_initially = thermo::entropy_floor_check(&state.rho, &p0, params, options.tol_s).ok;
    let mut entropy_violations = Vec::new();
    let mut floor_violations = Vec::new();
    let mut steps = 0;

    while next < targets.len() {
        if steps >= options.max_steps {
            return Err(Error::Unsupported(format!("step limit {} reached at t = {}", options.max_steps, state.t)));
        }
        let target = targets[next];
        let mut dt = stable_dt(&state, grid, params)?;
        let landing = state.t + dt >= target;
        if landing {
            dt = target - state.t;
        }
        let (mut new_state, w) = step_with_work(&state, grid, &grad_f, params, dt, scheme, eq.as_ref())?;
        if landing {
            new_state.t = target;
        }
        for h in hooks.iter_mut() {
            h.after_step(&mut new_state, grid, params, dt)?;
        }
        if let Err(Error::InvalidState { cell, reason }) = new_state.pressure(params) {
            return Err(Error::PositivityLoss { t: new_state.t, cell, reason });
        }
        state = new_state;
        work += w;
        steps += 1;
        if landing || steps % options.diag_stride.max(1) == 0 {
            let d = record(&state, grid, params, &chi, work, dt)?;
            let prev = diagnostics.last().expect("initial record").entropy_chi;
            if d.entropy_chi < prev - 1e-8 * (1.0 + prev.abs()) {
                entropy_violations.push(d.t);
            }
            if floor_holds_initially && d.min_entropy < params.s_floor - options.tol_s {
                floor_violations.push(d.t);
            }
            diagnostics.push(d);
        }
        if landing {
            if options.keep_snapshots {
                snapshots.push(state.clone());
            }
            next += 1;
        }
    }
    Ok(EulerRun { diagnostics, snapshots, final_state: state, entropy_violations, floor_violations, steps })
}
