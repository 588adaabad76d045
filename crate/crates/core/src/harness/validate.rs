//! Config-free invariant suite behind the `validate` subcommand.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acoustics::{
    acoustic_energy, acoustic_step, recover_rt, regularize, transport_w_between, zw_from_rt, AcousticState,
    RegularizationParams,
};
use crate::boussinesq::{boussinesq_r, fd_divergence, run_eb, step_eb, BoussinesqState, EbOptions, Projector};
use crate::error::Result;
use crate::euler_fv::{
    cons_from_prim, gravity_source, run_euler, ConservedState, EulerHook, EulerOptions, PrimitiveState, Scheme,
};
use crate::grid::{integrate, norm, BoundaryKind, Grid, NormKind, ScalarField, VectorField};
use crate::harness::{run_limit_study, ExperimentConfig};
use crate::params::SimParams;
use crate::potential::{eval_potential, PointMass, PotentialSpec};
use crate::relenergy::{defect_series, rel_energy_point, theorem_metrics, Variant};
use crate::spectral::Spectral;
use crate::thermo::{self, CutoffChi, EssResCutoff};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}::{} {}", self.module, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Outcome = Result<(bool, String)>;

struct Check {
    module: &'static str,
    name: &'static str,
    run: fn(u64) -> Outcome,
}

const CHECKS: &[Check] = &[
    Check { module: "core", name: "integrate_linear", run: integrate_linear },
    Check { module: "core", name: "norm_chain", run: norm_chain },
    Check { module: "core", name: "external_mass_harmonic", run: external_mass_harmonic },
    Check { module: "thermo", name: "chi_cutoff", run: chi_cutoff },
    Check { module: "thermo", name: "entropy_scaling", run: entropy_scaling },
    Check { module: "thermo", name: "kinetic_convexity", run: kinetic_convexity },
    Check { module: "thermo", name: "ess_res_split", run: ess_res_reconstruction },
    Check { module: "euler_fv", name: "conservation_f0", run: euler_conservation },
    Check { module: "euler_fv", name: "energy_budget", run: euler_energy_budget },
    Check { module: "euler_fv", name: "well_balanced_rest", run: euler_well_balanced },
    Check { module: "boussinesq", name: "divergence_free", run: eb_divergence },
    Check { module: "boussinesq", name: "theta_extrema", run: eb_theta_extrema },
    Check { module: "boussinesq", name: "r_consistency", run: eb_r_consistency },
    Check { module: "boussinesq", name: "taylor_green", run: eb_taylor_green },
    Check { module: "acoustics", name: "regularize_idempotent", run: acoustic_regularize },
    Check { module: "acoustics", name: "recover_round_trip", run: acoustic_round_trip },
    Check { module: "acoustics", name: "energy_conserved", run: acoustic_energy_conserved },
    Check { module: "acoustics", name: "t_tracks_theta", run: acoustic_t_tracks_theta },
    Check { module: "relenergy", name: "density_nonnegative", run: rel_density_nonnegative },
    Check { module: "relenergy", name: "chi_equals_plain", run: rel_chi_equality },
    Check { module: "relenergy", name: "metrics_are_norms", run: rel_metric_norms },
    Check { module: "harness", name: "determinism", run: harness_determinism },
];

/// Runs every check with generators derived from `seed`.
pub fn run_validation(seed: u64, mut progress: impl FnMut(&CheckResult)) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (k, c) in CHECKS.iter().enumerate() {
        let (passed, detail) = match (c.run)(seed.wrapping_add(k as u64)) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let res = CheckResult { module: c.module, name: c.name, passed, detail };
        progress(&res);
        report.checks.push(res);
    }
    report
}

fn periodic(n: usize) -> Result<Grid> {
    Grid::uniform(2, n, 1.0, BoundaryKind::Periodic)
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    ScalarField::from_fn(grid, |_| rng.gen_range(lo..hi))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// core

fn integrate_linear(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(2, &[24, 17], &[1.3, 0.7], &[BoundaryKind::Periodic, BoundaryKind::SlipWall])?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = random_field(&grid, &mut rng, -1.0, 1.0);
        let g = random_field(&grid, &mut rng, -1.0, 1.0);
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let lhs = integrate(&f.lin_comb(a, &g, b), &grid, None)?;
        let rhs = a * integrate(&f, &grid, None)? + b * integrate(&g, &grid, None)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst <= 1e-13, format!("max deviation {worst:.2e}")))
}

fn norm_chain(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(2, &[20, 12], &[2.0, 0.5], &[BoundaryKind::SlipWall; 2])?;
    let region = grid.central_half();
    let mut ok = true;
    for k in 0..40 {
        let f = random_field(&grid, &mut rng, -2.0, 2.0);
        let reg = if k % 2 == 0 { None } else { Some(&region) };
        let v = reg.map_or(grid.volume(), |r| r.volume(&grid));
        let l1 = norm(&f, &grid, NormKind::L1, reg)?;
        let l2 = norm(&f, &grid, NormKind::L2, reg)?;
        let li = norm(&f, &grid, NormKind::Linf, reg)?;
        let slack = 1e-12 * v * li;
        ok &= l1 <= v.sqrt() * l2 + slack && v.sqrt() * l2 <= v * li + slack;
    }
    Ok((ok, "L1 <= sqrt(V) L2 <= V Linf on 40 fields".into()))
}

fn external_mass_harmonic(_: u64) -> Outcome {
    let spec = PotentialSpec::ExternalMass {
        masses: vec![
            PointMass { position: vec![-0.4, 0.5], strength: 1.0 },
            PointMass { position: vec![1.3, 1.2], strength: 0.5 },
        ],
    };
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let grid = Grid::uniform(2, n, 1.0, BoundaryKind::SlipWall)?;
        let (f, _) = eval_potential(&spec, &grid)?;
        let h2 = grid.dx()[0] * grid.dx()[0];
        let mut worst: f64 = 0.0;
        for lin in 0..grid.len() {
            let mut lap = -4.0 * f[lin];
            let mut interior = true;
            for axis in 0..2 {
                for off in [-1, 1] {
                    match grid.neighbor(lin, axis, off) {
                        Some(j) => lap += f[j],
                        None => interior = false,
                    }
                }
            }
            if interior {
                worst = worst.max((lap / h2).abs());
            }
        }
        errs.push(worst);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&p| p >= 1.8);
    let errs: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    Ok((ok, format!("Linf {}, orders {orders:.2?}", errs.join(" "))))
}

// thermo

fn chi_cutoff(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    for _ in 0..10_000 {
        let a = rng.gen_range(-5.0..5.0);
        let b = a + rng.gen_range(1e-3..5.0);
        let chi = CutoffChi::new(a, b)?;
        let s = rng.gen_range(-20.0..20.0);
        let t = s + rng.gen_range(0.0..3.0);
        let (cs, ct) = (thermo::chi_apply(&chi, s), thermo::chi_apply(&chi, t));
        ok &= cs <= ct && ct - cs <= t - s + 1e-15 && cs <= b && ct <= b;
    }
    Ok((ok, "nondecreasing, 1-Lipschitz, bounded by b on 1e4 samples".into()))
}

fn entropy_scaling(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for c_v in [0.5, 1.5, 2.5, 7.0] {
        let d = thermo::entropy(2.0, 2.0, c_v) - (thermo::entropy(1.0, 1.0, c_v) - 2f64.ln());
        worst = worst.max(d.abs());
        for _ in 0..200 {
            let (rho, p, lam) = (rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0), rng.gen_range(0.1..10.0));
            let d = thermo::entropy(lam * rho, lam * p, c_v) - (thermo::entropy(rho, p, c_v) - lam.ln());
            worst = worst.max(d.abs());
        }
    }
    Ok((worst <= 1e-12, format!("max shift error {worst:.2e}")))
}

fn kinetic_convexity(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let x = (rng.gen_range(1e-3..4.0), [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
        let y = (rng.gen_range(1e-3..4.0), [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
        let mid = (0.5 * (x.0 + y.0), [0.5 * (x.1[0] + y.1[0]), 0.5 * (x.1[1] + y.1[1])]);
        let fx = thermo::extended_kinetic(x.0, &x.1);
        let fy = thermo::extended_kinetic(y.0, &y.1);
        let fm = thermo::extended_kinetic(mid.0, &mid.1);
        let gap = 0.5 * (fx + fy) - fm;
        worst = worst.min(gap / (1.0 + fx.abs() + fy.abs()));
    }
    Ok((worst >= -1e-14, format!("min midpoint gap {worst:.2e}")))
}

fn ess_res_reconstruction(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let cut = EssResCutoff::for_params(&params);
    let grid = periodic(16)?;
    let g = random_field(&grid, &mut rng, -5.0, 5.0);
    let rho = random_field(&grid, &mut rng, 0.2, 2.0);
    let p = random_field(&grid, &mut rng, 0.2, 2.0);
    let (ess, res) = thermo::ess_res_split(&g, &rho, &p, &cut)?;
    let mut recon: f64 = 0.0;
    for i in 0..g.len() {
        recon = recon.max((ess[i] + res[i] - g[i]).abs());
    }
    let bound = 4.0 / (cut.delta_out - cut.delta_in);
    let h = 1e-6;
    let mut steep: f64 = 0.0;
    for _ in 0..10_000 {
        let (r, q) = (rng.gen_range(0.3..1.7), rng.gen_range(0.3..1.7));
        let dr = (cut.weight(r + h, q) - cut.weight(r - h, q)) / (2.0 * h);
        let dp = (cut.weight(r, q + h) - cut.weight(r, q - h)) / (2.0 * h);
        steep = steep.max(dr.hypot(dp));
    }
    let ok = recon <= 1e-15 && steep <= bound;
    Ok((ok, format!("reconstruction {recon:.1e}, max |grad Phi_cut| {steep:.3} <= {bound:.3}")))
}

// euler_fv

fn smooth_state(grid: &Grid, params: &SimParams, seed: u64, flow: Option<&VectorField>) -> Result<ConservedState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3), rng.gen_range(0.0..2.0 * PI));
    let eps = params.epsilon;
    let tp = 2.0 * PI;
    let rho = ScalarField::from_fn(grid, |x| params.rho_bar + eps * a * (tp * x[0] + c).cos());
    let theta = ScalarField::from_fn(grid, |x| params.theta_bar + eps * b * (tp * x[1]).sin());
    let u = match flow {
        Some(u) => u.clone(),
        None => VectorField::from_fn(grid, |x| vec![0.3 * (tp * x[1]).sin(), 0.2 * (tp * x[0] + c).cos()]),
    };
    cons_from_prim(&PrimitiveState { rho, u, theta }, params)
}

fn euler_conservation(seed: u64) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.2, 1.5, 1.0, 1.0)?.with_t_end(0.2)?;
    let s0 = smooth_state(&grid, &params, seed, None)?;
    let opts = EulerOptions { diag_stride: 1, ..Default::default() }.with_scheme(Scheme::low_mach());
    let run = run_euler(s0, &grid, &params, &PotentialSpec::Zero, &opts, &mut [])?;
    let (first, last) = (run.diagnostics[0], *run.diagnostics.last().expect("diagnostics"));
    let dm = rel(last.mass, first.mass);
    let de = rel(last.energy, first.energy);
    let ok = dm <= 1e-12 && de <= 1e-11 && run.entropy_violations.is_empty() && run.floor_violations.is_empty();
    Ok((
        ok,
        format!(
            "mass {dm:.1e}, energy {de:.1e}, entropy flags {}, floor flags {}",
            run.entropy_violations.len(),
            run.floor_violations.len()
        ),
    ))
}

type SourceFn = fn(&ConservedState, &VectorField, &SimParams) -> ConservedState;

/// Integrates the energy rate of a gravity source over the trajectory with the
/// trapezoid rule, independently of the solver's own work bookkeeping.
struct WorkMeter {
    source: SourceFn,
    grad_f: VectorField,
    last: f64,
    total: f64,
}

impl WorkMeter {
    fn new(
        source: SourceFn,
        grad_f: VectorField,
        initial: &ConservedState,
        grid: &Grid,
        params: &SimParams,
    ) -> Result<Self> {
        let last = integrate(&source(initial, &grad_f, params).e_tot, grid, None)?;
        Ok(WorkMeter { source, grad_f, last, total: 0.0 })
    }
}

impl EulerHook for WorkMeter {
    fn after_step(&mut self, state: &mut ConservedState, grid: &Grid, params: &SimParams, dt: f64) -> Result<()> {
        let rate = integrate(&(self.source)(state, &self.grad_f, params).e_tot, grid, None)?;
        self.total += 0.5 * dt * (self.last + rate);
        self.last = rate;
        Ok(())
    }
}

fn energy_budget_with(seed: u64, source: SourceFn) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.2, 1.5, 1.0, 1.0)?.with_t_end(0.2)?.with_cfl(0.1)?;
    let pot = PotentialSpec::GaussianBump { amplitude: 1.0, center: vec![0.5, 0.5], width: 0.15 };
    let (_, grad_f) = eval_potential(&pot, &grid)?;
    // a flow with a component along grad F so that the work is not negligible
    let flow = VectorField::from_components(grad_f.components().iter().map(|c| c.map(|v| 0.05 * v)).collect())?;
    let s0 = smooth_state(&grid, &params, seed, Some(&flow))?;
    let mut meter = WorkMeter::new(source, grad_f, &s0, &grid, &params)?;
    let opts = EulerOptions { diag_stride: 1, ..Default::default() };
    let run = run_euler(s0, &grid, &params, &pot, &opts, &mut [&mut meter])?;
    let (first, last) = (run.diagnostics[0], *run.diagnostics.last().expect("diagnostics"));
    let gain = last.energy - first.energy;
    let budget = (gain - meter.total).abs() / meter.total.abs().max(gain.abs());
    let defects = defect_series(&run.diagnostics);
    let min_d = defects.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let monotone = defects.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-10);
    let ok = budget <= 1e-3 && min_d >= -1e-10 && monotone;
    Ok((ok, format!("energy gain {gain:.4e} vs work {:.4e} (rel {budget:.1e}), min D {min_d:.1e}", meter.total)))
}

fn euler_energy_budget(seed: u64) -> Outcome {
    energy_budget_with(seed, gravity_source)
}

fn euler_well_balanced(_: u64) -> Outcome {
    let grid = Grid::new(2, &[32, 32], &[1.0, 1.0], &[BoundaryKind::Periodic, BoundaryKind::SlipWall])?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?.with_t_end(0.2)?;
    let pot = PotentialSpec::GaussianBump { amplitude: 1.0, center: vec![0.5, 0.5], width: 0.2 };
    let (f, _) = eval_potential(&pot, &grid)?;
    let rho = f.map(|v| params.rho_bar * (params.epsilon * v / params.theta_bar).exp());
    let prim =
        PrimitiveState { rho, u: VectorField::zeros(&grid), theta: ScalarField::constant(&grid, params.theta_bar) };
    let s0 = cons_from_prim(&prim, &params)?;
    let opts = EulerOptions::default().with_scheme(Scheme::low_mach());
    let run = run_euler(s0, &grid, &params, &pot, &opts, &mut [])?;
    let drift = run.final_state.m.max_abs();
    Ok((drift <= 1e-10, format!("max |m| after t = 0.2: {drift:.1e}")))
}

// boussinesq

fn eb_flow(grid: &Grid, seed: u64) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0 * PI));
    let tp = 2.0 * PI;
    let raw = VectorField::from_fn(grid, |x| {
        vec![
            a * (tp * x[1] + b).sin() + 0.3 * (tp * x[0]).cos(),
            0.5 * (tp * x[0]).cos() - 0.2 * (2.0 * tp * x[1]).sin(),
        ]
    });
    Ok(Projector::new(grid)?.project(&raw)?.solenoidal)
}

fn eb_divergence(seed: u64) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let pot = PotentialSpec::GaussianBump { amplitude: 1.0, center: vec![0.5, 0.5], width: 0.2 };
    let (f, grad_f) = eval_potential(&pot, &grid)?;
    let theta = ScalarField::from_fn(&grid, |x| 0.3 * (2.0 * PI * x[0]).sin());
    let mut s = BoussinesqState::new(eb_flow(&grid, seed)?, theta, &f, &params, 0.0);
    let mut pr = Projector::new(&grid)?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        s = step_eb(&s, &f, &grad_f, &params, &mut pr, 2e-3, false)?;
        worst = worst.max(pr.divergence(&s.u)?.max_abs());
    }
    let fd = fd_divergence(&s.u, &grid).max_abs();
    Ok((worst <= 1e-8, format!("max spectral div {worst:.1e} (centered-difference div {fd:.1e})")))
}

fn eb_theta_extrema(seed: u64) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let f = grid.zeros();
    let grad_f = VectorField::zeros(&grid);
    let tp = 2.0 * PI;
    // extrema sit on cell centres, so the grid values of the exact solution
    // stay inside the initial range
    let (x0, y0) = (grid.center(0, 5), grid.center(1, 11));
    let theta = ScalarField::from_fn(&grid, |x| (tp * (x[0] - x0)).cos() * (tp * (x[1] - y0)).cos());
    let (hi, lo) = (theta.max(), theta.min());
    let mut s = BoussinesqState::new(eb_flow(&grid, seed)?, theta, &f, &params, 0.0);
    let mut pr = Projector::new(&grid)?;
    let (mut up, mut down): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        s = step_eb(&s, &f, &grad_f, &params, &mut pr, 1e-3, false)?;
        up = up.max(s.theta.max() - hi);
        down = down.max(lo - s.theta.min());
    }
    Ok((up <= 1e-8 && down <= 1e-8, format!("max rise {up:.1e}, max fall {down:.1e}")))
}

fn eb_r_consistency(seed: u64) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?.with_t_end(0.1)?;
    let pot = PotentialSpec::GaussianBump { amplitude: 1.0, center: vec![0.5, 0.5], width: 0.2 };
    let (f, _) = eval_potential(&pot, &grid)?;
    let theta = ScalarField::from_fn(&grid, |x| 0.2 * (2.0 * PI * x[1]).cos());
    let s0 = BoussinesqState::new(eb_flow(&grid, seed)?, theta.clone(), &f, &params, 0.0);
    let compat = {
        let k = params.rho_bar / params.theta_bar;
        let mut w: f64 = 0.0;
        for i in 0..grid.len() {
            w = w.max((s0.r[i] + k * theta[i] - k * f[i]).abs());
        }
        w
    };
    let outs: Vec<f64> = (1..=5).map(|k| 0.02 * k as f64).collect();
    let run = run_eb(s0, &grid, &params, &pot, &EbOptions { output_times: outs, ..Default::default() })?;
    let exact = run.snapshots.iter().all(|s| s.r == boussinesq_r(&s.theta, &f, &params));
    Ok((exact && compat <= 1e-15, format!("{} snapshots bit-exact, compatibility {compat:.1e}", run.snapshots.len())))
}

fn eb_taylor_green(_: u64) -> Outcome {
    let grid = periodic(64)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?.with_t_end(1.0)?;
    let tp = 2.0 * PI;
    let u = VectorField::from_fn(&grid, |x| {
        vec![(tp * x[0]).sin() * (tp * x[1]).cos(), -(tp * x[0]).cos() * (tp * x[1]).sin()]
    });
    let f = grid.zeros();
    let s0 = BoussinesqState::new(u.clone(), grid.zeros(), &f, &params, 0.0);
    let run = run_eb(s0, &grid, &params, &PotentialSpec::Zero, &EbOptions::default())?;
    let drift = crate::grid::vector_l2(&run.final_state.u.lin_comb(1.0, &u, -1.0), &grid, None)?;
    Ok((drift <= 1e-3, format!("L2 drift at t = 1: {drift:.1e}")))
}

// acoustics

fn acoustic_regularize(_: u64) -> Outcome {
    let grid = Grid::uniform(2, 32, 1.0, BoundaryKind::SlipWall)?;
    let rp = RegularizationParams::new(0.02)?;
    let f = ScalarField::from_fn(&grid, |x| (PI * x[0]).cos() + (3.0 * PI * x[1]).cos() * (2.0 * PI * x[0]).cos());
    let once = regularize(&f, &rp, &grid)?;
    let twice = regularize(&once, &rp, &grid)?;
    let d = twice.lin_comb(1.0, &once, -1.0).max_abs();
    Ok((d <= 1e-12, format!("|R(R f) - R f| = {d:.1e}")))
}

fn acoustic_round_trip(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = periodic(16)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let params = SimParams::new(0.1, rng.gen_range(0.5..4.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0))?;
        let f = random_field(&grid, &mut rng, -1.0, 1.0);
        let z = random_field(&grid, &mut rng, -2.0, 2.0);
        let w = random_field(&grid, &mut rng, -2.0, 2.0);
        let (r, t) = recover_rt(&z, &w, &f, &params);
        let (z2, w2) = zw_from_rt(&r, &t, &f, &params);
        worst = worst.max(z2.lin_comb(1.0, &z, -1.0).max_abs()).max(w2.lin_comb(1.0, &w, -1.0).max_abs());
    }
    Ok((worst <= 1e-13, format!("max round-trip error {worst:.1e}")))
}

fn acoustic_energy_conserved(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for grid in [periodic(32)?, Grid::new(2, &[24, 16], &[2.0, 1.0], &[BoundaryKind::SlipWall; 2])?] {
        let sp = Spectral::new(&grid)?;
        let mut s = AcousticState {
            phi: random_field(&grid, &mut rng, -1.0, 1.0),
            z: random_field(&grid, &mut rng, -1.0, 1.0),
            t: 0.0,
        };
        let e0 = acoustic_energy(&s, &sp, &params, None)?;
        for _ in 0..50 {
            s = acoustic_step(&s, &sp, &params, 0.0317);
        }
        worst = worst.max(rel(acoustic_energy(&s, &sp, &params, None)?, e0));
    }
    Ok((worst <= 1e-12, format!("relative drift {worst:.1e}")))
}

fn acoustic_t_tracks_theta(seed: u64) -> Outcome {
    let grid = periodic(32)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let tp = 2.0 * PI;
    let f = ScalarField::from_fn(&grid, |x| 0.3 * (tp * x[0]).cos());
    let grad_f = VectorField::from_fn(&grid, |x| vec![-0.3 * tp * (tp * x[0]).sin(), 0.0]);
    let theta = ScalarField::from_fn(&grid, |x| 0.2 * (tp * x[1]).sin());
    let mut eb = BoussinesqState::new(eb_flow(&grid, seed)?, theta, &f, &params, 0.0);
    let (z, mut w) = zw_from_rt(&eb.r, &eb.theta, &f, &params);
    let z_max = z.max_abs();
    let mut pr = Projector::new(&grid)?;
    let dt = 1e-3;
    for _ in 0..100 {
        let next = step_eb(&eb, &f, &grad_f, &params, &mut pr, dt, false)?;
        w = transport_w_between(&w, &eb.u, &next.u, &pr, dt);
        eb = next;
    }
    let (_, t) = recover_rt(&grid.zeros(), &w, &f, &params);
    let drift = t.lin_comb(1.0, &eb.theta, -1.0).max_abs();
    Ok((drift <= 1e-6 && z_max <= 1e-15, format!("max |T - Theta| at t = 0.1: {drift:.1e}")))
}

// relenergy

fn rel_density_nonnegative(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    for _ in 0..100_000 {
        let params = SimParams::new(rng.gen_range(0.01..1.0), rng.gen_range(0.5..3.0), 1.0, 1.0)?;
        let rho = rng.gen_range(0.0..3.0);
        let p = rng.gen_range(0.0..3.0);
        let m = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let rt = rng.gen_range(0.1..3.0);
        let ut = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let tt = rng.gen_range(0.1..3.0);
        min = min.min(rel_energy_point(rho, &m, p, rt, &ut, tt, &params, Variant::Plain));
    }
    Ok((min >= -1e-12, format!("min over 1e5 samples {min:.2e}")))
}

fn rel_chi_equality(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let cut = EssResCutoff::for_params(&params);
    let chi = cut.entropy_bounds(params.c_v)?;
    let mut tried = 0;
    let mut equal = true;
    while tried < 10_000 {
        let rho = rng.gen_range(0.5..1.5);
        let p = rng.gen_range(0.5..1.5);
        if !cut.is_core(rho, p) {
            continue;
        }
        tried += 1;
        let m = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let tt = rng.gen_range(0.9..1.1);
        let plain = rel_energy_point(rho, &m, p, 1.0, &[0.0, 0.0], tt, &params, Variant::Plain);
        let with_chi = rel_energy_point(rho, &m, p, 1.0, &[0.0, 0.0], tt, &params, Variant::Chi(chi));
        equal &= plain == with_chi;
    }
    Ok((equal, "bit-equal on 1e4 essential states".into()))
}

fn rel_metric_norms(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = periodic(16)?;
    let params = SimParams::new(0.1, 1.5, 1.0, 1.0)?;
    let f = grid.zeros();
    let eb = BoussinesqState::rest(&grid, &f, &params);
    let rest = ConservedState::uniform(&grid, params.rho_bar, &[0.0, 0.0], params.theta_bar, &params)?;
    let zero = theorem_metrics(&rest, &eb, &f, &grid, &params, None)?.as_array();
    let perturbed = |rng: &mut ChaCha8Rng| -> Result<ConservedState> {
        let prim = PrimitiveState {
            rho: random_field(&grid, rng, 0.9, 1.1),
            u: VectorField::from_components(vec![
                random_field(&grid, rng, -0.1, 0.1),
                random_field(&grid, rng, -0.1, 0.1),
            ])?,
            theta: random_field(&grid, rng, 0.9, 1.1),
        };
        cons_from_prim(&prim, &params)
    };
    let mut positive = true;
    let mut triangle = true;
    for _ in 0..20 {
        let a = perturbed(&mut rng)?;
        let b = perturbed(&mut rng)?;
        let ma = theorem_metrics(&a, &eb, &f, &grid, &params, None)?.as_array();
        positive &= ma.iter().all(|&v| v > 0.0);
        // L1 metrics of density: |a - b| <= |a - rest| + |b - rest|
        let ab = norm(&a.rho.lin_comb(1.0, &b.rho, -1.0), &grid, NormKind::L1, None)?;
        let mb = theorem_metrics(&b, &eb, &f, &grid, &params, None)?.as_array();
        triangle &= ab <= ma[0] + mb[0] + 1e-14;
    }
    let ok = zero.iter().all(|&v| v <= 1e-14) && positive && triangle;
    Ok((
        ok,
        format!(
            "zero at coincidence (max {:.1e}), positive and triangle on 20 pairs",
            zero.iter().fold(0.0f64, |a, &b| a.max(b))
        ),
    ))
}

// harness

const TINY_STUDY: &str = "
[grid]
n = 16
[physics]
t_end = 0.05
[potential]
kind = gaussian-bump
center = 0.5, 0.5
width = 0.2
[ic]
theta = cosine
theta.amplitude = 0.3
theta.modes = 1, 1
stream = cosine
stream.amplitude = 0.05
stream.modes = 1, 2
[run]
snapshots = 4
[study]
epsilons = 0.4, 0.2
";

struct ScratchDir(PathBuf);

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn harness_determinism(seed: u64) -> Outcome {
    let mut cfg = ExperimentConfig::parse(TINY_STUDY)?;
    cfg.seed = seed;
    let base = std::env::temp_dir().join(format!("lowmach-validate-{}-{seed}", std::process::id()));
    let dirs = [ScratchDir(base.join("a")), ScratchDir(base.join("b"))];
    let _root = ScratchDir(base.clone());
    for d in &dirs {
        run_limit_study(&cfg, &d.0, true)?;
    }
    let mut same = true;
    for name in ["relenergy.csv", "summary.csv", "eb.csv"] {
        same &= std::fs::read(dirs[0].0.join(name))? == std::fs::read(dirs[1].0.join(name))?;
    }
    Ok((same, "two identical studies write identical CSV files".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(cons: &ConservedState, grad_f: &VectorField, params: &SimParams) -> ConservedState {
        let mut s = gravity_source(cons, grad_f, params);
        s.e_tot = s.e_tot.map(|v| -v);
        s
    }

    #[test]
    fn energy_budget_passes_and_catches_a_sign_flip() {
        let (ok, detail) = energy_budget_with(7, gravity_source).unwrap();
        assert!(ok, "{detail}");
        let (ok, detail) = energy_budget_with(7, flipped).unwrap();
        assert!(!ok, "{detail}");
    }

    #[test]
    fn quick_checks_pass() {
        for f in
            [integrate_linear, norm_chain, chi_cutoff, entropy_scaling, ess_res_reconstruction, acoustic_round_trip]
        {
            let (ok, detail) = f(3).unwrap();
            assert!(ok, "{detail}");
        }
    }

    #[test]
    fn failures_become_report_lines() {
        let r = CheckResult { module: "m", name: "n", passed: false, detail: "x".into() };
        assert_eq!(r.line(), "FAIL m::n x");
        let rep = ValidationReport { checks: vec![r] };
        assert!(!rep.all_passed());
        assert_eq!(rep.failures().count(), 1);
    }
}
