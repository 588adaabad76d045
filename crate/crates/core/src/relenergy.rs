//! Relative energy with respect to a smooth comparison triple, the dissipation
//! defect of a recorded run, coercivity diagnostics and the convergence metrics
//! against the limit system.

use crate::boussinesq::BoussinesqState;
use crate::error::{Error, Result};
use crate::euler_fv::{ConservedState, EulerDiagnostics};
use crate::grid::{integrate, norm, Grid, NormKind, Region, ScalarField, VectorField};
use crate::params::SimParams;
use crate::thermo::{self, CutoffChi, EssResCutoff};

/// `(rho~, U~, theta~)`; `p~ = rho~ theta~`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTriple {
    pub rho: ScalarField,
    pub u: VectorField,
    pub theta: ScalarField,
}

impl ComparisonTriple {
    pub fn new(rho: ScalarField, u: VectorField, theta: ScalarField) -> Result<Self> {
        if rho.shape() != theta.shape() || u.comp(0).shape() != rho.shape() {
            return Err(Error::ShapeMismatch("comparison triple fields are not congruent".into()));
        }
        for i in 0..rho.len() {
            if !(rho[i] > 0.0 && theta[i] > 0.0) {
                return Err(Error::InvalidState { cell: i, reason: "comparison triple must be positive".into() });
            }
        }
        Ok(ComparisonTriple { rho, u, theta })
    }

    /// `(rho_bar + eps r, U, theta_bar + eps Theta)`.
    pub fn well_prepared(eb: &BoussinesqState, params: &SimParams) -> Result<Self> {
        let eps = params.epsilon;
        Self::new(eb.r.map(|r| params.rho_bar + eps * r), eb.u.clone(), eb.theta.map(|t| params.theta_bar + eps * t))
    }

    /// `(rho_bar + eps R, U + grad Phi, theta_bar + eps T)`.
    pub fn ill_prepared(
        u: &VectorField,
        grad_phi: &VectorField,
        r: &ScalarField,
        t: &ScalarField,
        params: &SimParams,
    ) -> Result<Self> {
        let eps = params.epsilon;
        Self::new(
            r.map(|v| params.rho_bar + eps * v),
            u.lin_comb(1.0, grad_phi, 1.0),
            t.map(|v| params.theta_bar + eps * v),
        )
    }

    pub fn pressure(&self) -> ScalarField {
        self.rho.zip_map(&self.theta, |r, t| r * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Plain,
    Chi(CutoffChi),
}

/// One-cell relative energy. `rho` and `p` may touch zero, where the singular
/// terms take their lower semicontinuous extensions.
pub fn rel_energy_point(
    rho: f64,
    m: &[f64],
    p: f64,
    rho_t: f64,
    u_t: &[f64],
    theta_t: f64,
    params: &SimParams,
    variant: Variant,
) -> f64 {
    let eps2 = params.epsilon * params.epsilon;
    let c_v = params.c_v;
    let p_t = rho_t * theta_t;
    let s_t = thermo::entropy(rho_t, p_t, c_v);
    let mu: f64 = m.iter().zip(u_t).map(|(a, b)| a * b).sum();
    let u2: f64 = u_t.iter().map(|v| v * v).sum();
    let kinetic = thermo::extended_kinetic(rho, m) - mu + 0.5 * rho * u2;
    let rho_s = match variant {
        // same expression as the chi branch in the interior, so an identity
        // cutoff reproduces it bit for bit
        Variant::Plain if rho > 0.0 && p > 0.0 => rho * thermo::entropy(rho, p, c_v),
        Variant::Plain => c_v * thermo::extended_rho_s(rho, p, params.gamma()),
        Variant::Chi(chi) => {
            if rho == 0.0 {
                0.0
            } else {
                let s = if p > 0.0 { thermo::entropy(rho, p, c_v) } else { f64::NEG_INFINITY };
                rho * chi.apply(s)
            }
        }
    };
    let internal = c_v * (p - rho * theta_t) - theta_t * (rho_s - rho * s_t) + (p_t - rho * theta_t);
    kinetic + internal / eps2
}

fn check_state(rho: &ScalarField, p: &ScalarField, triple: &ComparisonTriple) -> Result<()> {
    if rho.shape() != p.shape() || rho.shape() != triple.rho.shape() {
        return Err(Error::ShapeMismatch("state and comparison triple differ in shape".into()));
    }
    for i in 0..rho.len() {
        if !(rho[i] >= 0.0 && p[i] >= 0.0) {
            return Err(Error::InvalidState { cell: i, reason: format!("rho = {}, p = {}", rho[i], p[i]) });
        }
    }
    Ok(())
}

/// Pointwise relative energy `E^eps` (plain) or `E^eps_chi`.
pub fn rel_energy_density(
    rho: &ScalarField,
    m: &VectorField,
    p: &ScalarField,
    triple: &ComparisonTriple,
    params: &SimParams,
    variant: Variant,
) -> Result<ScalarField> {
    check_state(rho, p, triple)?;
    let mut out = ScalarField::zeros_like(rho);
    for i in 0..rho.len() {
        out[i] =
            rel_energy_point(rho[i], &m.at(i), p[i], triple.rho[i], &triple.u.at(i), triple.theta[i], params, variant);
    }
    Ok(out)
}

pub fn rel_energy_total(
    cons: &ConservedState,
    triple: &ComparisonTriple,
    grid: &Grid,
    params: &SimParams,
    variant: Variant,
    region: Option<&Region>,
) -> Result<f64> {
    let p = cons.pressure(params)?;
    let dens = rel_energy_density(&cons.rho, &cons.m, &p, triple, params, variant)?;
    integrate(&dens, grid, region)
}

/// `D(tau) = E(0) - E(tau) + (1/eps) int_0^tau int m . grad F`, read off the
/// recorded energy and work series with linear interpolation in time.
pub fn dissipation_defect(diagnostics: &[EulerDiagnostics], tau: f64) -> Result<f64> {
    let first = diagnostics.first().ok_or_else(|| Error::Precondition("empty diagnostics".into()))?;
    let last = diagnostics.last().expect("non-empty");
    if !(tau >= first.t && tau <= last.t) {
        return Err(Error::OutOfRange { tau, t_min: first.t, t_max: last.t });
    }
    let k = diagnostics.partition_point(|d| d.t < tau);
    let d_at = |d: &EulerDiagnostics| first.energy - d.energy + d.work_integral - first.work_integral;
    let b = &diagnostics[k];
    if b.t == tau || k == 0 {
        return Ok(d_at(b));
    }
    let a = &diagnostics[k - 1];
    let w = (tau - a.t) / (b.t - a.t);
    Ok((1.0 - w) * d_at(a) + w * d_at(b))
}

/// `(t, D(t))` at every recorded time.
pub fn defect_series(diagnostics: &[EulerDiagnostics]) -> Vec<(f64, f64)> {
    let Some(first) = diagnostics.first() else { return Vec::new() };
    diagnostics.iter().map(|d| (d.t, first.energy - d.energy + d.work_integral - first.work_integral)).collect()
}

/// Below this (times `eps^-2`) the right-hand side is at round-off level and
/// the ratio carries no information.
pub const COERCIVITY_RHS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    /// Smallest `E / RHS` over cells with `RHS` above [`COERCIVITY_RHS_FLOOR`]`/eps^2`;
    /// infinite when there are none.
    pub min_ratio: f64,
    pub argmin: Option<usize>,
    pub cells_with_rhs: usize,
}

/// Compares `E^eps` against
/// `rho |m/rho - U~|^2 + eps^-2 [|rho - rho~|^2 + |p - p~|^2]_ess + eps^-2 [1 + rho + rho|s| + p]_res`.
pub fn coercivity_check(
    rho: &ScalarField,
    m: &VectorField,
    p: &ScalarField,
    triple: &ComparisonTriple,
    cutoff: &EssResCutoff,
    params: &SimParams,
) -> Result<CoercivityReport> {
    check_state(rho, p, triple)?;
    for i in 0..rho.len() {
        let (rt, pt) = (triple.rho[i], triple.rho[i] * triple.theta[i]);
        if !cutoff.is_core(rt, pt) {
            return Err(Error::Precondition(format!(
                "comparison state ({rt}, {pt}) at cell {i} leaves the essential core"
            )));
        }
    }
    let eps2 = params.epsilon * params.epsilon;
    let mut report = CoercivityReport { min_ratio: f64::INFINITY, argmin: None, cells_with_rhs: 0 };
    for i in 0..rho.len() {
        let mi = m.at(i);
        let ut = triple.u.at(i);
        let (rt, tt) = (triple.rho[i], triple.theta[i]);
        let lhs = rel_energy_point(rho[i], &mi, p[i], rt, &ut, tt, params, Variant::Plain);
        let kin = if rho[i] > 0.0 {
            mi.iter().zip(&ut).map(|(a, b)| (a / rho[i] - b).powi(2)).sum::<f64>() * rho[i]
        } else {
            0.0
        };
        let w = cutoff.weight(rho[i], p[i]);
        let ess = (rho[i] - rt).powi(2) + (p[i] - rt * tt).powi(2);
        let s = if rho[i] > 0.0 && p[i] > 0.0 { thermo::entropy(rho[i], p[i], params.c_v) } else { 0.0 };
        let res = 1.0 + rho[i] + rho[i] * s.abs() + p[i];
        let rhs = kin + (w * ess + (1.0 - w) * res) / eps2;
        if rhs > COERCIVITY_RHS_FLOOR / eps2 {
            report.cells_with_rhs += 1;
            let ratio = lhs / rhs;
            if ratio < report.min_ratio {
                report.min_ratio = ratio;
                report.argmin = Some(i);
            }
        }
    }
    Ok(report)
}

/// Smallest coercivity ratio per family of the standard perturbation suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivitySuite {
    /// Relative perturbations of `(rho, p, u)` of size `1e-4` to `0.02`,
    /// staying inside the essential disk.
    pub essential: f64,
    /// Relative perturbations of size `0.02` to `0.6`, crossing the cutoff ring.
    pub transition: f64,
    /// Velocity offsets at the comparison density and pressure.
    pub velocity: f64,
    /// `rho, p` log-uniform in `[0.01, 5]`.
    pub residual: f64,
    /// Cells at or near vacuum, including `rho = 0` and `p = 0`.
    pub vacuum: f64,
}

impl CoercivitySuite {
    pub fn min(&self) -> f64 {
        self.essential.min(self.transition).min(self.velocity).min(self.residual).min(self.vacuum)
    }
}

/// Runs the standard perturbation suite: comparison states inside the
/// essential core paired with each family of [`CoercivitySuite`], for `c_v` in
/// {1.5, 2.5} and `epsilon` in {0.2, 0.1, 0.05, 0.01}.
pub fn coercivity_suite(seed: u64) -> Result<CoercivitySuite> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::uniform(2, 48, 1.0, crate::grid::BoundaryKind::Periodic)?;
    let n = grid.len();
    let mut mins = [f64::INFINITY; 5];
    for c_v in [1.5, 2.5] {
        for eps in [0.2, 0.1, 0.05, 0.01] {
            let params = SimParams::new(eps, c_v, 1.0, 1.0)?;
            let cut = EssResCutoff::for_params(&params);
            for family in 0..5 {
                let (mut rt, mut tt) = (grid.zeros(), grid.zeros());
                let mut ut = VectorField::zeros(&grid);
                let (mut rho, mut p) = (grid.zeros(), grid.zeros());
                let mut m = VectorField::zeros(&grid);
                for i in 0..n {
                    let (rad, phi) =
                        (0.8 * cut.delta_in * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
                    let (r0, p0) = (cut.rho_center + rad * phi.cos(), cut.p_center + rad * phi.sin());
                    let u0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    rt[i] = r0;
                    tt[i] = p0 / r0;
                    let (r, q, v) = match family {
                        0 | 1 => {
                            let a = if family == 0 {
                                10f64.powf(rng.gen_range(-4.0..-1.7))
                            } else {
                                rng.gen_range(0.02..0.6)
                            };
                            let v = [u0[0] + a * rng.gen_range(-1.0..1.0), u0[1] + a * rng.gen_range(-1.0..1.0)];
                            (r0 * (1.0 + a * rng.gen_range(-1.0..1.0)), p0 * (1.0 + a * rng.gen_range(-1.0..1.0)), v)
                        }
                        2 => (r0, p0, [u0[0] + rng.gen_range(-2.0..2.0), u0[1] + rng.gen_range(-2.0..2.0)]),
                        3 => (
                            10f64.powf(rng.gen_range(-2.0..0.7)),
                            10f64.powf(rng.gen_range(-2.0..0.7)),
                            [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                        ),
                        _ => match i % 3 {
                            0 => (0.0, 10f64.powf(rng.gen_range(-6.0..0.0)), [0.0, 0.0]),
                            1 => (
                                10f64.powf(rng.gen_range(-6.0..-2.0)),
                                10f64.powf(rng.gen_range(-6.0..-2.0)),
                                [0.5, -0.5],
                            ),
                            _ => (10f64.powf(rng.gen_range(-6.0..0.0)), 0.0, [0.0, 0.0]),
                        },
                    };
                    rho[i] = r;
                    p[i] = q;
                    for a in 0..2 {
                        ut.comp_mut(a)[i] = u0[a];
                        m.comp_mut(a)[i] = r * v[a];
                    }
                }
                let triple = ComparisonTriple::new(rt, ut, tt)?;
                let report = coercivity_check(&rho, &m, &p, &triple, &cut, &params)?;
                mins[family] = mins[family].min(report.min_ratio);
            }
        }
    }
    Ok(CoercivitySuite {
        essential: mins[0],
        transition: mins[1],
        velocity: mins[2],
        residual: mins[3],
        vacuum: mins[4],
    })
}

/// The five deviations of the compressible state from the limit solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TheoremMetrics {
    /// `||rho - rho_bar||_1`
    pub rho_l1: f64,
    /// `||p - rho_bar theta_bar||_1`
    pub p_l1: f64,
    /// `||m / sqrt(rho) - sqrt(rho_bar) U||_2`
    pub mom_l2: f64,
    /// `||(rho - rho_bar)/eps - r||_1`
    pub r_l1: f64,
    /// `||(p - rho_bar theta_bar)/eps - rho_bar F||_1`
    pub p1_l1: f64,
}

impl TheoremMetrics {
    pub fn as_array(&self) -> [f64; 5] {
        [self.rho_l1, self.p_l1, self.mom_l2, self.r_l1, self.p1_l1]
    }

    pub fn max(self, other: TheoremMetrics) -> TheoremMetrics {
        TheoremMetrics {
            rho_l1: self.rho_l1.max(other.rho_l1),
            p_l1: self.p_l1.max(other.p_l1),
            mom_l2: self.mom_l2.max(other.mom_l2),
            r_l1: self.r_l1.max(other.r_l1),
            p1_l1: self.p1_l1.max(other.p1_l1),
        }
    }
}

/// Default tolerance on the time mismatch between paired snapshots.
pub const ALIGN_TOL: f64 = 1e-9;

pub fn theorem_metrics(
    cons: &ConservedState,
    eb: &BoussinesqState,
    f: &ScalarField,
    grid: &Grid,
    params: &SimParams,
    region: Option<&Region>,
) -> Result<TheoremMetrics> {
    if (cons.t - eb.t).abs() > ALIGN_TOL * (1.0 + cons.t.abs()) {
        return Err(Error::Misaligned { t_a: cons.t, t_b: eb.t });
    }
    cons.check_grid(grid)?;
    let p = cons.pressure(params)?;
    let eps = params.epsilon;
    let (rb, pb) = (params.rho_bar, params.p_bar());
    let srb = rb.sqrt();
    let mut mom = Vec::with_capacity(grid.dim());
    for a in 0..grid.dim() {
        let ua = eb.u.comp(a);
        let ma = cons.m.comp(a);
        let mut c = grid.zeros();
        for i in 0..grid.len() {
            c[i] = ma[i] / cons.rho[i].sqrt() - srb * ua[i];
        }
        mom.push(c);
    }
    let mom = VectorField::from_components(mom)?;
    Ok(TheoremMetrics {
        rho_l1: norm(&cons.rho.map(|r| r - rb), grid, NormKind::L1, region)?,
        p_l1: norm(&p.map(|v| v - pb), grid, NormKind::L1, region)?,
        mom_l2: crate::grid::vector_l2(&mom, grid, region)?,
        r_l1: norm(&cons.rho.zip_map(&eb.r, |r, rr| (r - rb) / eps - rr), grid, NormKind::L1, region)?,
        p1_l1: norm(&p.zip_map(f, |v, fv| (v - pb) / eps - rb * fv), grid, NormKind::L1, region)?,
    })
}

/// Componentwise maximum of the metrics over pairs with `t >= t0`.
pub fn windowed_metrics(
    pairs: &[(&ConservedState, &BoussinesqState)],
    f: &ScalarField,
    grid: &Grid,
    params: &SimParams,
    t0: f64,
    region: Option<&Region>,
) -> Result<TheoremMetrics> {
    let mut out = TheoremMetrics::default();
    let mut any = false;
    for (c, e) in pairs {
        if c.t + ALIGN_TOL < t0 {
            continue;
        }
        out = out.max(theorem_metrics(c, e, f, grid, params, region)?);
        any = true;
    }
    if !any {
        return Err(Error::Precondition(format!("no snapshot at or after t0 = {t0}")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFit {
    /// Least-squares slope of `log(metric)` against `log(eps)`.
    pub order: f64,
    /// Metrics strictly decrease as `eps` decreases.
    pub monotone: bool,
    /// Indices dropped for non-positive metrics.
    pub excluded: Vec<usize>,
}

pub fn convergence_fit(eps: &[f64], metric: &[f64]) -> Result<ConvergenceFit> {
    if eps.len() != metric.len() {
        return Err(Error::ShapeMismatch("epsilon and metric lists differ in length".into()));
    }
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for (i, (&e, &m)) in eps.iter().zip(metric).enumerate() {
        if e > 0.0 && m > 0.0 && m.is_finite() {
            pts.push((e, m));
        } else {
            excluded.push(i);
        }
    }
    if pts.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 positive metrics, have {}", pts.len())));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (e, m)| (a + e.ln(), b + m.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (e, m) in &pts {
        let dx = e.ln() - mx;
        sxy += dx * (m.ln() - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::Precondition("epsilon values are all equal".into()));
    }
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = pts.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ConvergenceFit { order: sxy / sxx, monotone, excluded })
}

/// One line of the relative-energy report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelEnergyRow {
    pub epsilon: f64,
    pub eta: f64,
    pub t: f64,
    pub e_rel: f64,
    pub e_rel_chi: f64,
    pub d_eps: f64,
    pub metrics: TheoremMetrics,
    pub ratio_min: f64,
}

impl RelEnergyRow {
    pub const CSV_HEADER: &'static str =
        "epsilon,eta,t,E_rel,E_rel_chi,D_eps,m1_rho_L1,m2_p_L1,m3_mom_L2,m4_r_L1,m5_p1_L1,ratio_min";

    pub fn csv_row(&self) -> String {
        let m = self.metrics;
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.epsilon,
            self.eta,
            self.t,
            self.e_rel,
            self.e_rel_chi,
            self.d_eps,
            m.rho_l1,
            m.p_l1,
            m.mom_l2,
            m.r_l1,
            m.p1_l1,
            self.ratio_min
        )
    }
}

/// Relative-energy time series of one run.
#[derive(Debug, Clone, Default)]
pub struct RelEnergyReport {
    pub rows: Vec<RelEnergyRow>,
}

impl RelEnergyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RelEnergyRow::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Largest `E_rel` over rows with `t >= t0`.
    pub fn max_e_rel(&self, t0: f64) -> f64 {
        self.rows.iter().filter(|r| r.t >= t0).map(|r| r.e_rel).fold(f64::NEG_INFINITY, f64::max)
    }
}
