//! Single runs and the singular-limit sweep over `epsilon` (and `eta`).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, IcMode};
use super::initial::{acoustic_data, prepare, InitialData};
use crate::acoustics::{acoustic_c2, recover_rt, run_acoustic, AcousticDiagnostics, AcousticOptions, AcousticRun};
use crate::boussinesq::{run_eb, BoussinesqState, EbDiagnostics, EbOptions, EbRun};
use crate::error::{Error, Result};
use crate::euler_fv::{run_euler, EulerDiagnostics, EulerHook, EulerOptions, EulerRun, HydrostaticSponge};
use crate::grid::{Grid, Region, ScalarField, VectorField};
use crate::params::SimParams;
use crate::relenergy::{
    coercivity_check, convergence_fit, dissipation_defect, rel_energy_total, theorem_metrics, ComparisonTriple,
    ConvergenceFit, RelEnergyRow, TheoremMetrics, Variant, ALIGN_TOL,
};
use crate::snapshot::Snapshot;
use crate::sponge::sponge_profile;
use crate::thermo::EssResCutoff;

pub const METRIC_NAMES: [&str; 6] = ["m1_rho_L1", "m2_p_L1", "m3_mom_L2", "m4_r_L1", "m5_p1_L1", "sup_E_rel"];

/// Largest values over the interior time window of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub epsilon: f64,
    pub eta: f64,
    pub metrics: TheoremMetrics,
    pub sup_e_rel: f64,
}

impl RunSummary {
    pub fn values(&self) -> [f64; 6] {
        let m = self.metrics.as_array();
        [m[0], m[1], m[2], m[3], m[4], self.sup_e_rel]
    }
}

/// Corrected against uncorrected comparison for one ill-prepared run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IllComparison {
    pub epsilon: f64,
    pub eta: f64,
    /// `sup_{t >= t0} int_K E` with the acoustic correction.
    pub sup_corrected: f64,
    /// The same with the limit-only comparison triple.
    pub sup_uncorrected: f64,
    /// `E_ac(K, 0) / E_ac(K, t_cross)` with `t_cross = eps L / sqrt(C)`.
    pub inner_decay: f64,
}

impl IllComparison {
    pub const CSV_HEADER: &'static str = "epsilon,eta,sup_E_corrected,sup_E_uncorrected,ratio,inner_decay";

    pub fn ratio(&self) -> f64 {
        self.sup_uncorrected / self.sup_corrected
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.epsilon,
            self.eta,
            self.sup_corrected,
            self.sup_uncorrected,
            self.ratio(),
            self.inner_decay
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricFit {
    pub metric: &'static str,
    pub eta: f64,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// `None` with a note when fewer than three usable runs exist.
    pub fit: Option<ConvergenceFit>,
    pub note: String,
}

impl MetricFit {
    /// Strict decrease of the metric along the decreasing `epsilon` list.
    pub fn monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }

    /// Smallest ratio between consecutive values.
    pub fn min_reduction(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub epsilon: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub rows: Vec<RelEnergyRow>,
    pub summaries: Vec<RunSummary>,
    pub fits: Vec<MetricFit>,
    pub ill: Vec<IllComparison>,
    pub failures: Vec<RunFailure>,
    /// First output time at which the limit solution lost resolution.
    pub eb_lost_resolution: Option<f64>,
    pub out_dir: PathBuf,
}

impl StudyReport {
    pub fn fit(&self, metric: &str, eta: f64) -> Option<&MetricFit> {
        self.fits.iter().find(|f| f.metric == metric && f.eta == eta)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::from)
}

fn csv<T>(header: &str, rows: &[T], row: impl Fn(&T) -> String) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&row(r));
        s.push('\n');
    }
    s
}

fn tag(x: f64) -> String {
    format!("{x:e}")
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= ALIGN_TOL * (1.0 + a.abs())
}

/// Times at which the limit solution is stored: the output times and the
/// velocity samples used by the acoustic transport.
fn eb_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let t_end = cfg.params.t_end;
    let n = cfg.velocity_samples;
    let mut t: Vec<f64> = cfg.output_times();
    t.extend((0..=n).map(|k| t_end * k as f64 / n as f64));
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| same_time(*a, *b));
    t
}

fn eb_at<'a>(eb: &'a EbRun, t: f64) -> Result<&'a BoussinesqState> {
    eb.snapshots
        .iter()
        .find(|s| same_time(s.t, t))
        .ok_or(Error::Misaligned { t_a: t, t_b: eb.snapshots.last().map_or(f64::NAN, |s| s.t) })
}

/// Linear interpolation in time between the stored limit velocities.
fn eb_velocity(eb: &EbRun, t: f64) -> Result<VectorField> {
    let s = &eb.snapshots;
    let k = s.partition_point(|v| v.t < t);
    if k < s.len() && same_time(s[k].t, t) {
        return Ok(s[k].u.clone());
    }
    if k == 0 || k == s.len() {
        let (lo, hi) = (s.first().map_or(f64::NAN, |v| v.t), s.last().map_or(f64::NAN, |v| v.t));
        return Err(Error::OutOfRange { tau: t, t_min: lo, t_max: hi });
    }
    let (a, b) = (&s[k - 1], &s[k]);
    let w = (t - a.t) / (b.t - a.t);
    Ok(a.u.lin_comb(1.0 - w, &b.u, w))
}

fn interpolate(series: &[(f64, f64)], t: f64) -> f64 {
    let k = series.partition_point(|p| p.0 < t);
    if k == 0 {
        return series.first().map_or(f64::NAN, |p| p.1);
    }
    if k == series.len() {
        return series.last().map_or(f64::NAN, |p| p.1);
    }
    let (a, b) = (series[k - 1], series[k]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

fn sponge_sigma(cfg: &ExperimentConfig, params: &SimParams) -> Result<Option<ScalarField>> {
    match cfg.sponge {
        None => Ok(None),
        Some(mut sp) => {
            sp.sigma_max /= params.epsilon;
            Ok(Some(sponge_profile(&cfg.grid, &sp)?))
        }
    }
}

fn write_fields(
    dir: &Path,
    prefix: &str,
    grid: &Grid,
    t: f64,
    k: usize,
    fields: &[(&str, &ScalarField)],
) -> Result<()> {
    Snapshot::new(grid, t, fields)?.write(&dir.join(format!("{prefix}_{k:04}.snap")))
}

/// Runs the limit system over all stored times.
pub fn run_limit(cfg: &ExperimentConfig, data: &InitialData) -> Result<EbRun> {
    let opts = EbOptions { output_times: eb_times(cfg), ..cfg.eb.clone() };
    run_eb(data.eb.clone(), &cfg.grid, &cfg.params, &data.potential, &opts)
}

pub fn run_compressible(cfg: &ExperimentConfig, data: &InitialData, params: &SimParams) -> Result<EulerRun> {
    let opts = EulerOptions { output_times: cfg.output_times(), ..EulerOptions::default() }.with_scheme(cfg.scheme);
    let mut sponge = sponge_sigma(cfg, params)?.map(|s| HydrostaticSponge::new(s, &data.f, params));
    let mut hooks: Vec<&mut dyn EulerHook> = Vec::new();
    if let Some(s) = sponge.as_mut() {
        hooks.push(s);
    }
    run_euler(data.compressible(params)?, &cfg.grid, params, &data.potential, &opts, &mut hooks)
}

pub fn run_acoustics(
    cfg: &ExperimentConfig,
    data: &InitialData,
    params: &SimParams,
    eta: f64,
    eb: &EbRun,
    region: &Region,
) -> Result<(AcousticRun, crate::acoustics::IllPreparedData)> {
    let ill = acoustic_data(data, params, eta, &cfg.grid)?;
    let opts = AcousticOptions {
        output_times: cfg.output_times(),
        sponge: sponge_sigma(cfg, params)?,
        inner_box: Some(region.clone()),
        ..AcousticOptions::default()
    };
    let mut velocity = |t: f64| eb_velocity(eb, t);
    let run = run_acoustic(ill.acoustic.clone(), ill.w0.clone(), &cfg.grid, params, &mut velocity, &opts)?;
    Ok((run, ill))
}

struct EpsOutput {
    rows: Vec<RelEnergyRow>,
    summaries: Vec<RunSummary>,
    ill: Vec<IllComparison>,
}

fn row_for(
    cfg: &ExperimentConfig,
    params: &SimParams,
    run: &EulerRun,
    k: usize,
    triple: &ComparisonTriple,
    eb: &BoussinesqState,
    f: &ScalarField,
    region: &Region,
    eta: f64,
) -> Result<RelEnergyRow> {
    let grid = &cfg.grid;
    let cons = &run.snapshots[k];
    let chi = EssResCutoff::for_params(params).entropy_bounds(params.c_v)?;
    let p = cons.pressure(params)?;
    let ratio_min = match coercivity_check(&cons.rho, &cons.m, &p, triple, &EssResCutoff::for_params(params), params) {
        Ok(r) => r.min_ratio,
        Err(Error::Precondition(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(RelEnergyRow {
        epsilon: params.epsilon,
        eta,
        t: cons.t,
        e_rel: rel_energy_total(cons, triple, grid, params, Variant::Plain, Some(region))?,
        e_rel_chi: rel_energy_total(cons, triple, grid, params, Variant::Chi(chi), Some(region))?,
        d_eps: dissipation_defect(&run.diagnostics, cons.t)?,
        metrics: theorem_metrics(cons, eb, f, grid, params, Some(region))?,
        ratio_min,
    })
}

fn summarize(rows: &[RelEnergyRow], t0: f64, epsilon: f64, eta: f64) -> RunSummary {
    let mut metrics = TheoremMetrics::default();
    let mut sup = f64::NEG_INFINITY;
    for r in rows.iter().filter(|r| r.t + ALIGN_TOL >= t0) {
        metrics = metrics.max(r.metrics);
        sup = sup.max(r.e_rel);
    }
    RunSummary { epsilon, eta, metrics, sup_e_rel: sup }
}

fn run_epsilon(
    cfg: &ExperimentConfig,
    data: &InitialData,
    epsilon: f64,
    eb: &EbRun,
    dir: &Path,
    quiet: bool,
) -> Result<EpsOutput> {
    let params = cfg.params_for(epsilon)?;
    let region = cfg.window.region(&cfg.grid)?;
    let t0 = cfg.t0_fraction * cfg.params.t_end;
    let run = run_compressible(cfg, data, &params)?;
    write(
        &dir.join(format!("euler_eps{}.csv", tag(epsilon))),
        &csv(EulerDiagnostics::CSV_HEADER, &run.diagnostics, EulerDiagnostics::csv_row),
    )?;
    if cfg.write_snapshots {
        for (k, s) in run.snapshots.iter().enumerate() {
            let p = s.pressure(&params)?;
            let mut fields = vec![("rho", &s.rho), ("p", &p)];
            let names = ["m_x", "m_y", "m_z"];
            for (a, c) in s.m.components().iter().enumerate() {
                fields.push((names[a], c));
            }
            write_fields(dir, &format!("euler_eps{}", tag(epsilon)), &cfg.grid, s.t, k, &fields)?;
        }
    }
    if !quiet {
        eprintln!("epsilon = {epsilon}: compressible run finished in {} steps", run.steps);
    }

    let mut out = EpsOutput { rows: Vec::new(), summaries: Vec::new(), ill: Vec::new() };
    match cfg.mode {
        IcMode::WellPrepared => {
            for k in 0..run.snapshots.len() {
                let e = eb_at(eb, run.snapshots[k].t)?;
                let triple = ComparisonTriple::well_prepared(e, &params)?;
                out.rows.push(row_for(cfg, &params, &run, k, &triple, e, &data.f, &region, 0.0)?);
            }
            out.summaries.push(summarize(&out.rows, t0, epsilon, 0.0));
        }
        IcMode::IllPrepared => {
            for &eta in &cfg.etas {
                let (ac, _) = run_acoustics(cfg, data, &params, eta, eb, &region)?;
                write(
                    &dir.join(format!("acoustic_eps{}_eta{}.csv", tag(epsilon), tag(eta))),
                    &csv(AcousticDiagnostics::CSV_HEADER, &ac.diagnostics, AcousticDiagnostics::csv_row),
                )?;
                let mut rows = Vec::new();
                let mut sup_unc = f64::NEG_INFINITY;
                for k in 0..run.snapshots.len() {
                    let cons = &run.snapshots[k];
                    let e = eb_at(eb, cons.t)?;
                    let snap =
                        ac.snapshots.get(k).filter(|s| same_time(s.state.t, cons.t)).ok_or(Error::Misaligned {
                            t_a: cons.t,
                            t_b: ac.snapshots.get(k).map_or(f64::NAN, |s| s.state.t),
                        })?;
                    let (r, t) = recover_rt(&snap.state.z, &snap.w, &data.f, &params);
                    let corrected = ComparisonTriple::ill_prepared(&e.u, &snap.grad_phi, &r, &t, &params)?;
                    rows.push(row_for(cfg, &params, &run, k, &corrected, e, &data.f, &region, eta)?);
                    if cons.t + ALIGN_TOL >= t0 {
                        let plain = ComparisonTriple::well_prepared(e, &params)?;
                        let u = rel_energy_total(cons, &plain, &cfg.grid, &params, Variant::Plain, Some(&region))?;
                        sup_unc = sup_unc.max(u);
                    }
                }
                let s = summarize(&rows, t0, epsilon, eta);
                let series: Vec<(f64, f64)> = ac.diagnostics.iter().map(|d| (d.t, d.e_ac_innerbox)).collect();
                let length = cfg.grid.lengths().iter().copied().fold(f64::INFINITY, f64::min);
                let t_cross = epsilon * length / acoustic_c2(&params).sqrt();
                let inner_decay = interpolate(&series, 0.0) / interpolate(&series, t_cross);
                out.ill.push(IllComparison {
                    epsilon,
                    eta,
                    sup_corrected: s.sup_e_rel,
                    sup_uncorrected: sup_unc,
                    inner_decay,
                });
                out.summaries.push(s);
                out.rows.extend(rows);
                if !quiet {
                    eprintln!("epsilon = {epsilon}, eta = {eta}: acoustic run finished in {} steps", ac.steps);
                }
            }
        }
    }
    Ok(out)
}

fn parse_row(line: &str) -> Result<RelEnergyRow> {
    let v: Vec<f64> = line
        .split(',')
        .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("corrupt staging row `{line}`"))))
        .collect::<Result<_>>()?;
    if v.len() != 12 {
        return Err(Error::Config(format!("corrupt staging row `{line}`")));
    }
    Ok(RelEnergyRow {
        epsilon: v[0],
        eta: v[1],
        t: v[2],
        e_rel: v[3],
        e_rel_chi: v[4],
        d_eps: v[5],
        metrics: TheoremMetrics { rho_l1: v[6], p_l1: v[7], mom_l2: v[8], r_l1: v[9], p1_l1: v[10] },
        ratio_min: v[11],
    })
}

fn fits(cfg: &ExperimentConfig, summaries: &[RunSummary]) -> Vec<MetricFit> {
    let etas: Vec<f64> = if cfg.mode == IcMode::IllPrepared { cfg.etas.clone() } else { vec![0.0] };
    let mut out = Vec::new();
    for eta in etas {
        let mut runs: Vec<&RunSummary> = summaries.iter().filter(|s| s.eta == eta).collect();
        runs.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let eps: Vec<f64> = runs.iter().map(|s| s.epsilon).collect();
        for (j, name) in METRIC_NAMES.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|s| s.values()[j]).collect();
            let (fit, note) = match convergence_fit(&eps, &values) {
                Ok(f) => (Some(f), String::new()),
                Err(e) => (None, format!("fit skipped: {e}")),
            };
            out.push(MetricFit { metric: name, eta, epsilons: eps.clone(), values, fit, note });
        }
    }
    out
}

fn summary_csv(fits: &[MetricFit]) -> String {
    csv("metric,eta,order,monotone,min_reduction,values,note", fits, |f| {
        let order = f.fit.as_ref().map_or(String::from("nan"), |x| format!("{:.6}", x.order));
        let values = f.values.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(";");
        format!("{},{:e},{},{},{:.4},{},{}", f.metric, f.eta, order, f.monotone(), f.min_reduction(), values, f.note)
    })
}

/// Runs the compressible solver for every `epsilon` (in parallel), the limit
/// system once, and in ill-prepared mode the acoustic system for every
/// `(epsilon, eta)`; writes `relenergy.csv`, `summary.csv`, the per-run
/// diagnostics and, in ill-prepared mode, `ill_comparison.csv` under `out`.
pub fn run_limit_study(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<StudyReport> {
    fs::create_dir_all(out)?;
    let staging = out.join("staging");
    fs::create_dir_all(&staging)?;

    let data = prepare(cfg)?;
    let eb = run_limit(cfg, &data)?;
    write(&out.join("eb.csv"), &csv(EbDiagnostics::CSV_HEADER, &eb.diagnostics, EbDiagnostics::csv_row))?;
    if !quiet {
        eprintln!("limit system finished in {} steps", eb.steps);
    }

    let results: Vec<(usize, f64, Result<EpsOutput>)> = cfg
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(j, &eps)| {
            let res = run_epsilon(cfg, &data, eps, &eb, out, quiet).and_then(|o| {
                let text = csv(RelEnergyRow::CSV_HEADER, &o.rows, RelEnergyRow::csv_row);
                write(&staging.join(format!("rows_{j:03}.csv")), &text)?;
                Ok(o)
            });
            (j, eps, res)
        })
        .collect();

    let mut summaries = Vec::new();
    let mut ill = Vec::new();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (j, eps, res) in results {
        match res {
            Ok(o) => {
                let text = fs::read_to_string(staging.join(format!("rows_{j:03}.csv")))?;
                for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
                    rows.push(parse_row(line)?);
                }
                summaries.extend(o.summaries);
                ill.extend(o.ill);
            }
            Err(e) => {
                if !quiet {
                    eprintln!("epsilon = {eps}: run failed: {e}");
                }
                failures.push(RunFailure { epsilon: eps, message: e.to_string() });
            }
        }
    }
    fs::remove_dir_all(&staging)?;
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.eta.total_cmp(&b.eta)).then(a.t.total_cmp(&b.t)));
    ill.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.eta.total_cmp(&b.eta)));

    write(&out.join("relenergy.csv"), &csv(RelEnergyRow::CSV_HEADER, &rows, RelEnergyRow::csv_row))?;
    let fits = fits(cfg, &summaries);
    write(&out.join("summary.csv"), &summary_csv(&fits))?;
    if cfg.mode == IcMode::IllPrepared {
        write(&out.join("ill_comparison.csv"), &csv(IllComparison::CSV_HEADER, &ill, IllComparison::csv_row))?;
    }
    if !failures.is_empty() {
        write(
            &out.join("failures.csv"),
            &csv("epsilon,error", &failures, |f| format!("{:e},\"{}\"", f.epsilon, f.message.replace('"', "'"))),
        )?;
    }
    Ok(StudyReport {
        rows,
        summaries,
        fits,
        ill,
        failures,
        eb_lost_resolution: eb.lost_resolution,
        out_dir: out.into(),
    })
}

/// Compressible run at the configured `epsilon`; writes `euler.csv`.
pub fn run_euler_only(cfg: &ExperimentConfig, out: &Path) -> Result<EulerRun> {
    fs::create_dir_all(out)?;
    let params = cfg.params;
    let data = prepare(cfg)?;
    let run = run_compressible(cfg, &data, &params)?;
    write(&out.join("euler.csv"), &csv(EulerDiagnostics::CSV_HEADER, &run.diagnostics, EulerDiagnostics::csv_row))?;
    if cfg.write_snapshots {
        for (k, s) in run.snapshots.iter().enumerate() {
            let p = s.pressure(&params)?;
            write_fields(out, "euler", &cfg.grid, s.t, k, &[("rho", &s.rho), ("p", &p), ("e_tot", &s.e_tot)])?;
        }
    }
    Ok(run)
}

/// Limit-system run; writes `eb.csv`.
pub fn run_boussinesq_only(cfg: &ExperimentConfig, out: &Path) -> Result<EbRun> {
    fs::create_dir_all(out)?;
    let data = prepare(cfg)?;
    let opts = EbOptions { output_times: cfg.output_times(), ..cfg.eb.clone() };
    let run = run_eb(data.eb.clone(), &cfg.grid, &cfg.params, &data.potential, &opts)?;
    write(&out.join("eb.csv"), &csv(EbDiagnostics::CSV_HEADER, &run.diagnostics, EbDiagnostics::csv_row))?;
    if cfg.write_snapshots {
        for (k, s) in run.snapshots.iter().enumerate() {
            write_fields(out, "eb", &cfg.grid, s.t, k, &[("theta", &s.theta), ("r", &s.r), ("u_x", s.u.comp(0))])?;
        }
    }
    Ok(run)
}

/// Acoustic run at the configured `epsilon` and the first `eta`, carried by the
/// limit velocity; writes `acoustic.csv`.
pub fn run_acoustic_only(cfg: &ExperimentConfig, out: &Path) -> Result<AcousticRun> {
    fs::create_dir_all(out)?;
    let params = cfg.params;
    let data = prepare(cfg)?;
    let eb = run_limit(cfg, &data)?;
    let region = cfg.window.region(&cfg.grid)?;
    let (run, _) = run_acoustics(cfg, &data, &params, cfg.etas[0], &eb, &region)?;
    write(
        &out.join("acoustic.csv"),
        &csv(AcousticDiagnostics::CSV_HEADER, &run.diagnostics, AcousticDiagnostics::csv_row),
    )?;
    if cfg.write_snapshots {
        for (k, s) in run.snapshots.iter().enumerate() {
            write_fields(
                out,
                "acoustic",
                &cfg.grid,
                s.state.t,
                k,
                &[("phi", &s.state.phi), ("z", &s.state.z), ("w", &s.w)],
            )?;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
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
epsilons = 0.4, 0.2, 0.1
";

    #[test]
    fn zero_perturbation_study_has_vanishing_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let cfg =
            ExperimentConfig::parse("[grid]\nn = 8\n[physics]\nt_end = 0.02\n[study]\nepsilons = 0.3, 0.1\n").unwrap();
        let rep = run_limit_study(&cfg, dir.path(), true).unwrap();
        assert!(rep.failures.is_empty());
        assert_eq!(rep.rows.len(), 2 * 11);
        for r in &rep.rows {
            assert!(r.metrics.as_array().iter().all(|&m| m <= 1e-10), "{r:?}");
            assert!(r.e_rel.abs() <= 1e-10);
        }
        assert!(rep.fits.iter().all(|f| f.fit.is_none() && f.note.contains("fit skipped")));
    }

    #[test]
    fn study_is_ordered_deterministic_and_isolated() {
        let cfg = ExperimentConfig::parse(SMALL).unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let a = run_limit_study(&cfg, d1.path(), true).unwrap();
        run_limit_study(&cfg, d2.path(), true).unwrap();
        for name in ["relenergy.csv", "summary.csv", "eb.csv", "euler_eps1e-1.csv"] {
            let x = fs::read(d1.path().join(name)).unwrap();
            assert_eq!(x, fs::read(d2.path().join(name)).unwrap(), "{name}");
        }
        assert!(!d1.path().join("staging").exists());
        let eps: Vec<f64> = a.rows.iter().map(|r| r.epsilon).collect();
        assert!(eps.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.rows.len(), 3 * 5);
        assert!(a.fit("m4_r_L1", 0.0).unwrap().fit.is_some());

        let bad = SMALL.replace("epsilons = 0.4, 0.2, 0.1", "epsilons = 30, 0.2, 0.1");
        let cfg = ExperimentConfig::parse(&bad).unwrap();
        let d3 = tempfile::tempdir().unwrap();
        let b = run_limit_study(&cfg, d3.path(), true).unwrap();
        assert_eq!(b.failures.len(), 1);
        assert_eq!(b.failures[0].epsilon, 30.0);
        let good: Vec<_> = a.rows.iter().filter(|r| r.epsilon < 0.3).collect();
        let kept: Vec<_> = b.rows.iter().collect();
        assert_eq!(good.len(), kept.len());
        for (x, y) in good.iter().zip(kept) {
            assert_eq!(x.csv_row(), y.csv_row());
        }
        assert!(d3.path().join("failures.csv").exists());
    }

    #[test]
    fn single_epsilon_skips_fit() {
        let text = SMALL.replace("epsilons = 0.4, 0.2, 0.1", "epsilons = 0.2");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let d = tempfile::tempdir().unwrap();
        let rep = run_limit_study(&cfg, d.path(), true).unwrap();
        assert!(rep.rows.iter().all(|r| r.epsilon == 0.2));
        let summary = fs::read_to_string(d.path().join("summary.csv")).unwrap();
        assert!(summary.contains("fit skipped"));
    }

    #[test]
    fn velocity_interpolation_is_linear() {
        let grid = Grid::uniform(2, 4, 1.0, crate::grid::BoundaryKind::Periodic).unwrap();
        let f = grid.zeros();
        let p = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let mk = |t: f64, v: f64| {
            BoussinesqState::new(VectorField::from_fn(&grid, |_| vec![v, -v]), grid.zeros(), &f, &p, t)
        };
        let snaps = vec![mk(0.0, 1.0), mk(0.5, 3.0)];
        let eb = EbRun {
            diagnostics: Vec::new(),
            final_state: snaps[1].clone(),
            snapshots: snaps,
            lost_resolution: None,
            steps: 0,
        };
        let u = eb_velocity(&eb, 0.125).unwrap();
        assert!((u.comp(0)[3] - 1.5).abs() < 1e-15);
        assert!(eb_velocity(&eb, 0.6).is_err());
        assert_eq!(eb_velocity(&eb, 0.5).unwrap().comp(1)[0], -3.0);
    }
}
