//! Experiment configuration: a flat `key = value` file with the sections
//! `[grid]`, `[physics]`, `[potential]`, `[ic]`, `[run]`, `[study]` and `[output]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::boussinesq::EbOptions;
use crate::error::{Error, Result};
use crate::euler_fv::{FluxKind, Limiter, Reconstruction, Scheme};
use crate::grid::{BoundaryKind, Grid, Region};
use crate::params::SimParams;
use crate::potential::{PointMass, PotentialSpec};
use crate::sponge::SpongeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcMode {
    WellPrepared,
    IllPrepared,
}

/// Analytic perturbation profile used for initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Zero,
    Constant(f64),
    /// Gaussian, periodised on periodic axes.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `amplitude cos(2 pi sum_a k_a x_a / L_a + phase)`.
    Cosine {
        amplitude: f64,
        modes: Vec<f64>,
        phase: f64,
    },
    /// Sum of cosines with integer wave vectors up to `kmax` per axis and
    /// amplitudes and phases drawn from the seeded generator.
    Random {
        amplitude: f64,
        kmax: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Full,
    CentralHalf,
    /// Fractions of each axis length, `[lo, hi)`.
    Fractions {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Window {
    pub fn region(&self, grid: &Grid) -> Result<Region> {
        match self {
            Window::Full => Ok(grid.full_region()),
            Window::CentralHalf => Ok(grid.central_half()),
            Window::Fractions { lo, hi } => {
                if lo.len() != grid.dim() || hi.len() != grid.dim() {
                    return Err(Error::Config("window needs one fraction per axis".into()));
                }
                let lo: Vec<usize> = lo.iter().zip(grid.n()).map(|(f, &n)| (f * n as f64).round() as usize).collect();
                let hi: Vec<usize> =
                    hi.iter().zip(grid.n()).map(|(f, &n)| ((f * n as f64).round() as usize).min(n)).collect();
                if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
                    return Err(Error::Config("window is empty".into()));
                }
                Ok(Region::new(lo, hi))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: Grid,
    /// Physical constants; `epsilon` is the value used by single runs.
    pub params: SimParams,
    pub potential: PotentialSpec,
    /// Shift `F` to zero mean; defaults to on for ill-prepared data.
    pub zero_mean_potential: bool,
    pub mode: IcMode,
    /// `None` derives the density deviation from the Boussinesq relation.
    pub rho1: Option<Shape>,
    pub theta1: Shape,
    /// Stream function of the solenoidal part of `u_0`.
    pub stream: Shape,
    /// Potential of the gradient part of `u_0`.
    pub gradient: Shape,
    pub div_tol: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Number of evenly spaced output times in `(0, t_end]`; `t = 0` is always recorded.
    pub snapshots: usize,
    pub write_snapshots: bool,
    pub eb: EbOptions,
    /// Samples of the limit velocity per run used to carry the acoustic invariant.
    pub velocity_samples: usize,
    pub epsilons: Vec<f64>,
    pub etas: Vec<f64>,
    pub t0_fraction: f64,
    pub window: Window,
    /// Peak rate is `sigma_max / epsilon` in each run.
    pub sponge: Option<SpongeParams>,
    pub out_dir: PathBuf,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("grid", &["dim", "n", "lengths", "boundary"]),
    ("physics", &["epsilon", "c_v", "rho_bar", "theta_bar", "s_floor", "cfl", "t_end"]),
    ("potential", &["kind", "amplitude", "center", "width", "gradient", "offset", "masses", "zero_mean"]),
    ("ic", &["mode", "rho", "theta", "stream", "gradient", "div_tol"]),
    (
        "run",
        &[
            "flux",
            "reconstruction",
            "low_mach",
            "well_balanced",
            "snapshots",
            "write_snapshots",
            "eb_cfl",
            "eb_max_dt",
            "eb_dealias",
            "velocity_samples",
            "seed",
        ],
    ),
    ("study", &["epsilons", "etas", "t0_fraction", "window", "window_lo", "window_hi", "sponge_width", "sponge_sigma"]),
    ("output", &["dir"]),
];

const SHAPE_KEYS: &[&str] = &["amplitude", "center", "width", "modes", "phase", "kmax", "value"];

/// Section-keyed view of the file with typed accessors.
struct Table {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| Error::Config(format!("{what}: cannot parse `{}`", v.trim()))))
        .collect()
}

fn parse_bool(s: &str, what: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::Config(format!("{what}: expected a boolean, got `{other}`"))),
    }
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (sec, props) in ini.iter() {
            let Some(sec) = sec else {
                if props.iter().next().is_some() {
                    return Err(Error::Config("keys before the first section".into()));
                }
                continue;
            };
            let name = sec.trim().to_ascii_lowercase();
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
                return Err(Error::Config(format!("unknown section [{name}]")));
            };
            let entry = sections.entry(name.clone()).or_default();
            for (k, v) in props.iter() {
                let k = k.trim().to_ascii_lowercase();
                let base = k.split('.').next().unwrap_or("");
                let shaped = name == "ic" && k.contains('.') && SHAPE_KEYS.contains(&k.split_once('.').unwrap().1);
                if !keys.contains(&k.as_str()) && !(shaped && keys.contains(&base)) {
                    return Err(Error::Config(format!("unknown key `{k}` in [{name}]")));
                }
                let v = v.split('#').next().unwrap_or("").trim().to_string();
                entry.insert(k, v);
            }
        }
        Ok(Table { sections })
    }

    fn get(&self, sec: &str, key: &str) -> Option<&str> {
        self.sections.get(sec).and_then(|m| m.get(key)).map(String::as_str)
    }

    fn num(&self, sec: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("[{sec}] {key}: not a number: `{v}`"))),
        }
    }

    fn req_num(&self, sec: &str, key: &str) -> Result<f64> {
        let v = self.get(sec, key).ok_or_else(|| Error::Config(format!("[{sec}] {key} is required")))?;
        v.parse().map_err(|_| Error::Config(format!("[{sec}] {key}: not a number: `{v}`")))
    }

    fn int(&self, sec: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("[{sec}] {key}: not an integer: `{v}`"))),
        }
    }

    fn flag(&self, sec: &str, key: &str, default: bool) -> Result<bool> {
        self.get(sec, key).map_or(Ok(default), |v| parse_bool(v, &format!("[{sec}] {key}")))
    }

    fn list(&self, sec: &str, key: &str, dim: usize) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(sec, key) else { return Ok(None) };
        let mut l: Vec<f64> = parse_list(v, &format!("[{sec}] {key}"))?;
        if l.len() == 1 && dim > 1 {
            l = vec![l[0]; dim];
        }
        if l.len() != dim {
            return Err(Error::Config(format!("[{sec}] {key}: expected {dim} values, got {}", l.len())));
        }
        Ok(Some(l))
    }

    fn shape(&self, key: &str, dim: usize) -> Result<Option<Shape>> {
        let Some(kind) = self.get("ic", key) else { return Ok(None) };
        let sub = |p: &str| format!("{key}.{p}");
        let amp = self.num("ic", &sub("amplitude"), 1.0)?;
        let shape = match kind.to_ascii_lowercase().as_str() {
            "zero" | "none" => Shape::Zero,
            "constant" => Shape::Constant(self.req_num("ic", &sub("value"))?),
            "gaussian" => Shape::Gaussian {
                amplitude: amp,
                center: self
                    .list("ic", &sub("center"), dim)?
                    .ok_or_else(|| Error::Config(format!("[ic] {key}.center is required")))?,
                width: self.req_num("ic", &sub("width"))?,
            },
            "cosine" => Shape::Cosine {
                amplitude: amp,
                modes: self
                    .list("ic", &sub("modes"), dim)?
                    .ok_or_else(|| Error::Config(format!("[ic] {key}.modes is required")))?,
                phase: self.num("ic", &sub("phase"), 0.0)?,
            },
            "random" => Shape::Random { amplitude: amp, kmax: self.int("ic", &sub("kmax"), 2)? },
            "compatible" if key == "rho" => return Ok(None),
            other => return Err(Error::Config(format!("[ic] {key}: unknown shape `{other}`"))),
        };
        if let Shape::Gaussian { width, .. } = &shape {
            if !(*width > 0.0) {
                return Err(Error::Config(format!("[ic] {key}.width must be positive")));
            }
        }
        Ok(Some(shape))
    }
}

fn parse_potential(t: &Table, dim: usize) -> Result<PotentialSpec> {
    let kind = t.get("potential", "kind").unwrap_or("zero").to_ascii_lowercase();
    Ok(match kind.as_str() {
        "zero" => PotentialSpec::Zero,
        "affine" => PotentialSpec::Affine {
            gradient: t
                .list("potential", "gradient", dim)?
                .ok_or_else(|| Error::Config("[potential] gradient is required".into()))?,
            offset: t.num("potential", "offset", 0.0)?,
        },
        "gaussian-bump" | "gaussian" => PotentialSpec::GaussianBump {
            amplitude: t.num("potential", "amplitude", 1.0)?,
            center: t
                .list("potential", "center", dim)?
                .ok_or_else(|| Error::Config("[potential] center is required".into()))?,
            width: t.req_num("potential", "width")?,
        },
        "external-mass" => {
            let raw =
                t.get("potential", "masses").ok_or_else(|| Error::Config("[potential] masses is required".into()))?;
            let mut masses = Vec::new();
            for item in raw.split(';').filter(|s| !s.trim().is_empty()) {
                let v: Vec<f64> = parse_list(item, "[potential] masses")?;
                if v.len() != dim + 1 {
                    return Err(Error::Config(format!("each mass needs {dim} coordinates and a strength")));
                }
                masses.push(PointMass { position: v[..dim].to_vec(), strength: v[dim] });
            }
            PotentialSpec::ExternalMass { masses }
        }
        other => return Err(Error::Config(format!("[potential] unknown kind `{other}`"))),
    })
}

fn parse_scheme(t: &Table) -> Result<Scheme> {
    let mut s = Scheme::low_mach();
    if let Some(f) = t.get("run", "flux") {
        s.flux = match f.to_ascii_lowercase().as_str() {
            "rusanov" => FluxKind::Rusanov,
            "hllc" => FluxKind::Hllc,
            other => return Err(Error::Config(format!("[run] flux: unknown `{other}`"))),
        };
    }
    if let Some(r) = t.get("run", "reconstruction") {
        s.reconstruction = match r.to_ascii_lowercase().as_str() {
            "first-order" => Reconstruction::FirstOrder,
            "muscl" | "muscl-vanleer" => Reconstruction::Muscl(Limiter::VanLeer),
            "muscl-minmod" => Reconstruction::Muscl(Limiter::Minmod),
            "muscl-mc" => Reconstruction::Muscl(Limiter::Mc),
            other => return Err(Error::Config(format!("[run] reconstruction: unknown `{other}`"))),
        };
    }
    s.low_mach = t.flag("run", "low_mach", s.low_mach)?;
    s.well_balanced = t.flag("run", "well_balanced", s.well_balanced)?;
    Ok(s)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let t = Table::parse(text)?;
        let dim = t.int("grid", "dim", 2)?;
        let n: Vec<usize> = match t.get("grid", "n") {
            None => return Err(Error::Config("[grid] n is required".into())),
            Some(v) => {
                let l: Vec<usize> = parse_list(v, "[grid] n")?;
                if l.len() == 1 {
                    vec![l[0]; dim]
                } else {
                    l
                }
            }
        };
        let lengths = t.list("grid", "lengths", dim)?.unwrap_or_else(|| vec![1.0; dim]);
        let boundary: Vec<BoundaryKind> = match t.get("grid", "boundary") {
            None => vec![BoundaryKind::Periodic; dim],
            Some(v) => {
                let l = v.split(',').map(|s| s.parse::<BoundaryKind>()).collect::<Result<Vec<_>>>()?;
                if l.len() == 1 {
                    vec![l[0]; dim]
                } else {
                    l
                }
            }
        };
        let grid = Grid::new(dim, &n, &lengths, &boundary)?;

        let epsilons: Vec<f64> = match t.get("study", "epsilons") {
            Some(v) => parse_list(v, "[study] epsilons")?,
            None => vec![t.num("physics", "epsilon", 0.1)?],
        };
        if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("[study] epsilons must be strictly decreasing".into()));
        }
        let mut params = SimParams::new(
            t.num("physics", "epsilon", epsilons[0])?,
            t.num("physics", "c_v", 1.5)?,
            t.num("physics", "rho_bar", 1.0)?,
            t.num("physics", "theta_bar", 1.0)?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        params.cfl = t.num("physics", "cfl", params.cfl)?;
        params.t_end = t.num("physics", "t_end", 1.0)?;
        params.s_floor = t.num("physics", "s_floor", params.s_floor)?;
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        for &e in &epsilons {
            if !(e > 0.0) {
                return Err(Error::Config("[study] epsilons must be positive".into()));
            }
        }

        let potential = parse_potential(&t, dim)?;
        potential.validate(&grid).map_err(|e| Error::Config(e.to_string()))?;
        let mode = match t.get("ic", "mode").unwrap_or("well-prepared").to_ascii_lowercase().as_str() {
            "well-prepared" | "well" => IcMode::WellPrepared,
            "ill-prepared" | "ill" => IcMode::IllPrepared,
            other => return Err(Error::Config(format!("[ic] mode: unknown `{other}`"))),
        };
        let zero_mean_potential = t.flag("potential", "zero_mean", mode == IcMode::IllPrepared)?;

        let etas: Vec<f64> = match t.get("study", "etas") {
            Some(v) => parse_list(v, "[study] etas")?,
            None => vec![0.01],
        };
        if etas.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Config("[study] etas must lie in (0, 1)".into()));
        }
        let window = match t.get("study", "window").unwrap_or("default").to_ascii_lowercase().as_str() {
            "full" => Window::Full,
            "central-half" => Window::CentralHalf,
            "fractions" => Window::Fractions {
                lo: t
                    .list("study", "window_lo", dim)?
                    .ok_or_else(|| Error::Config("[study] window_lo is required".into()))?,
                hi: t
                    .list("study", "window_hi", dim)?
                    .ok_or_else(|| Error::Config("[study] window_hi is required".into()))?,
            },
            "default" => {
                if mode == IcMode::IllPrepared {
                    Window::CentralHalf
                } else {
                    Window::Full
                }
            }
            other => return Err(Error::Config(format!("[study] window: unknown `{other}`"))),
        };
        window.region(&grid)?;
        let t0_default = if mode == IcMode::IllPrepared { 0.2 } else { 0.0 };
        let t0_fraction = t.num("study", "t0_fraction", t0_default)?;
        if !(0.0..=1.0).contains(&t0_fraction) {
            return Err(Error::Config("[study] t0_fraction must lie in [0, 1]".into()));
        }
        let sponge = if grid.has_sponge() {
            let sp = SpongeParams {
                width: t.num(
                    "study",
                    "sponge_width",
                    0.2 * grid.lengths().iter().copied().fold(f64::INFINITY, f64::min),
                )?,
                sigma_max: t.num("study", "sponge_sigma", 50.0)?,
            };
            sp.validate(&grid).map_err(|e| Error::Config(e.to_string()))?;
            Some(sp)
        } else {
            None
        };

        let eb = EbOptions {
            cfl: t.num("run", "eb_cfl", 0.1)?,
            max_dt: t.num("run", "eb_max_dt", 1e-2)?,
            dealias: t.flag("run", "eb_dealias", false)?,
            ..EbOptions::default()
        };
        let snapshots = t.int("run", "snapshots", 10)?.max(1);
        let cfg = ExperimentConfig {
            grid,
            params,
            potential,
            zero_mean_potential,
            mode,
            rho1: t.shape("rho", dim)?,
            theta1: t.shape("theta", dim)?.unwrap_or(Shape::Zero),
            stream: t.shape("stream", dim)?.unwrap_or(Shape::Zero),
            gradient: t.shape("gradient", dim)?.unwrap_or(Shape::Zero),
            div_tol: t.num("ic", "div_tol", 1e-8)?,
            seed: t.int("run", "seed", 0)? as u64,
            scheme: parse_scheme(&t)?,
            snapshots,
            write_snapshots: t.flag("run", "write_snapshots", false)?,
            eb,
            velocity_samples: t.int("run", "velocity_samples", 100)?.max(snapshots),
            epsilons,
            etas,
            t0_fraction,
            window,
            sponge,
            out_dir: PathBuf::from(t.get("output", "dir").unwrap_or("out")),
        };
        for (name, s) in [("theta", &cfg.theta1), ("stream", &cfg.stream), ("gradient", &cfg.gradient)] {
            check_shape(name, s, dim)?;
        }
        if let Some(r) = &cfg.rho1 {
            check_shape("rho", r, dim)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `t = 0` and `snapshots` evenly spaced times in `(0, t_end]`.
    pub fn output_times(&self) -> Vec<f64> {
        let t = self.params.t_end;
        (0..=self.snapshots).map(|k| t * k as f64 / self.snapshots as f64).collect()
    }

    pub fn params_for(&self, epsilon: f64) -> Result<SimParams> {
        self.params.with_epsilon(epsilon)
    }
}

fn check_shape(name: &str, s: &Shape, dim: usize) -> Result<()> {
    let bad = match s {
        Shape::Gaussian { center, .. } => center.len() != dim,
        Shape::Cosine { modes, .. } => modes.len() != dim,
        _ => false,
    };
    if bad {
        return Err(Error::Config(format!("[ic] {name}: wrong number of coordinates")));
    }
    Ok(())
}
