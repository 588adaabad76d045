//! Perfect-gas thermodynamics: state equations, entropy, the vacuum-safe
//! extensions of the singular nonlinearities, renormalisation cutoffs and the
//! essential/residual split around the equilibrium `(rho_bar, rho_bar theta_bar)`.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::params::SimParams;

/// `p = rho theta`.
pub fn pressure(rho: f64, theta: f64) -> Result<f64> {
    if rho < 0.0 || theta < 0.0 {
        return Err(Error::InvalidParameter(format!("pressure needs rho >= 0 and theta >= 0, got ({rho}, {theta})")));
    }
    Ok(rho * theta)
}

/// Internal energy per unit mass, `c_v theta`.
pub fn internal_energy(theta: f64, c_v: f64) -> f64 {
    c_v * theta
}

/// `s(rho, p) = c_v ln p - (c_v + 1) ln rho` on the open quadrant.
pub fn entropy(rho: f64, p: f64, c_v: f64) -> f64 {
    c_v * p.ln() - (c_v + 1.0) * rho.ln()
}

/// `|m|^2 / (2 rho)` extended to `rho = 0`: zero when `m = 0`, infinite otherwise.
pub fn extended_kinetic(rho: f64, m: &[f64]) -> f64 {
    let m2: f64 = m.iter().map(|v| v * v).sum();
    if rho > 0.0 {
        0.5 * m2 / rho
    } else if m2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `rho ln(p / rho^gamma)` extended to the boundary of the quadrant.
///
/// Note `rho * s(rho, p) = c_v * extended_rho_s(rho, p)`.
pub fn extended_rho_s(rho: f64, p: f64, gamma: f64) -> f64 {
    if rho >= 0.0 && p > 0.0 {
        if rho == 0.0 {
            0.0
        } else {
            rho * (p.ln() - gamma * rho.ln())
        }
    } else if rho > 0.0 && p == 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// The clamp cutoff: `a` below `a`, identity on `[a, b]`, `b` above `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffChi {
    a: f64,
    b: f64,
}

impl CutoffChi {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!("cutoff needs a < b, got [{a}, {b}]")));
        }
        Ok(CutoffChi { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn apply(&self, s: f64) -> f64 {
        s.clamp(self.a, self.b)
    }
}

pub fn chi_apply(chi: &CutoffChi, s: f64) -> f64 {
    chi.apply(s)
}

/// Renormalisation functions available to the entropy diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Renormalization {
    Clamp(CutoffChi),
    /// `chi(s) = min(s - s0, 0)`: vanishes above the entropy floor `s0`.
    Hinge {
        s0: f64,
    },
}

impl Renormalization {
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            Renormalization::Clamp(c) => c.apply(s),
            Renormalization::Hinge { s0 } => (s - s0).min(0.0),
        }
    }
}

/// Smooth radial bump in the `(rho, p)` plane: one inside `delta_in`, zero
/// outside `delta_out`, a C² quintic ramp in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssResCutoff {
    pub rho_center: f64,
    pub p_center: f64,
    pub delta_in: f64,
    pub delta_out: f64,
}

impl EssResCutoff {
    pub fn new(rho_center: f64, p_center: f64, delta_in: f64, delta_out: f64) -> Result<Self> {
        if !(delta_in > 0.0 && delta_in < delta_out) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < delta_in < delta_out, got ({delta_in}, {delta_out})"
            )));
        }
        Ok(EssResCutoff { rho_center, p_center, delta_in, delta_out })
    }

    /// Default radii `0.25 m` and `0.5 m` with `m = min(rho_bar, rho_bar theta_bar)`.
    pub fn for_params(params: &SimParams) -> Self {
        let m = params.rho_bar.min(params.p_bar());
        EssResCutoff { rho_center: params.rho_bar, p_center: params.p_bar(), delta_in: 0.25 * m, delta_out: 0.5 * m }
    }

    fn distance(&self, rho: f64, p: f64) -> f64 {
        (rho - self.rho_center).hypot(p - self.p_center)
    }

    pub fn weight(&self, rho: f64, p: f64) -> f64 {
        let d = self.distance(rho, p);
        if d <= self.delta_in {
            1.0
        } else if d >= self.delta_out {
            0.0
        } else {
            let x = (d - self.delta_in) / (self.delta_out - self.delta_in);
            1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
        }
    }

    /// Whether `(rho, p)` lies where the weight is exactly one.
    pub fn is_core(&self, rho: f64, p: f64) -> bool {
        self.distance(rho, p) <= self.delta_in
    }

    /// Clamp bounds `[a, b]` that contain every entropy value attained on the
    /// closed `delta_out` disk, so `chi_{a,b}(s) = s` on the essential set.
    pub fn entropy_bounds(&self, c_v: f64) -> Result<CutoffChi> {
        let rho_min = self.rho_center - self.delta_out;
        let p_min = self.p_center - self.delta_out;
        if rho_min <= 0.0 || p_min <= 0.0 {
            return Err(Error::InvalidParameter("essential disk reaches the vacuum boundary".into()));
        }
        // s is monotone in each variable, so its extrema on the disk sit on the
        // boundary circle; sample it and widen by a Lipschitz bound on the arc gap.
        const SAMPLES: usize = 4096;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..SAMPLES {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / SAMPLES as f64;
            let s =
                entropy(self.rho_center + self.delta_out * phi.cos(), self.p_center + self.delta_out * phi.sin(), c_v);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let lip = ((c_v + 1.0) / rho_min).hypot(c_v / p_min);
        let gap = self.delta_out * 2.0 * std::f64::consts::PI / SAMPLES as f64;
        let margin = lip * gap;
        CutoffChi::new(lo - margin, hi + margin)
    }
}

/// Splits `g` into `Phi(rho, p) g` and the remainder `g - Phi(rho, p) g`.
pub fn ess_res_split(
    g: &ScalarField,
    rho: &ScalarField,
    p: &ScalarField,
    cutoff: &EssResCutoff,
) -> Result<(ScalarField, ScalarField)> {
    if g.shape() != rho.shape() || g.shape() != p.shape() {
        return Err(Error::ShapeMismatch("ess_res_split fields are not congruent".into()));
    }
    let mut ess = g.clone();
    let mut res = g.clone();
    for i in 0..g.len() {
        let e = cutoff.weight(rho[i], p[i]) * g[i];
        ess[i] = e;
        res[i] = g[i] - e;
    }
    Ok((ess, res))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorReport {
    pub ok: bool,
    pub min_entropy: f64,
    pub argmin: usize,
}

/// Checks `min s(rho, p) >= s_floor - tol_s` over all cells.
pub fn entropy_floor_check(rho: &ScalarField, p: &ScalarField, params: &SimParams, tol_s: f64) -> FloorReport {
    let mut min_entropy = f64::INFINITY;
    let mut argmin = 0;
    for i in 0..rho.len() {
        let s = entropy(rho[i], p[i], params.c_v);
        if s < min_entropy {
            min_entropy = s;
            argmin = i;
        }
    }
    let ok = tol_s == f64::INFINITY || min_entropy >= params.s_floor - tol_s;
    FloorReport { ok, min_entropy, argmin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryKind, Grid};
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure(2.0, 3.0).unwrap(), 6.0);
        assert_eq!(pressure(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(pressure(0.0, 5.0).unwrap(), 0.0);
        assert!(pressure(-1.0, 1.0).is_err());
    }

    #[test]
    fn entropy_against_temperature_form() {
        let c_v = 1.5;
        // log(theta^c_v / rho) with theta = p / rho
        let oracle = |rho: f64, p: f64| ((p / rho).powf(c_v) / rho).ln();
        assert_eq!(entropy(1.0, 1.0, c_v), 0.0);
        assert!((entropy(1.0, E, c_v) - 1.5).abs() < 1e-15);
        assert!((entropy(E, 1.0, c_v) + 2.5).abs() < 1e-15);
        assert!((entropy(1.0, E, c_v) - oracle(1.0, E)).abs() < 1e-14);
        assert!((entropy(E, 1.0, c_v) - oracle(E, 1.0)).abs() < 1e-14);
        for c_v in [0.7, 1.5, 2.5] {
            let d = entropy(2.0, 2.0, c_v) - (entropy(1.0, 1.0, c_v) - 2f64.ln());
            assert!(d.abs() < 1e-14);
        }
    }

    #[test]
    fn extensions_at_the_boundary() {
        assert_eq!(extended_kinetic(2.0, &[2.0, 0.0]), 1.0);
        assert_eq!(extended_kinetic(0.0, &[0.0, 0.0]), 0.0);
        assert_eq!(extended_kinetic(0.0, &[1.0, 0.0]), f64::INFINITY);

        let gamma = 5.0 / 3.0;
        assert_eq!(extended_rho_s(1.0, 1.0, gamma), 0.0);
        assert_eq!(extended_rho_s(2.0, 0.0, gamma), f64::NEG_INFINITY);
        assert_eq!(extended_rho_s(0.0, 0.0, gamma), 0.0);
        let (rho, p) = (1.3, 0.7);
        let c_v = 1.5;
        assert!((rho * entropy(rho, p, c_v) - c_v * extended_rho_s(rho, p, gamma)).abs() < 1e-14);
    }

    #[test]
    fn clamp_branches() {
        let chi = CutoffChi::new(-1.0, 2.0).unwrap();
        assert_eq!(chi_apply(&chi, -3.0), -1.0);
        assert_eq!(chi_apply(&chi, 0.5), 0.5);
        assert_eq!(chi_apply(&chi, 7.0), 2.0);
        assert!(CutoffChi::new(1.0, 1.0).is_err());

        let hinge = Renormalization::Hinge { s0: 0.5 };
        assert_eq!(hinge.apply(2.0), 0.0);
        assert_eq!(hinge.apply(0.0), -0.5);
    }

    #[test]
    fn split_center_and_far_cells() {
        let grid = Grid::uniform(2, 4, 1.0, BoundaryKind::Periodic).unwrap();
        let params = SimParams::new(0.1, 1.5, 1.0, 2.0).unwrap();
        let cut = EssResCutoff::for_params(&params);
        let g = ScalarField::from_fn(&grid, |x| 1.0 + x[0] - 3.0 * x[1]);
        let mut rho = ScalarField::constant(&grid, 1.0);
        let mut p = ScalarField::constant(&grid, 2.0);
        rho[3] = 5.0;
        p[5] = 0.01;
        let (ess, res) = ess_res_split(&g, &rho, &p, &cut).unwrap();
        assert_eq!(ess[0], g[0]);
        assert_eq!(res[0], 0.0);
        assert_eq!(ess[3], 0.0);
        assert_eq!(res[3], g[3]);
        assert_eq!(ess[5], 0.0);
        for i in 0..g.len() {
            assert!((ess[i] + res[i] - g[i]).abs() <= f64::EPSILON * g[i].abs());
        }
    }

    #[test]
    fn floor_check_examples() {
        let grid = Grid::uniform(2, 4, 1.0, BoundaryKind::Periodic).unwrap();
        let params = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let params = params.with_s_floor(entropy(1.0, 1.0, 1.5));
        let rho = ScalarField::constant(&grid, 1.0);
        let mut p = ScalarField::constant(&grid, 1.0);
        assert!(entropy_floor_check(&rho, &p, &params, 1e-12).ok);

        // halving p lowers s by c_v ln 2
        p[7] = 0.5;
        let rep = entropy_floor_check(&rho, &p, &params, 1e-12);
        assert!(!rep.ok);
        assert_eq!(rep.argmin, 7);
        assert!((rep.min_entropy + 1.5 * 2f64.ln()).abs() < 1e-14);
        assert!(entropy_floor_check(&rho, &p, &params, f64::INFINITY).ok);
    }

    #[test]
    fn entropy_bounds_cover_the_disk() {
        let params = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        let cut = EssResCutoff::for_params(&params);
        let chi = cut.entropy_bounds(params.c_v).unwrap();
        for i in 0..200 {
            for j in 0..200 {
                let rho = 0.5 + i as f64 / 199.0;
                let p = 0.5 + j as f64 / 199.0;
                if cut.weight(rho, p) > 0.0 {
                    let s = entropy(rho, p, params.c_v);
                    assert!(s >= chi.a() && s <= chi.b());
                    assert_eq!(chi.apply(s), s);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn clamp_is_monotone_lipschitz_and_bounded(
            a in -10.0..10.0f64, w in 1e-3..10.0f64, s in -50.0..50.0f64, t in -50.0..50.0f64
        ) {
            let chi = CutoffChi::new(a, a + w).unwrap();
            let (cs, ct) = (chi.apply(s), chi.apply(t));
            prop_assert!(cs <= a + w && cs >= a);
            prop_assert!((cs - ct).abs() <= (s - t).abs());
            if s <= t { prop_assert!(cs <= ct); }
        }

        #[test]
        fn kinetic_extension_is_midpoint_convex(
            r1 in 1e-3..5.0f64, r2 in 1e-3..5.0f64,
            m1 in -5.0..5.0f64, m2 in -5.0..5.0f64, n1 in -5.0..5.0f64, n2 in -5.0..5.0f64
        ) {
            let fx = extended_kinetic(r1, &[m1, n1]);
            let fy = extended_kinetic(r2, &[m2, n2]);
            let fm = extended_kinetic(0.5 * (r1 + r2), &[0.5 * (m1 + m2), 0.5 * (n1 + n2)]);
            prop_assert!(fm <= 0.5 * (fx + fy) * (1.0 + 1e-14) + 1e-300);
        }

        #[test]
        fn cutoff_weight_is_bounded_with_bounded_slope(
            rho in 0.0..3.0f64, p in 0.0..3.0f64, h in 1e-7..1e-3f64
        ) {
            let cut = EssResCutoff::new(1.0, 1.0, 0.25, 0.5).unwrap();
            let w = cut.weight(rho, p);
            prop_assert!((0.0..=1.0).contains(&w));
            let slope = ((cut.weight(rho + h, p) - w) / h).abs();
            prop_assert!(slope <= 4.0 / (0.5 - 0.25));
        }
    }
}
