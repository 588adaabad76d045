use super::ConservedState;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::params::SimParams;

/// Slope limiter for the piecewise-linear reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limiter {
    Minmod,
    VanLeer,
    /// Monotonised central.
    Mc,
}

impl Limiter {
    pub(crate) fn slope(self, dm: f64, dp: f64) -> f64 {
        if dm * dp <= 0.0 {
            return 0.0;
        }
        match self {
            Limiter::Minmod => {
                if dm.abs() < dp.abs() {
                    dm
                } else {
                    dp
                }
            }
            Limiter::VanLeer => 2.0 * dm * dp / (dm + dp),
            Limiter::Mc => {
                let c = 0.5 * (dm + dp);
                let lim = 2.0 * dm.abs().min(dp.abs());
                c.signum() * c.abs().min(lim)
            }
        }
    }
}

/// Face states fed to the Rusanov flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Cell averages on both sides of the face.
    FirstOrder,
    /// Limited linear reconstruction of `(rho, u, p)`, falling back to cell
    /// averages at any face where a reconstructed density or pressure is not positive.
    Muscl(Limiter),
}

impl Default for Reconstruction {
    fn default() -> Self {
        Reconstruction::Muscl(Limiter::VanLeer)
    }
}

/// Approximate Riemann solver at cell faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxKind {
    /// Local Lax-Friedrichs.
    #[default]
    Rusanov,
    /// Harten-Lax-van Leer with a restored contact wave.
    Hllc,
}

/// Everything that selects the face flux of the finite-volume scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Scheme {
    pub reconstruction: Reconstruction,
    pub flux: FluxKind,
    /// Scale the reconstructed velocity jump at each face by the local Mach
    /// number (capped at one), removing the `1/eps` growth of the numerical
    /// viscosity on slow flow.
    pub low_mach: bool,
    /// Reconstruct `rho` and `p` as deviations from the isothermal hydrostatic
    /// profile and discretise the gravity source to balance it exactly.
    pub well_balanced: bool,
}

impl Scheme {
    /// Well-balanced HLLC with the low-Mach velocity correction over van Leer MUSCL.
    pub fn low_mach() -> Self {
        Scheme { reconstruction: Reconstruction::default(), flux: FluxKind::Hllc, low_mach: true, well_balanced: true }
    }
}

pub(crate) const MAX_VARS: usize = 5;

/// Primitive face value `(rho, u_0..u_{d-1}, p)` packed in a fixed array.
pub(crate) type Prim = [f64; MAX_VARS];

#[inline]
pub(crate) fn flux_prim(q: &Prim, dim: usize, axis: usize, params: &SimParams) -> (Prim, f64) {
    let eps2 = params.epsilon * params.epsilon;
    let rho = q[0];
    let p = q[dim + 1];
    let un = q[1 + axis];
    let mut u2 = 0.0;
    for a in 0..dim {
        u2 += q[1 + a] * q[1 + a];
    }
    let e = 0.5 * rho * u2 + params.c_v * p / eps2;
    let mut f = [0.0; MAX_VARS];
    f[0] = rho * un;
    for a in 0..dim {
        f[1 + a] = rho * un * q[1 + a];
    }
    f[1 + axis] += p / eps2;
    f[dim + 1] = (e + p / eps2) * un;
    (f, e)
}

#[inline]
pub(crate) fn wave_speed(q: &Prim, dim: usize, axis: usize, params: &SimParams) -> f64 {
    let theta = q[dim + 1] / q[0];
    q[1 + axis].abs() + (params.gamma() * theta).sqrt() / params.epsilon
}

/// Rusanov flux between primitive face states.
#[inline]
pub(crate) fn rusanov_prim(l: &Prim, r: &Prim, dim: usize, axis: usize, params: &SimParams) -> Prim {
    let (fl, el) = flux_prim(l, dim, axis, params);
    let (fr, er) = flux_prim(r, dim, axis, params);
    let alpha = wave_speed(l, dim, axis, params).max(wave_speed(r, dim, axis, params));
    let mut f = [0.0; MAX_VARS];
    f[0] = 0.5 * (fl[0] + fr[0]) - 0.5 * alpha * (r[0] - l[0]);
    for a in 0..dim {
        let jump = r[0] * r[1 + a] - l[0] * l[1 + a];
        f[1 + a] = 0.5 * (fl[1 + a] + fr[1 + a]) - 0.5 * alpha * jump;
    }
    f[dim + 1] = 0.5 * (fl[dim + 1] + fr[dim + 1]) - 0.5 * alpha * (er - el);
    f
}

/// HLLC flux between primitive face states. The scaled pressure `p/eps^2`
/// turns the system into the standard gas dynamics equations with ratio `gamma`.
#[inline]
pub(crate) fn hllc_prim(l: &Prim, r: &Prim, dim: usize, axis: usize, params: &SimParams) -> Prim {
    let inv_eps2 = 1.0 / (params.epsilon * params.epsilon);
    let gamma = params.gamma();
    let (fl, el) = flux_prim(l, dim, axis, params);
    let (fr, er) = flux_prim(r, dim, axis, params);
    let (rl, rr) = (l[0], r[0]);
    let (ul, ur) = (l[1 + axis], r[1 + axis]);
    let (pl, pr) = (l[dim + 1] * inv_eps2, r[dim + 1] * inv_eps2);
    let cl = (gamma * pl / rl).sqrt();
    let cr = (gamma * pr / rr).sqrt();
    let sl = (ul - cl).min(ur - cr);
    let sr = (ul + cl).max(ur + cr);
    if sl >= 0.0 {
        return fl;
    }
    if sr <= 0.0 {
        return fr;
    }
    let ml = rl * (sl - ul);
    let mr = rr * (sr - ur);
    let s_star = (pr - pl + ul * ml - ur * mr) / (ml - mr);
    let (q, f, e, p, s, u) = if s_star >= 0.0 { (l, fl, el, pl, sl, ul) } else { (r, fr, er, pr, sr, ur) };
    let rho = q[0];
    let k = rho * (s - u) / (s - s_star);
    let mut out = [0.0; MAX_VARS];
    out[0] = f[0] + s * (k - rho);
    for a in 0..dim {
        let star = if a == axis { k * s_star } else { k * q[1 + a] };
        out[1 + a] = f[1 + a] + s * (star - rho * q[1 + a]);
    }
    let e_star = k * (e / rho + (s_star - u) * (s_star + p / (rho * (s - u))));
    out[dim + 1] = f[dim + 1] + s * (e_star - e);
    out
}

/// Pulls the two face velocities toward their mean by the local Mach number.
#[inline]
pub(crate) fn low_mach_fix(l: &mut Prim, r: &mut Prim, dim: usize, params: &SimParams) {
    let mach = |q: &Prim| {
        let u2: f64 = (0..dim).map(|a| q[1 + a] * q[1 + a]).sum();
        params.epsilon * (u2 * q[0] / (params.gamma() * q[dim + 1])).sqrt()
    };
    let z = mach(l).max(mach(r)).min(1.0);
    for a in 1..=dim {
        let mean = 0.5 * (l[a] + r[a]);
        let half = 0.5 * z * (l[a] - r[a]);
        l[a] = mean + half;
        r[a] = mean - half;
    }
}

fn prim_of_cons(q: &[f64], params: &SimParams) -> Result<Prim> {
    if q.len() < 3 || q.len() > MAX_VARS {
        return Err(Error::ShapeMismatch(format!("state vector of length {}", q.len())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("numerical_flux"));
    }
    let dim = q.len() - 2;
    let rho = q[0];
    let p = super::cell_pressure(rho, &q[1..=dim], q[dim + 1], params);
    if !(rho > 0.0 && p > 0.0) {
        return Err(Error::InvalidState { cell: 0, reason: format!("rho = {rho}, p = {p}") });
    }
    let mut out = [0.0; MAX_VARS];
    out[0] = rho;
    for a in 0..dim {
        out[1 + a] = q[1 + a] / rho;
    }
    out[dim + 1] = p;
    Ok(out)
}

/// Exact flux `(m_a, m_a m / rho + (p/eps^2) e_a, (e_tot + p/eps^2) u_a)` of a
/// conserved vector `(rho, m, e_tot)`.
pub fn physical_flux(q: &[f64], axis: usize, params: &SimParams) -> Result<Vec<f64>> {
    let w = prim_of_cons(q, params)?;
    let dim = q.len() - 2;
    Ok(flux_prim(&w, dim, axis, params).0[..dim + 2].to_vec())
}

/// Rusanov flux between two conserved vectors `(rho, m, e_tot)` across a face
/// normal to `axis`, with wave-speed bound `|u_a| + sqrt(gamma theta)/epsilon`.
pub fn numerical_flux(left: &[f64], right: &[f64], axis: usize, params: &SimParams) -> Result<Vec<f64>> {
    if left.len() != right.len() {
        return Err(Error::ShapeMismatch("left and right states differ in length".into()));
    }
    let l = prim_of_cons(left, params)?;
    let r = prim_of_cons(right, params)?;
    let dim = left.len() - 2;
    if axis >= dim {
        return Err(Error::InvalidParameter(format!("axis {axis} in {dim} dimensions")));
    }
    Ok(rusanov_prim(&l, &r, dim, axis, params)[..dim + 2].to_vec())
}

/// Rates `(0, rho grad F / epsilon, m . grad F / epsilon)`.
pub fn gravity_source(cons: &ConservedState, grad_f: &VectorField, params: &SimParams) -> ConservedState {
    let dim = cons.dim();
    let inv_eps = 1.0 / params.epsilon;
    let mut dm = VectorField::zeros_like(&cons.m);
    let mut de = ScalarField::zeros_like(&cons.e_tot);
    for a in 0..dim {
        let g = grad_f.comp(a);
        let m = cons.m.comp(a);
        let out = dm.comp_mut(a);
        for i in 0..cons.len() {
            out[i] = inv_eps * cons.rho[i] * g[i];
            de[i] += inv_eps * m[i] * g[i];
        }
    }
    ConservedState { rho: ScalarField::zeros_like(&cons.rho), m: dm, e_tot: de, t: cons.t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryKind, Grid};

    fn params() -> SimParams {
        SimParams::new(0.2, 1.5, 1.0, 1.0).unwrap()
    }

    fn cons(rho: f64, u: [f64; 2], p: f64, prm: &SimParams) -> Vec<f64> {
        let e = 0.5 * rho * (u[0] * u[0] + u[1] * u[1]) + prm.c_v * p / (prm.epsilon * prm.epsilon);
        vec![rho, rho * u[0], rho * u[1], e]
    }

    #[test]
    fn consistency_with_physical_flux() {
        let prm = params();
        let q = cons(1.3, [0.4, -0.2], 0.9, &prm);
        for axis in 0..2 {
            let f = numerical_flux(&q, &q, axis, &prm).unwrap();
            let g = physical_flux(&q, axis, &prm).unwrap();
            for (a, b) in f.iter().zip(&g) {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mirrored_states_negate_mass_flux() {
        let prm = params();
        let l = cons(1.1, [0.3, 0.1], 1.2, &prm);
        let r = cons(0.8, [-0.2, 0.4], 0.9, &prm);
        let f = numerical_flux(&l, &r, 0, &prm).unwrap();
        let rm = cons(0.8, [0.2, 0.4], 0.9, &prm);
        let lm = cons(1.1, [-0.3, 0.1], 1.2, &prm);
        let g = numerical_flux(&rm, &lm, 0, &prm).unwrap();
        assert!((f[0] + g[0]).abs() < 1e-14);
    }

    #[test]
    fn one_interface_oracle() {
        // Independent scalar evaluation of the Rusanov formula in conserved variables.
        let prm = params();
        let (eps, c_v, gamma) = (prm.epsilon, prm.c_v, prm.gamma());
        let l = cons(1.0, [0.5, 0.25], 1.0, &prm);
        let r = cons(0.5, [-0.5, 0.0], 0.4, &prm);
        let phys = |q: &[f64]| {
            let u = q[1] / q[0];
            let v = q[2] / q[0];
            let p = eps * eps / c_v * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / q[0]);
            let fl = [q[1], q[1] * u + p / (eps * eps), q[2] * u, (q[3] + p / (eps * eps)) * u];
            let _ = v;
            (fl, u.abs() + (gamma * p / q[0]).sqrt() / eps)
        };
        let (fl, sl) = phys(&l);
        let (fr, sr) = phys(&r);
        let a = sl.max(sr);
        let f = numerical_flux(&l, &r, 0, &prm).unwrap();
        for k in 0..4 {
            let want = 0.5 * (fl[k] + fr[k]) - 0.5 * a * (r[k] - l[k]);
            assert!((f[k] - want).abs() <= 1e-12 * want.abs().max(1.0), "component {k}");
        }
    }

    #[test]
    fn nan_input_rejected() {
        let prm = params();
        let q = cons(1.0, [0.0, 0.0], 1.0, &prm);
        let mut bad = q.clone();
        bad[1] = f64::NAN;
        assert!(numerical_flux(&q, &bad, 0, &prm).is_err());
    }

    #[test]
    fn gravity_source_examples() {
        let grid = Grid::uniform(2, 4, 1.0, BoundaryKind::SlipWall).unwrap();
        let prm = SimParams::new(0.5, 1.5, 1.0, 1.0).unwrap();
        let state = ConservedState::uniform(&grid, 1.0, &[0.3, -0.1], 1.0, &prm).unwrap();
        let zero = VectorField::zeros(&grid);
        let s = gravity_source(&state, &zero, &prm);
        assert_eq!(s.m.max_abs(), 0.0);
        assert_eq!(s.e_tot.max_abs(), 0.0);

        let g = 0.7;
        let grad = VectorField::from_fn(&grid, |_| vec![g, 0.0]);
        let s = gravity_source(&state, &grad, &prm);
        for i in 0..grid.len() {
            assert!((s.m.comp(0)[i] - 2.0 * g).abs() < 1e-15);
            assert_eq!(s.rho[i], 0.0);
            let u = [state.m.comp(0)[i] / state.rho[i], state.m.comp(1)[i] / state.rho[i]];
            let udm = u[0] * s.m.comp(0)[i] + u[1] * s.m.comp(1)[i];
            assert!((s.e_tot[i] - udm).abs() < 1e-15);
        }
    }

    #[test]
    fn limiters_vanish_at_extrema_and_are_exact_on_lines() {
        for lim in [Limiter::Minmod, Limiter::VanLeer, Limiter::Mc] {
            assert_eq!(lim.slope(1.0, -1.0), 0.0);
            assert_eq!(lim.slope(0.5, 0.5), 0.5);
        }
    }

    fn prim(rho: f64, u: [f64; 2], p: f64) -> Prim {
        [rho, u[0], u[1], p, 0.0]
    }

    #[test]
    fn hllc_is_consistent() {
        let prm = params();
        for q in [prim(1.3, [0.4, -0.2], 0.9), prim(0.7, [-3.0, 1.0], 1.1), prim(1.0, [40.0, 0.0], 0.5)] {
            for axis in 0..2 {
                let f = hllc_prim(&q, &q, 2, axis, &prm);
                let (g, _) = flux_prim(&q, 2, axis, &prm);
                for k in 0..4 {
                    assert!((f[k] - g[k]).abs() <= 1e-12 * g[k].abs().max(1.0), "{k}: {} {}", f[k], g[k]);
                }
            }
        }
    }

    #[test]
    fn hllc_keeps_a_resting_contact() {
        let prm = params();
        let l = prim(2.0, [0.0, 0.3], 1.0);
        let r = prim(0.5, [0.0, -0.7], 1.0);
        let f = hllc_prim(&l, &r, 2, 0, &prm);
        let eps2 = prm.epsilon * prm.epsilon;
        assert!(f[0].abs() < 1e-12);
        assert!((f[1] - 1.0 / eps2).abs() < 1e-10);
        assert!(f[2].abs() < 1e-12);
        assert!(f[3].abs() < 1e-10);
        let g = rusanov_prim(&l, &r, 2, 0, &prm);
        assert!(g[0].abs() > 0.1);
    }

    #[test]
    fn hllc_is_upwind_for_supersonic_flow() {
        let prm = params();
        let l = prim(1.0, [30.0, 0.0], 1.0);
        let r = prim(0.8, [31.0, 0.5], 0.7);
        let f = hllc_prim(&l, &r, 2, 0, &prm);
        let (g, _) = flux_prim(&l, 2, 0, &prm);
        assert_eq!(f, g);
    }

    #[test]
    fn low_mach_fix_scales_the_velocity_jump() {
        let prm = params();
        let (mut l, mut r) = (prim(1.0, [0.5, 0.1], 1.0), prim(1.0, [0.3, -0.1], 1.0));
        let (l0, r0) = (l, r);
        low_mach_fix(&mut l, &mut r, 2, &prm);
        let z = prm.epsilon * 0.5_f64.hypot(0.1) / prm.gamma().sqrt();
        for a in 1..=2 {
            assert!((l[a] + r[a] - l0[a] - r0[a]).abs() < 1e-15);
            assert!((l[a] - r[a] - z * (l0[a] - r0[a])).abs() < 1e-15);
        }
        assert_eq!((l[0], l[3], r[0], r[3]), (l0[0], l0[3], r0[0], r0[3]));

        let (mut l, mut r) = (prim(1.0, [20.0, 0.0], 1.0), prim(1.0, [10.0, 0.0], 1.0));
        low_mach_fix(&mut l, &mut r, 2, &prm);
        assert_eq!((l[1], r[1]), (20.0, 10.0));
    }

    proptest::proptest! {
        #[test]
        fn both_fluxes_are_consistent(
            rho in 0.05f64..5.0, u0 in -3.0f64..3.0, u1 in -3.0f64..3.0, p in 0.05f64..5.0,
            eps in 0.01f64..1.0, axis in 0usize..2,
        ) {
            let prm = SimParams::new(eps, 1.5, 1.0, 1.0).unwrap();
            let q: Prim = [rho, u0, u1, p, 0.0];
            let (exact, _) = flux_prim(&q, 2, axis, &prm);
            for f in [rusanov_prim(&q, &q, 2, axis, &prm), hllc_prim(&q, &q, 2, axis, &prm)] {
                for k in 0..4 {
                    proptest::prop_assert!((f[k] - exact[k]).abs() <= 1e-12 * exact[k].abs().max(1.0));
                }
            }
        }

        #[test]
        fn mirroring_negates_the_mass_flux(
            rl in 0.05f64..5.0, rr in 0.05f64..5.0, ul in -2.0f64..2.0, ur in -2.0f64..2.0,
            vl in -2.0f64..2.0, vr in -2.0f64..2.0, pl in 0.05f64..5.0, pr in 0.05f64..5.0,
        ) {
            let prm = params();
            let f = numerical_flux(&cons(rl, [ul, vl], pl, &prm), &cons(rr, [ur, vr], pr, &prm), 0, &prm).unwrap();
            let g = numerical_flux(&cons(rr, [-ur, vr], pr, &prm), &cons(rl, [-ul, vl], pl, &prm), 0, &prm).unwrap();
            proptest::prop_assert!((f[0] + g[0]).abs() <= 1e-12 * f[0].abs().max(1.0));
            proptest::prop_assert!((f[1] - g[1]).abs() <= 1e-12 * f[1].abs().max(1.0));
        }
    }
}
