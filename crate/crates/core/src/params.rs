use crate::error::{Error, Result};

/// Scalar physical and numerical constants shared by every solver.
///
/// `epsilon` is the Mach number; the Froude number is `sqrt(epsilon)`, so the
/// potential force enters the momentum balance at order `1/epsilon` and the
/// pressure gradient at order `1/epsilon^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub epsilon: f64,
    pub c_v: f64,
    gamma: f64,
    pub rho_bar: f64,
    pub theta_bar: f64,
    pub s_floor: f64,
    pub cfl: f64,
    pub t_end: f64,
}

impl SimParams {
    pub fn new(epsilon: f64, c_v: f64, rho_bar: f64, theta_bar: f64) -> Result<Self> {
        let p = SimParams {
            epsilon,
            c_v,
            gamma: 1.0 + 1.0 / c_v,
            rho_bar,
            theta_bar,
            s_floor: f64::NEG_INFINITY,
            cfl: 0.4,
            t_end: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("c_v", self.c_v)?;
        positive("rho_bar", self.rho_bar)?;
        positive("theta_bar", self.theta_bar)?;
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidParameter(format!("cfl must lie in (0,1), got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter("t_end must be non-negative".into()));
        }
        Ok(())
    }

    /// Adiabatic exponent, always `1 + 1/c_v`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Equilibrium pressure `rho_bar * theta_bar`.
    pub fn p_bar(&self) -> f64 {
        self.rho_bar * self.theta_bar
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        self.cfl = cfl;
        self.validate()?;
        Ok(self)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        self.t_end = t_end;
        self.validate()?;
        Ok(self)
    }

    pub fn with_s_floor(mut self, s_floor: f64) -> Self {
        self.s_floor = s_floor;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_tracks_specific_heat() {
        let p = SimParams::new(0.1, 1.5, 1.0, 1.0).unwrap();
        assert_eq!(p.gamma(), 1.0 + 1.0 / 1.5);
        assert!(SimParams::new(0.0, 1.5, 1.0, 1.0).is_err());
        assert!(SimParams::new(0.1, 1.5, -1.0, 1.0).is_err());
        assert!(p.with_cfl(1.2).is_err());
    }
}
