//! Physical parameters and the pointwise coefficient functions built from
//! them.
//!
//! The fluid is written in terms of the density perturbation a = rho - 1
//! around the constant background rho = 1. Moving the pressure gradient and
//! the 1/rho factors to the right-hand side introduces two rational
//! coefficients,
//!
//!   I(a) = a / (1 + a),        J(a) = P'(1 + a) / (1 + a) - 1,
//!
//! with pressure P(rho) = rho^gamma / gamma. For gamma = 2 the pressure
//! coefficient J vanishes identically, which the isentropic-exponent checks
//! below rely on.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Shear viscosity, mu > 0.
    pub mu: f64,
    /// Second (bulk-like) viscosity; only lambda + 2 mu > 0 is required.
    pub lambda: f64,
    /// Horizontal magnetic diffusivity, sigma > 0.
    pub sigma: f64,
    /// Isentropic exponent in P(rho) = rho^gamma / gamma.
    pub gamma: f64,
    /// Densities at or below this fraction of the background abort a run.
    pub vacuum_floor: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams { mu: 1.0, lambda: 0.0, sigma: 1.0, gamma: 2.0, vacuum_floor: 1e-6 }
    }
}

impl PhysParams {
    pub fn new(mu: f64, lambda: f64, sigma: f64, gamma: f64) -> Result<PhysParams> {
        let p = PhysParams { mu, lambda, sigma, gamma, ..PhysParams::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("vacuum_floor", self.vacuum_floor),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} is not finite")));
            }
        }
        if self.mu <= 0.0 {
            return Err(Error::Domain(format!("mu = {} must be positive", self.mu)));
        }
        if self.nu() <= 0.0 {
            return Err(Error::Domain(format!(
                "lambda + 2 mu = {} must be positive",
                self.nu()
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Domain(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.gamma < 1.0 {
            return Err(Error::Domain(format!("gamma = {} must be at least 1", self.gamma)));
        }
        if !(self.vacuum_floor > 0.0 && self.vacuum_floor < 1.0) {
            return Err(Error::Domain(format!(
                "vacuum_floor = {} must lie in (0, 1)",
                self.vacuum_floor
            )));
        }
        Ok(())
    }

    /// Longitudinal viscosity nu = lambda + 2 mu, the damping rate of the
    /// acoustic (compressive) part.
    #[inline]
    pub fn nu(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / self.gamma
    }

    #[inline]
    pub fn pressure_prime(&self, rho: f64) -> f64 {
        rho.powf(self.gamma - 1.0)
    }

    /// True when the pressure coefficient J drops out of the momentum
    /// equation.
    #[inline]
    pub fn gamma_is_two(&self) -> bool {
        self.gamma == 2.0
    }

    /// I(a) = a / (1 + a). Callers guarantee 1 + a > 0.
    #[inline]
    pub fn coeff_i(&self, a: f64) -> f64 {
        a / (1.0 + a)
    }

    /// J(a) = P'(1 + a) / (1 + a) - 1 = (1 + a)^(gamma - 2) - 1.
    #[inline]
    pub fn coeff_j(&self, a: f64) -> f64 {
        if self.gamma_is_two() {
            0.0
        } else {
            (1.0 + a).powf(self.gamma - 2.0) - 1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_coefficients() {
        assert!(PhysParams::new(0.0, 0.0, 1.0, 2.0).is_err());
        assert!(PhysParams::new(1.0, -3.0, 1.0, 2.0).is_err()); // nu < 0
        assert!(PhysParams::new(1.0, 0.0, 0.0, 2.0).is_err());
        assert!(PhysParams::new(1.0, 0.0, 1.0, 0.9).is_err());
        assert!(PhysParams::new(f64::NAN, 0.0, 1.0, 2.0).is_err());
        // lambda may be negative as long as nu stays positive.
        let p = PhysParams::new(1.0, -1.5, 1.0, 2.0).unwrap();
        assert!((p.nu() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pressure_and_its_slope() {
        let p = PhysParams::default();
        assert!((p.pressure(1.0) - 0.5).abs() < 1e-15);
        assert!((p.pressure(2.0) - 2.0).abs() < 1e-15);
        assert!((p.pressure_prime(1.5) - 1.5).abs() < 1e-15);
        let q = PhysParams::new(1.0, 0.0, 1.0, 1.4).unwrap();
        assert!((q.pressure(1.0) - 1.0 / 1.4).abs() < 1e-15);
        assert!((q.pressure_prime(2.0) - 2.0f64.powf(0.4)).abs() < 1e-14);
    }

    #[test]
    fn rational_coefficients() {
        let p = PhysParams::default();
        assert_eq!(p.coeff_j(0.3), 0.0);
        assert_eq!(p.coeff_j(-0.4), 0.0);
        assert!((p.coeff_i(0.25) - 0.2).abs() < 1e-15);
        assert!(p.coeff_i(0.0) == 0.0);

        let q = PhysParams::new(1.0, 0.0, 1.0, 1.4).unwrap();
        // J(a) = (1 + a)^(-0.6) - 1 for gamma = 1.4.
        let a = 0.2f64;
        assert!((q.coeff_j(a) - (1.2f64.powf(-0.6) - 1.0)).abs() < 1e-15);
        assert!(q.coeff_j(0.0) == 0.0);
        // 1 - I(a) = 1 / (1 + a), the inverse density.
        for a in [-0.3, 0.0, 0.7] {
            assert!(((1.0 - q.coeff_i(a)) - 1.0 / (1.0 + a)).abs() < 1e-15);
        }
    }
}
