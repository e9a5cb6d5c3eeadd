//! The evolved variables: density perturbation, velocity, magnetic field.

use crate::error::{Error, Result};
use crate::field::{same_grid, Field};
use crate::grid::Grid;
use crate::ops;
use crate::params::PhysParams;
use std::sync::Arc;

/// One snapshot of (a, u, b) on a common grid. `a` is the density
/// perturbation rho - 1, so the physical density is 1 + a.
#[derive(Clone)]
pub struct State {
    pub a: Field,
    pub u: Field,
    pub b: Field,
}

impl State {
    pub fn new(a: Field, u: Field, b: Field) -> Result<State> {
        if !a.is_scalar() {
            return Err(Error::Shape("density perturbation must be a scalar field".into()));
        }
        if u.rank() != 3 || b.rank() != 3 {
            return Err(Error::Shape("velocity and magnetic field must be vector fields".into()));
        }
        same_grid(a.grid(), u.grid(), "state")?;
        same_grid(a.grid(), b.grid(), "state")?;
        Ok(State { a, u, b })
    }

    pub fn zero(grid: Arc<Grid>) -> State {
        State {
            a: Field::zeros(grid.clone(), 1),
            u: Field::zeros(grid.clone(), 3),
            b: Field::zeros(grid, 3),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.a.grid()
    }

    pub fn min_density(&self) -> f64 {
        1.0 + self.a.min_sample()
    }

    pub fn sup_a(&self) -> f64 {
        self.a.max_abs()
    }

    /// L2 norm of div b, a solenoidality health figure.
    pub fn div_b_norm(&self) -> f64 {
        let d = ops::divergence(&self.b).expect("b is a vector field");
        ops::inner(&d, &d).expect("scalar").max(0.0).sqrt()
    }

    /// Guard checks shared by the stepper and the run drivers: finite
    /// samples and density above the vacuum floor. `t` only labels errors.
    pub fn check_admissible(&self, params: &PhysParams, t: f64) -> Result<()> {
        if !(self.a.all_finite() && self.u.all_finite() && self.b.all_finite()) {
            return Err(Error::BlowUp { t, what: "non-finite field sample".into() });
        }
        let min_rho = self.min_density();
        if min_rho < params.vacuum_floor {
            return Err(Error::Vacuum { t, min_rho, floor: params.vacuum_floor });
        }
        Ok(())
    }
}
