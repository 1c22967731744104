//! Fixed-step forward Euler.
//!
//! The same method drives the outer closed loop and the inner constant-input
//! lookahead. There is deliberately no adaptive stepping: Euler shifts the
//! marginal stability point of the closed loop and reproducing that shift
//! requires the exact scheme.

use crate::dynamics::PlantModel;
use crate::error::{check_dim, Error, Result};
use crate::Vector;

/// States whose Euclidean norm exceeds this are reported as divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Outer step and inner lookahead resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    pub dt: f64,
    /// `Δt / T`; `1 / inner_ratio` inner steps per lookahead.
    pub inner_ratio: f64,
}

impl Default for StepSpec {
    fn default() -> Self {
        Self {
            dt: 0.01,
            inner_ratio: 0.01,
        }
    }
}

impl StepSpec {
    pub fn new(dt: f64, inner_ratio: f64) -> Result<Self> {
        let spec = Self { dt, inner_ratio };
        spec.inner_steps()?;
        Ok(spec)
    }

    /// Number of inner steps per lookahead horizon.
    pub fn inner_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.inner_ratio > 0.0 && self.inner_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "inner_ratio must lie in (0, 1], got {}",
                self.inner_ratio
            )));
        }
        let n = 1.0 / self.inner_ratio;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n {
            return Err(Error::InvalidArgument(format!(
                "1/inner_ratio = {n} is not an integer"
            )));
        }
        Ok(rounded as usize)
    }
}

/// `x + dt·f`.
pub fn euler_step(f_value: &Vector, x: &Vector, dt: f64) -> Result<Vector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    check_dim("euler step", x.len(), f_value.len())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("euler step state".into()));
    }
    if !f_value.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("euler step drift".into()));
    }
    Ok(x + f_value * dt)
}

/// Euler approximation of the flow `φ(x0, t; u, t + T)` with the input held
/// at `u`, using `steps` steps of size `T / steps`.
pub fn integrate_const_input(
    plant: &PlantModel,
    x0: &Vector,
    u: &Vector,
    horizon: f64,
    steps: usize,
) -> Result<Vector> {
    if plant.is_memoryless() {
        return Err(Error::Unsupported(
            "a memoryless plant has no state to integrate".into(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "inner step count must be >= 1".into(),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    check_dim("state", plant.state_dim(), x0.len())?;
    check_dim("input", plant.io_dim(), u.len())?;

    let h = horizon / steps as f64;
    let mut x = x0.clone();
    let mut f = Vector::zeros(x.len());
    for step in 0..steps {
        plant.drift_into(&x, u, &mut f)?;
        x.axpy(h, &f, 1.0);
        let norm = x.norm();
        if !(norm <= DIVERGENCE_GUARD) {
            return Err(Error::Divergence { step, norm });
        }
    }
    Ok(x)
}
