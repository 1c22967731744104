//! Newton-Raphson-flow control laws.
//!
//! The discrete law is the plain Newton iterate for `g(u) = r`. The
//! continuous laws steer `u` along the Newton direction:
//!
//! ```text
//! memoryless:  u̇ = α (∂g/∂u)⁻¹ (r(t)     − g(u))
//! dynamic:     u̇ = α (∂g/∂u)⁻¹ (r(t + T) − g(u))
//! ```
//!
//! where for a dynamic plant `g` is the lookahead prediction of the output
//! `T` time units ahead with the input held constant.

use crate::dynamics::PlantModel;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_nonsingular, solve};
use crate::predictor::{predict, JacobianMethod, Prediction};
use crate::reference::Reference;
use crate::{Matrix, Vector};
use serde::{Deserialize, Serialize};

/// Which reference sample a dynamic plant's controller aims at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preview {
    /// Aim at `r(t + T)`.
    #[default]
    Full,
    /// Aim at the current sample `r(t)`.
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Lookahead horizon `T`. Ignored for memoryless plants.
    pub horizon: f64,
    /// Speedup gain `α` multiplying the right-hand side of the control law.
    pub alpha: f64,
    pub dt: f64,
    /// Inner Euler steps per lookahead; `Δt = T / inner_steps`.
    pub inner_steps: usize,
    pub jacobian: JacobianMethod,
    pub singularity_tol: f64,
    pub preview: Preview,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            alpha: 1.0,
            dt: 0.01,
            inner_steps: 100,
            jacobian: JacobianMethod::Auto,
            singularity_tol: 1e-12,
            preview: Preview::Full,
        }
    }
}

impl ControllerConfig {
    pub fn new(horizon: f64, alpha: f64) -> Self {
        Self {
            horizon,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.horizon) {
            return Err(Error::validation(
                "controller.T",
                "lookahead horizon must be > 0",
            ));
        }
        if !positive(self.alpha) {
            return Err(Error::validation(
                "controller.alpha",
                "speedup gain must be > 0",
            ));
        }
        if !positive(self.dt) {
            return Err(Error::validation("controller.dt", "step size must be > 0"));
        }
        if self.inner_steps == 0 {
            return Err(Error::validation("controller.inner_steps", "must be >= 1"));
        }
        if !(self.singularity_tol >= 0.0) {
            return Err(Error::validation(
                "controller.singularity_tol",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    pub u: Vector,
    pub t: f64,
}

/// `J⁻¹·residual` by LU solve; fails loudly when `J` is numerically singular.
pub fn newton_direction(jacobian: &Matrix, residual: &Vector, tol: f64) -> Result<Vector> {
    let k = jacobian.nrows();
    if jacobian.ncols() != k {
        return Err(Error::InvalidArgument("jacobian must be square".into()));
    }
    check_dim("residual", k, residual.len())?;
    check_nonsingular(jacobian, tol, "jacobian dg/du")?;
    solve(jacobian, residual, "jacobian dg/du")
}

/// `u̇ = α·J⁻¹·(r_future − g)`.
pub fn control_rate(
    prediction: &Prediction,
    r_future: &Vector,
    alpha: f64,
    tol: f64,
) -> Result<Vector> {
    check_dim("reference", prediction.g_value.len(), r_future.len())?;
    let residual = r_future - &prediction.g_value;
    Ok(newton_direction(&prediction.jacobian, &residual, tol)? * alpha)
}

/// One Newton-Raphson iterate `u_n = u_{n−1} + J⁻¹(r − y_{n−1})`.
pub fn discrete_nr_step(
    u_prev: &Vector,
    y_prev: &Vector,
    jacobian: &Matrix,
    r: &Vector,
) -> Result<Vector> {
    check_dim("previous output", u_prev.len(), y_prev.len())?;
    Ok(u_prev + newton_direction(jacobian, &(r - y_prev), 1e-12)?)
}

/// Iterate [`discrete_nr_step`] on a memoryless map until `‖g(u) − r‖ < tol`.
/// Returns the final input and the number of steps taken.
pub fn discrete_nr_solve<G>(
    map: G,
    u0: &Vector,
    r: &Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)>
where
    G: Fn(&Vector) -> (Vector, Matrix),
{
    let mut u = u0.clone();
    for iter in 0..=max_iter {
        let (y, j) = map(&u);
        if (r - &y).norm() < tol {
            return Ok((u, iter));
        }
        if iter == max_iter {
            break;
        }
        u = discrete_nr_step(&u, &y, &j, r)?;
    }
    Err(Error::NoConvergence(format!(
        "Newton iteration did not reach {tol:e} in {max_iter} steps"
    )))
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub x_next: Vector,
    pub u_next: Vector,
    pub u_dot: Vector,
    pub prediction: Prediction,
}

/// Advance the closed loop by one outer step of `cfg.dt`.
///
/// The prediction and the control rate are evaluated at the start of the
/// step; `x` and `u` are then both advanced by forward Euler from their
/// start-of-step values.
pub fn closed_loop_step<R: Reference + ?Sized>(
    plant: &PlantModel,
    state: &ControlState,
    x: &Vector,
    reference: &R,
    cfg: &ControllerConfig,
) -> Result<StepOutcome> {
    check_dim("state", plant.state_dim(), x.len())?;
    check_dim("control", plant.io_dim(), state.u.len())?;
    check_dim("reference", plant.io_dim(), reference.dim())?;
    let t = state.t;
    let prediction = predict(
        plant,
        x,
        &state.u,
        cfg.horizon,
        cfg.inner_steps,
        cfg.jacobian,
    )
    .map_err(|e| e.at_time(t))?;
    let r_future = if plant.is_memoryless() || cfg.preview == Preview::Hold {
        reference.eval(t)
    } else {
        reference.eval(t + cfg.horizon)
    };
    let u_dot = control_rate(&prediction, &r_future, cfg.alpha, cfg.singularity_tol)
        .map_err(|e| e.at_time(t))?;
    let x_next = if plant.is_memoryless() {
        x.clone()
    } else {
        let f = plant.eval_drift(x, &state.u)?;
        x + f * cfg.dt
    };
    let u_next = &state.u + &u_dot * cfg.dt;
    Ok(StepOutcome {
        x_next,
        u_next,
        u_dot,
        prediction,
    })
}
