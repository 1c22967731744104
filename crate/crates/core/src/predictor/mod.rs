//! The lookahead map `g(u)`: the output the plant would reach after holding
//! the input at `u` for the horizon `T`, starting from the measured state,
//! together with its Jacobian `∂g/∂u`.
//!
//! Three routes are provided: inner Euler simulation with a central
//! finite-difference Jacobian (works for any plant), and exact closed forms
//! for LTI plants, the position plant and single integrators.

mod expm;

pub use expm::matrix_exponential;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LtiPlant, PlantModel, PositionPlant};
use crate::error::{check_dim, Error, Result};
use crate::integration::integrate_const_input;
use crate::linalg::{check_nonsingular, solve_matrix};
use crate::{Matrix, Vector};

/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Tolerance used by closed-form predictors when checking `A` and the
/// Jacobian for singularity.
pub const CLOSED_FORM_SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMethod {
    SimulatedFd,
    LtiClosedForm,
    PositionClosedForm,
    IntegratorClosedForm,
    Memoryless,
}

/// How the controller obtains `g` and `∂g/∂u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMethod {
    /// Closed form when the plant has one, simulation otherwise.
    #[default]
    Auto,
    SimulatedFd,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub g_value: Vector,
    pub jacobian: Matrix,
    pub method: PredictionMethod,
    /// `det ∂g/∂u`, kept for singularity diagnostics.
    pub det: f64,
}

impl Prediction {
    fn new(g_value: Vector, jacobian: Matrix, method: PredictionMethod) -> Result<Self> {
        if !jacobian.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("prediction jacobian".into()));
        }
        if !g_value.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("predicted output".into()));
        }
        let det = jacobian.determinant();
        Ok(Self {
            g_value,
            jacobian,
            method,
            det,
        })
    }
}

/// `g(u) = h(φ(x, t; u, t + T))` by `steps` Euler steps. A memoryless plant
/// returns `g(u)` directly.
pub fn predict_output(
    plant: &PlantModel,
    x: &Vector,
    u: &Vector,
    horizon: f64,
    steps: usize,
) -> Result<Vector> {
    if plant.is_memoryless() {
        return Ok(plant.eval_memoryless(u)?.0);
    }
    let end = integrate_const_input(plant, x, u, horizon, steps)?;
    plant.eval_output(&end)
}

/// Central-difference Jacobian of [`predict_output`]. Coordinate `j` is
/// perturbed by `delta·max(1, |u_j|)`. The inner step count is the same as
/// for `g` itself, so this differentiates the discrete map.
pub fn predict_jacobian_fd(
    plant: &PlantModel,
    x: &Vector,
    u: &Vector,
    horizon: f64,
    steps: usize,
    delta: f64,
) -> Result<Matrix> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be > 0, got {delta}"
        )));
    }
    let k = plant.io_dim();
    check_dim("input", k, u.len())?;
    let mut jac = Matrix::zeros(k, k);
    let mut probe = u.clone();
    for j in 0..k {
        let h = delta * u[j].abs().max(1.0);
        probe[j] = u[j] + h;
        let plus = predict_output(plant, x, &probe, horizon, steps)?;
        probe[j] = u[j] - h;
        let minus = predict_output(plant, x, &probe, horizon, steps)?;
        probe[j] = u[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    if !jac.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("finite-difference jacobian".into()));
    }
    Ok(jac)
}

/// Exact prediction for `ẋ = Ax + Bu, y = Cx`:
/// `g(u) = C(e^{AT}x + A⁻¹(e^{AT} − I)Bu)`, `∂g/∂u = CA⁻¹(e^{AT} − I)B`.
pub fn predict_lti_closed_form(
    lti: &LtiPlant,
    x: &Vector,
    u: &Vector,
    horizon: f64,
) -> Result<Prediction> {
    check_horizon(horizon)?;
    check_dim("state", lti.state_dim(), x.len())?;
    check_dim("input", lti.io_dim(), u.len())?;
    let (exp_at, jac) = lti_jacobian(lti, horizon)?;
    let g = lti.c() * (&exp_at * x) + &jac * u;
    Prediction::new(g, jac, PredictionMethod::LtiClosedForm)
}

/// `(e^{AT}, CA⁻¹(e^{AT} − I)B)`, rejecting singular `A` or a singular
/// Jacobian.
pub(crate) fn lti_jacobian(lti: &LtiPlant, horizon: f64) -> Result<(Matrix, Matrix)> {
    let n = lti.state_dim();
    check_nonsingular(lti.a(), CLOSED_FORM_SINGULARITY_TOL, "state matrix A")?;
    let exp_at = matrix_exponential(&(lti.a() * horizon))?;
    let rhs = (&exp_at - Matrix::identity(n, n)) * lti.b();
    let z = solve_matrix(lti.a(), &rhs, "state matrix A")?;
    let jac = lti.c() * z;
    check_nonsingular(
        &jac,
        CLOSED_FORM_SINGULARITY_TOL,
        "lookahead jacobian CA^-1(e^AT - I)B",
    )?;
    Ok((exp_at, jac))
}

/// `e^{x} − 1 − x`, accurate for small `|x|`.
pub(crate) fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for j in 3..12 {
            term *= x / j as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// Exact prediction for the position plant:
///
/// ```text
/// g = x₁ + (e^{aT} − 1)/a · x₂ + ((e^{aT} − 1)/a² − T/a)·u − rT
/// ∂g/∂u = (e^{aT} − 1 − aT)/a²
/// ```
pub fn predict_position_closed_form(
    plant: &PositionPlant,
    x: &Vector,
    u: &Vector,
    horizon: f64,
) -> Result<Prediction> {
    check_horizon(horizon)?;
    check_dim("state", 2, x.len())?;
    check_dim("input", 1, u.len())?;
    let a = plant.a();
    let at = a * horizon;
    let jac = expm1_minus_x(at) / (a * a);
    let g = x[0] + at.exp_m1() / a * x[1] + jac * u[0] - plant.r_slope() * horizon;
    Prediction::new(
        Vector::from_element(1, g),
        Matrix::from_element(1, 1, jac),
        PredictionMethod::PositionClosedForm,
    )
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "horizon must be > 0, got {horizon}"
        )))
    }
}

/// Compute `g` and `∂g/∂u` with the requested method.
pub fn predict(
    plant: &PlantModel,
    x: &Vector,
    u: &Vector,
    horizon: f64,
    steps: usize,
    method: JacobianMethod,
) -> Result<Prediction> {
    if let PlantModel::Memoryless(_) = plant {
        let (g, j) = plant.eval_memoryless(u)?;
        return Prediction::new(g, j, PredictionMethod::Memoryless);
    }
    if method != JacobianMethod::SimulatedFd {
        match plant {
            PlantModel::Position(p) => return predict_position_closed_form(p, x, u, horizon),
            PlantModel::Integrator(p) => {
                check_horizon(horizon)?;
                check_dim("state", p.dim(), x.len())?;
                check_dim("input", p.dim(), u.len())?;
                let k = p.dim();
                return Prediction::new(
                    x + u * horizon,
                    Matrix::identity(k, k) * horizon,
                    PredictionMethod::IntegratorClosedForm,
                );
            }
            PlantModel::Lti(p) => match predict_lti_closed_form(p, x, u, horizon) {
                Ok(pred) => return Ok(pred),
                Err(Error::Singular {
                    what: "state matrix A",
                    ..
                }) if method == JacobianMethod::Auto => {}
                Err(e) => return Err(e),
            },
            _ if method == JacobianMethod::ClosedForm => {
                return Err(Error::Unsupported(format!(
                    "no closed-form predictor for a {} plant",
                    plant.kind()
                )))
            }
            _ => {}
        }
    }
    let g = predict_output(plant, x, u, horizon, steps)?;
    let j = predict_jacobian_fd(plant, x, u, horizon, steps, DEFAULT_FD_STEP)?;
    Prediction::new(g, j, PredictionMethod::SimulatedFd)
}
