//! Closed-loop simulation harness, tracking metrics, the platoon scenario
//! and the named experiments.

mod experiments;
mod platoon;
mod trajectory;

pub(crate) use experiments::termination_label;
pub use experiments::{
    experiment_specs, run_named_experiment, ExperimentBundle, ExperimentName, ExperimentRun,
};
pub use platoon::{follower_reference, simulate_platoon, PlatoonRun, PlatoonSpec, SpacingSeries};
pub use trajectory::{fmt_float, Termination, Trajectory};

use serde::{Deserialize, Serialize};

use crate::controller::{closed_loop_step, ControlState, ControllerConfig, Preview};
use crate::dynamics::{
    IntegratorPlant, LtiPlant, MemorylessPlant, PendulumPlant, PlantModel, PositionPlant,
};
use crate::error::{Error, Result};
use crate::integration::DIVERGENCE_GUARD;
use crate::predictor::JacobianMethod;
use crate::reference::{Reference, ReferenceSignal};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemorylessMapKind {
    Identity,
    Cubic,
}

/// Declarative plant description: a kind name plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Memoryless {
        map: MemorylessMapKind,
        #[serde(default = "one")]
        k: usize,
    },
    /// Matrices as lists of rows.
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
    Position {
        a: f64,
        #[serde(default)]
        r_slope: f64,
    },
    Pendulum {
        a: f64,
        b: f64,
    },
    Integrator {
        #[serde(default = "two")]
        k: usize,
    },
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::validation(
            field,
            "matrix must be a non-empty list of equally long rows",
        ));
    }
    Ok(Matrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl PlantSpec {
    pub fn build(&self) -> Result<PlantModel> {
        Ok(match self {
            PlantSpec::Memoryless { map, k } => match map {
                MemorylessMapKind::Identity => MemorylessPlant::identity(*k)?.into(),
                MemorylessMapKind::Cubic => MemorylessPlant::cubic(*k)?.into(),
            },
            PlantSpec::Lti { a, b, c } => LtiPlant::new(
                rows_to_matrix("plant.a", a)?,
                rows_to_matrix("plant.b", b)?,
                rows_to_matrix("plant.c", c)?,
            )
            .map_err(|e| match e {
                Error::Dimension { .. } => Error::validation("plant", e.to_string()),
                other => other,
            })?
            .into(),
            PlantSpec::Position { a, r_slope } => PositionPlant::new(*a, *r_slope)?.into(),
            PlantSpec::Pendulum { a, b } => PendulumPlant::new(*a, *b)?.into(),
            PlantSpec::Integrator { k } => IntegratorPlant::new(*k)?.into(),
        })
    }
}

/// Controller section of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "unit")]
    pub alpha: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_inner")]
    pub inner_steps: usize,
    #[serde(default)]
    pub jacobian: JacobianMethod,
    #[serde(default = "default_tol")]
    pub singularity_tol: f64,
    #[serde(default)]
    pub preview: Preview,
}

fn unit() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_inner() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-12
}

impl ControllerSpec {
    pub fn new(horizon: f64, alpha: f64) -> Self {
        Self {
            horizon,
            alpha,
            dt: default_dt(),
            inner_steps: default_inner(),
            jacobian: JacobianMethod::Auto,
            singularity_tol: default_tol(),
            preview: Preview::Full,
        }
    }

    pub fn config(&self) -> ControllerConfig {
        ControllerConfig {
            horizon: self.horizon,
            alpha: self.alpha,
            dt: self.dt,
            inner_steps: self.inner_steps,
            jacobian: self.jacobian,
            singularity_tol: self.singularity_tol,
            preview: self.preview,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub duration: f64,
    /// When set, a diverging run is treated as a failure by the CLI.
    #[serde(default)]
    pub require_stable: bool,
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSignal>,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platoon: Option<PlatoonSpec>,
}

impl ScenarioSpec {
    /// Check every invariant; returns the built plant on success.
    pub fn validate(&self) -> Result<PlantModel> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::validation("duration", "must be > 0"));
        }
        self.controller.config().validate()?;
        let plant = self.plant.build()?;
        let (n, k) = (plant.state_dim(), plant.io_dim());
        if let Some(x0) = &self.initial.x0 {
            if x0.len() != n {
                return Err(Error::validation(
                    "initial.x0",
                    format!("expected {n} entries, got {}", x0.len()),
                ));
            }
        }
        if let Some(u0) = &self.initial.u0 {
            if u0.len() != k {
                return Err(Error::validation(
                    "initial.u0",
                    format!("expected {k} entries, got {}", u0.len()),
                ));
            }
        }
        match (&self.platoon, &self.reference) {
            (Some(p), _) => {
                p.validate()?;
                if !matches!(self.plant, PlantSpec::Integrator { k: 2 }) {
                    return Err(Error::validation(
                        "plant",
                        "platoon scenarios need a planar integrator plant (kind = \"integrator\", k = 2)",
                    ));
                }
            }
            (None, Some(r)) => {
                r.validate()?;
                if r.dim() != k {
                    return Err(Error::validation(
                        "reference",
                        format!(
                            "dimension {} does not match plant output dimension {k}",
                            r.dim()
                        ),
                    ));
                }
            }
            (None, None) => {
                return Err(Error::validation("reference", "missing reference section"));
            }
        }
        Ok(plant)
    }

    pub fn x0(&self, n: usize) -> Vector {
        self.initial
            .x0
            .as_ref()
            .map_or_else(|| Vector::zeros(n), |v| Vector::from_row_slice(v))
    }

    pub fn u0(&self, k: usize) -> Vector {
        self.initial
            .u0
            .as_ref()
            .map_or_else(|| Vector::zeros(k), |v| Vector::from_row_slice(v))
    }
}

/// Run a single-plant scenario. Divergence and singular Jacobians end the
/// run early and are reported through [`Trajectory::termination`].
pub fn simulate_closed_loop(spec: &ScenarioSpec) -> Result<Trajectory> {
    if spec.platoon.is_some() {
        return Err(Error::InvalidArgument(
            "platoon scenarios run through simulate_platoon".into(),
        ));
    }
    let plant = spec.validate()?;
    let reference = spec.reference.clone().expect("validated");
    let x0 = spec.x0(plant.state_dim());
    let u0 = spec.u0(plant.io_dim());
    simulate(
        &plant,
        &reference,
        &spec.controller.config(),
        x0,
        u0,
        spec.duration,
    )
}

fn output_of(plant: &PlantModel, x: &Vector, u: &Vector) -> Result<Vector> {
    if plant.is_memoryless() {
        Ok(plant.eval_memoryless(u)?.0)
    } else {
        plant.eval_output(x)
    }
}

/// Lower-level driver behind [`simulate_closed_loop`].
pub fn simulate<R: Reference + ?Sized>(
    plant: &PlantModel,
    reference: &R,
    cfg: &ControllerConfig,
    x0: Vector,
    u0: Vector,
    duration: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = (duration / cfg.dt).round() as usize;
    let mut traj = Trajectory::new(cfg.dt);
    let mut x = x0;
    let mut state = ControlState { u: u0, t: 0.0 };
    let y = output_of(plant, &x, &state.u)?;
    traj.push(0.0, x.clone(), state.u.clone(), y, reference.eval(0.0));

    for n in 0..steps {
        let t = state.t;
        let out = match closed_loop_step(plant, &state, &x, reference, cfg) {
            Ok(out) => out,
            Err(Error::Divergence { .. }) | Err(Error::NonFinite(_)) => {
                traj.termination = Termination::Diverged { step: n, time: t };
                return Ok(traj);
            }
            Err(e @ Error::Singular { .. }) => {
                traj.termination = Termination::Singular {
                    time: t,
                    message: e.to_string(),
                };
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        let norm = out.x_next.norm().max(out.u_next.norm());
        if !(norm <= DIVERGENCE_GUARD) {
            traj.termination = Termination::Diverged { step: n, time: t };
            return Ok(traj);
        }
        x = out.x_next;
        state = ControlState {
            u: out.u_next,
            t: (n + 1) as f64 * cfg.dt,
        };
        let y = output_of(plant, &x, &state.u)?;
        traj.push(
            state.t,
            x.clone(),
            state.u.clone(),
            y,
            reference.eval(state.t),
        );
    }
    Ok(traj)
}

/// Left Riemann sum of `‖r − y‖·dt` over `[t0, t1)`.
pub fn tracking_error_integral(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let range = traj.window(t0, t1)?;
    Ok(traj
        .errors()
        .skip(range.start)
        .take(range.len())
        .sum::<f64>()
        * traj.dt)
}

/// Mean of `‖r − y‖` over `[t0, t1)`.
pub fn mean_tracking_error(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    Ok(tracking_error_integral(traj, t0, t1)? / (t1 - t0))
}

/// Largest `‖r − y‖` over the final `tail_fraction` of the samples; a
/// finite-horizon stand-in for `limsup`.
pub fn asymptotic_error_sup(traj: &Trajectory, tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1), got {tail_fraction}"
        )));
    }
    let len = traj.len();
    let start = len - ((len as f64 * tail_fraction).ceil() as usize).min(len);
    Ok(traj.errors().skip(start).fold(0.0, f64::max))
}

/// Half the peak-to-peak excursion of output coordinate `coord` over
/// `[t0, t1)`. Infinite when the run diverged before `t1`.
pub fn output_amplitude(traj: &Trajectory, coord: usize, t0: f64, t1: f64) -> Result<f64> {
    if traj.end_time() < t1 - 1e-9 * traj.dt && traj.diverged() {
        return Ok(f64::INFINITY);
    }
    let range = traj.window(t0, t1)?;
    let (lo, hi) = traj.outputs[range]
        .iter()
        .map(|y| y[coord])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    Ok(0.5 * (hi - lo))
}

/// Largest finite-difference control rate `‖u_{n+1} − u_n‖ / dt` over
/// `[t0, t1)`.
pub fn peak_control_rate(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let range = traj.window(t0, t1)?;
    let end = range.end.min(traj.len().saturating_sub(1));
    Ok((range.start..end)
        .map(|n| (&traj.controls[n + 1] - &traj.controls[n]).norm() / traj.dt)
        .fold(0.0, f64::max))
}
