//! Output tracking by a Newton-Raphson-flow variable-gain integrator with
//! lookahead prediction.
//!
//! The controller steers the plant input `u` along the Newton direction
//! for the equation `g(u) = r`, where `g` predicts the output `T` time units
//! ahead by simulating the plant with the input held constant:
//!
//! ```text
//! u̇(t) = α · (∂g/∂u(u(t)))⁻¹ · (r(t + T) − g(u(t)))
//! ```
//!
//! Modules:
//! - [`dynamics`]: plant models (memoryless, LTI, position with drag,
//!   inverted pendulum, planar integrators, user callbacks)
//! - [`integration`]: fixed-step forward Euler
//! - [`predictor`]: `g(u)` and `∂g/∂u` by simulation or closed form
//! - [`controller`]: the discrete and continuous control laws
//! - [`lti`]: closed-loop matrices and Routh/eigenvalue stability tests
//! - [`scenarios`]: simulation harness, metrics, platoon, named experiments
//! - [`cli`]: configuration parsing and the command implementations
//!
//! ```
//! use nrflow::prelude::*;
//!
//! let plant: PlantModel = PositionPlant::new(-1.0, 2.0)?.into();
//! let cfg = ControllerConfig::new(1.0, 1.0);
//! let reference = ReferenceSignal::RampResidual { dim: 1 };
//! let traj = simulate(&plant, &reference, &cfg, Vector::zeros(2), Vector::zeros(1), 20.0)?;
//! assert!(traj.outputs.last().unwrap()[0].abs() < 1e-2);
//! # Ok::<(), nrflow::Error>(())
//! ```

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod dynamics;
mod error;
pub mod integration;
mod linalg;
pub mod lti;
pub mod predictor;
pub mod reference;
pub mod scenarios;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub mod prelude {
    pub use crate::controller::{
        closed_loop_step, control_rate, discrete_nr_step, newton_direction, ControlState,
        ControllerConfig, Preview,
    };
    pub use crate::dynamics::{
        IntegratorPlant, LtiPlant, MemorylessPlant, OdePlant, PendulumPlant, PlantKind, PlantModel,
        PositionPlant,
    };
    pub use crate::lti::{
        build_phi_psi, eigen_max_real, position_char_poly, position_phi,
        position_stability_condition, routh_first_column, Verdict,
    };
    pub use crate::predictor::{predict, JacobianMethod, Prediction};
    pub use crate::reference::{Reference, ReferenceSignal};
    pub use crate::scenarios::{simulate, simulate_closed_loop, ScenarioSpec, Trajectory};
    pub use crate::{Error, Matrix, Result, Vector};
}

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plants.md")]
    mod plants {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/control-law.md")]
    mod control_law {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
