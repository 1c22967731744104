//! Reference signals with full preview: every signal can be evaluated at
//! any future time, so the controller may read `r(t + T)` at time `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

pub trait Reference {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64) -> Vector;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSignal {
    Constant {
        value: Vec<f64>,
    },
    /// `r ≡ 0` in `k` dimensions; used by plants written in residual
    /// coordinates such as the ramp-following position plant.
    RampResidual {
        #[serde(default = "one")]
        dim: usize,
    },
    /// `offset + amplitude·sin(omega·t)`, componentwise.
    Sinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        #[serde(default = "unit")]
        omega: f64,
    },
    /// Point moving counter-clockwise on a circle:
    /// `center + radius·(cos(phase + omega·t), sin(phase + omega·t))`.
    CirclePoint {
        center: [f64; 2],
        radius: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl ReferenceSignal {
    pub fn constant(value: &[f64]) -> Self {
        ReferenceSignal::Constant {
            value: value.to_vec(),
        }
    }

    pub fn sinusoid(offset: f64, amplitude: f64, omega: f64) -> Self {
        ReferenceSignal::Sinusoid {
            offset: vec![offset],
            amplitude: vec![amplitude],
            omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::validation("reference", msg.to_string()));
        match self {
            ReferenceSignal::Constant { value } => {
                if value.is_empty() {
                    return bad("constant reference needs at least one component");
                }
                if !value.iter().all(|v| v.is_finite()) {
                    return bad("constant reference must be finite");
                }
            }
            ReferenceSignal::RampResidual { dim } => {
                if *dim == 0 {
                    return bad("dimension must be >= 1");
                }
            }
            ReferenceSignal::Sinusoid {
                offset,
                amplitude,
                omega,
            } => {
                if offset.is_empty() || offset.len() != amplitude.len() {
                    return bad("offset and amplitude must be non-empty and equally long");
                }
                if !offset.iter().chain(amplitude).all(|v| v.is_finite()) || !omega.is_finite() {
                    return bad("sinusoid parameters must be finite");
                }
            }
            ReferenceSignal::CirclePoint {
                center,
                radius,
                omega,
                phase,
            } => {
                if !(*radius > 0.0) {
                    return bad("circle radius must be > 0");
                }
                if !center.iter().chain([omega, phase]).all(|v| v.is_finite()) {
                    return bad("circle parameters must be finite");
                }
            }
        }
        Ok(())
    }

    /// `sup_t ‖ṙ(t)‖`.
    pub fn rate_bound(&self) -> f64 {
        match self {
            ReferenceSignal::Constant { .. } | ReferenceSignal::RampResidual { .. } => 0.0,
            ReferenceSignal::Sinusoid {
                amplitude, omega, ..
            } => amplitude.iter().map(|a| a * a).sum::<f64>().sqrt() * omega.abs(),
            ReferenceSignal::CirclePoint { radius, omega, .. } => radius * omega.abs(),
        }
    }
}

impl Reference for ReferenceSignal {
    fn dim(&self) -> usize {
        match self {
            ReferenceSignal::Constant { value } => value.len(),
            ReferenceSignal::RampResidual { dim } => *dim,
            ReferenceSignal::Sinusoid { offset, .. } => offset.len(),
            ReferenceSignal::CirclePoint { .. } => 2,
        }
    }

    fn eval(&self, t: f64) -> Vector {
        match self {
            ReferenceSignal::Constant { value } => Vector::from_row_slice(value),
            ReferenceSignal::RampResidual { dim } => Vector::zeros(*dim),
            ReferenceSignal::Sinusoid {
                offset,
                amplitude,
                omega,
            } => {
                let s = (omega * t).sin();
                Vector::from_iterator(
                    offset.len(),
                    offset.iter().zip(amplitude).map(|(c0, c1)| c0 + c1 * s),
                )
            }
            ReferenceSignal::CirclePoint {
                center,
                radius,
                omega,
                phase,
            } => {
                let th = phase + omega * t;
                Vector::from_row_slice(&[
                    center[0] + radius * th.cos(),
                    center[1] + radius * th.sin(),
                ])
            }
        }
    }
}
