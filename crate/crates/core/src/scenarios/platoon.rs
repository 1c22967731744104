//! Platoon of planar single integrators circling counter-clockwise.
//!
//! The leader tracks a point moving on the circle with full preview. Each
//! follower regulates its position to the point at chord distance `d`
//! behind its predecessor on the circle; that target is recomputed from the
//! predecessor's current position every step and held constant over the
//! lookahead. All agents update from the same start-of-step snapshot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ScenarioSpec, Termination, Trajectory};
use crate::controller::{closed_loop_step, ControlState};
use crate::error::{Error, Result};
use crate::integration::DIVERGENCE_GUARD;
use crate::reference::{Reference, ReferenceSignal};
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonSpec {
    pub agents: usize,
    #[serde(default)]
    pub center: [f64; 2],
    pub radius: f64,
    pub spacing: f64,
    /// Leader speed along the circle, in length units per time unit.
    #[serde(default = "default_leader_speed")]
    pub leader_speed: f64,
    /// Initial angular gap between neighbours, as a multiple of the target
    /// chord angle.
    #[serde(default = "default_gap_factor")]
    pub gap_factor: f64,
    /// Half-width of the uniform radial perturbation of initial positions.
    #[serde(default = "default_jitter")]
    pub radial_jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_leader_speed() -> f64 {
    0.5
}

fn default_gap_factor() -> f64 {
    1.3
}

fn default_jitter() -> f64 {
    0.5
}

impl PlatoonSpec {
    pub fn new(agents: usize, radius: f64, spacing: f64) -> Self {
        Self {
            agents,
            center: [0.0, 0.0],
            radius,
            spacing,
            leader_speed: default_leader_speed(),
            gap_factor: default_gap_factor(),
            radial_jitter: default_jitter(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::validation(
                "platoon.agents",
                "need at least one agent",
            ));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::validation("platoon.radius", "must be > 0"));
        }
        if !(self.spacing > 0.0 && self.spacing < 2.0 * self.radius) {
            return Err(Error::validation(
                "platoon.spacing",
                "need 0 < d < 2·radius for the chord to exist",
            ));
        }
        if !self.leader_speed.is_finite() {
            return Err(Error::validation("platoon.leader_speed", "must be finite"));
        }
        if !(self.gap_factor > 0.0) || !(self.radial_jitter >= 0.0) {
            return Err(Error::validation(
                "platoon",
                "gap_factor must be > 0 and radial_jitter >= 0",
            ));
        }
        Ok(())
    }

    /// Angle subtended by a chord of length `spacing`.
    pub fn chord_angle(&self) -> f64 {
        2.0 * (self.spacing / (2.0 * self.radius)).asin()
    }

    pub fn leader_reference(&self) -> ReferenceSignal {
        ReferenceSignal::CirclePoint {
            center: self.center,
            radius: self.radius,
            omega: self.leader_speed / self.radius,
            phase: 0.0,
        }
    }

    /// Leader on the circle at angle 0, followers at clockwise gaps of
    /// `gap_factor` chord angles, radii perturbed by the seeded jitter.
    pub fn initial_positions(&self) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gap = self.gap_factor * self.chord_angle();
        (0..self.agents)
            .map(|i| {
                let radius = if i == 0 || self.radial_jitter == 0.0 {
                    self.radius
                } else {
                    self.radius + rng.gen_range(-self.radial_jitter..=self.radial_jitter)
                };
                let th = -(i as f64) * gap;
                Vector::from_row_slice(&[
                    self.center[0] + radius * th.cos(),
                    self.center[1] + radius * th.sin(),
                ])
            })
            .collect()
    }
}

/// The point at chord distance `spacing` behind (clockwise from) the
/// projection of `pred` onto the circle `B(center, radius)`.
pub fn follower_reference(
    pred: &Vector,
    center: [f64; 2],
    radius: f64,
    spacing: f64,
) -> Result<Vector> {
    if pred.len() != 2 {
        return Err(Error::Dimension {
            context: "predecessor position",
            expected: 2,
            found: pred.len(),
        });
    }
    if !(radius > 0.0) || !(spacing >= 0.0 && spacing < 2.0 * radius) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= d < 2·radius, got d = {spacing}, radius = {radius}"
        )));
    }
    let (dx, dy) = (pred[0] - center[0], pred[1] - center[1]);
    if dx.hypot(dy) <= 1e-12 * radius {
        return Err(Error::InvalidArgument(
            "predecessor at the circle center: projection undefined".into(),
        ));
    }
    let th = dy.atan2(dx) - 2.0 * (spacing / (2.0 * radius)).asin();
    Ok(Vector::from_row_slice(&[
        center[0] + radius * th.cos(),
        center[1] + radius * th.sin(),
    ]))
}

/// Interspacing `‖x_i − x_{i−1}‖` for every adjacent pair at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSeries {
    pub times: Vec<f64>,
    /// `values[n][i]` is the distance between agents `i` and `i + 1`.
    pub values: Vec<Vec<f64>>,
}

impl SpacingSeries {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let pairs = self.values.first().map_or(0, |v| v.len());
        let mut w = csv::Writer::from_writer(writer);
        let header = std::iter::once("t".to_string())
            .chain((1..=pairs).map(|i| format!("s_{}{}", i, i + 1)));
        w.write_record(header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            w.write_record(
                std::iter::once(*t)
                    .chain(row.iter().copied())
                    .map(super::fmt_float),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest `|s − d|` over all pairs and samples in `[t0, t1]`.
    pub fn max_deviation(&self, spacing: f64, t0: f64, t1: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9)
            .flat_map(|(_, row)| row.iter().map(|s| (s - spacing).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PlatoonRun {
    pub agents: Vec<Trajectory>,
    pub spacing: SpacingSeries,
}

fn spacings(positions: &[Vector]) -> Vec<f64> {
    positions
        .windows(2)
        .map(|w| (&w[1] - &w[0]).norm())
        .collect()
}

pub fn simulate_platoon(spec: &ScenarioSpec) -> Result<PlatoonRun> {
    let platoon = spec
        .platoon
        .as_ref()
        .ok_or_else(|| Error::validation("platoon", "missing platoon section"))?;
    let plant = spec.validate()?;
    let cfg = spec.controller.config();
    let steps = (spec.duration / cfg.dt).round() as usize;
    let leader_ref = platoon.leader_reference();

    let mut positions = platoon.initial_positions();
    let mut controls = vec![Vector::zeros(2); platoon.agents];
    let mut agents: Vec<Trajectory> = (0..platoon.agents)
        .map(|_| Trajectory::new(cfg.dt))
        .collect();
    let mut spacing = SpacingSeries {
        times: Vec::new(),
        values: Vec::new(),
    };

    let targets = |positions: &[Vector], t: f64| -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(positions.len());
        out.push(leader_ref.eval(t));
        for w in positions.windows(2) {
            out.push(follower_reference(
                &w[0],
                platoon.center,
                platoon.radius,
                platoon.spacing,
            )?);
        }
        Ok(out)
    };
    let record = |agents: &mut [Trajectory],
                  spacing: &mut SpacingSeries,
                  t: f64,
                  positions: &[Vector],
                  controls: &[Vector],
                  refs: &[Vector]| {
        for (i, traj) in agents.iter_mut().enumerate() {
            traj.push(
                t,
                positions[i].clone(),
                controls[i].clone(),
                positions[i].clone(),
                refs[i].clone(),
            );
        }
        spacing.times.push(t);
        spacing.values.push(spacings(positions));
    };

    let mut refs = targets(&positions, 0.0)?;
    record(&mut agents, &mut spacing, 0.0, &positions, &controls, &refs);

    'outer: for n in 0..steps {
        let t = n as f64 * cfg.dt;
        let mut next = Vec::with_capacity(platoon.agents);
        for i in 0..platoon.agents {
            let state = ControlState {
                u: controls[i].clone(),
                t,
            };
            let result = if i == 0 {
                closed_loop_step(&plant, &state, &positions[0], &leader_ref, &cfg)
            } else {
                // Zero-order hold: the target computed now stands in for r(t + T).
                let held = ReferenceSignal::Constant {
                    value: refs[i].iter().copied().collect(),
                };
                closed_loop_step(&plant, &state, &positions[i], &held, &cfg)
            };
            match result {
                Ok(out) => {
                    if !(out.x_next.norm().max(out.u_next.norm()) <= DIVERGENCE_GUARD) {
                        for a in agents.iter_mut() {
                            a.termination = Termination::Diverged { step: n, time: t };
                        }
                        break 'outer;
                    }
                    next.push((out.x_next, out.u_next));
                }
                Err(Error::Singular { .. }) => {
                    for a in agents.iter_mut() {
                        a.termination = Termination::Singular {
                            time: t,
                            message: format!("agent {} jacobian singular", i + 1),
                        };
                    }
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        for (i, (x, u)) in next.into_iter().enumerate() {
            positions[i] = x;
            controls[i] = u;
        }
        let t_next = (n + 1) as f64 * cfg.dt;
        refs = targets(&positions, t_next)?;
        record(
            &mut agents,
            &mut spacing,
            t_next,
            &positions,
            &controls,
            &refs,
        );
    }

    Ok(PlatoonRun { agents, spacing })
}
