//! Preconfigured experiment sets.
//!
//! | name      | plant                         | runs                                   |
//! |-----------|-------------------------------|----------------------------------------|
//! | `fig2`    | position, a = −1, ramp r = 2  | T = 1, 0.5, 0.4                        |
//! | `fig3`    | position, a = 0.5, 2 + sin t  | (T, α) = (3, 1), (0.4, 5)              |
//! | `fig4`    | pendulum, target π/6          | T = 2, 0.8                             |
//! | `fig5`    | pendulum, π/6 + (π/8) sin t, held reference | (2, 1), (0.15, 1), (0.15, 20), (0.2, 8) |
//! | `platoon` | 8 planar integrators          | T = 0.6, α = 45                        |
//! | `prop1`   | memoryless u³ + u, sin t      | α = 1, 10                              |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{
    asymptotic_error_sup, mean_tracking_error, output_amplitude, peak_control_rate,
    simulate_closed_loop, simulate_platoon, tracking_error_integral, ControllerSpec, InitialSpec,
    MemorylessMapKind, PlantSpec, PlatoonRun, PlatoonSpec, ScenarioSpec, Trajectory,
};
use crate::controller::Preview;
use crate::error::{Error, Result};
use crate::reference::ReferenceSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Platoon,
    Prop1,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Fig2,
        ExperimentName::Fig3,
        ExperimentName::Fig4,
        ExperimentName::Fig5,
        ExperimentName::Platoon,
        ExperimentName::Prop1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig2 => "fig2",
            ExperimentName::Fig3 => "fig3",
            ExperimentName::Fig4 => "fig4",
            ExperimentName::Fig5 => "fig5",
            ExperimentName::Platoon => "platoon",
            ExperimentName::Prop1 => "prop1",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
                Error::InvalidArgument(format!(
                    "unknown experiment `{s}`; valid names: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub label: String,
    pub spec: ScenarioSpec,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub name: ExperimentName,
    pub runs: Vec<ExperimentRun>,
    pub platoon: Option<PlatoonRun>,
    pub metrics: Vec<(String, f64)>,
    pub verdicts: Vec<(String, bool)>,
}

impl ExperimentBundle {
    pub fn run(&self, label: &str) -> Option<&ExperimentRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn verdict(&self, key: &str) -> Option<bool> {
        self.verdicts
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }

    /// `key = value` summary record.
    pub fn summary(&self) -> String {
        let mut out = format!("experiment = {}\n", self.name);
        for run in &self.runs {
            out.push_str(&format!(
                "run.{}.termination = {}\n",
                run.label,
                termination_label(&run.trajectory)
            ));
        }
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k} = {}\n", super::fmt_float(*v)));
        }
        for (k, v) in &self.verdicts {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

pub(crate) fn termination_label(traj: &Trajectory) -> String {
    match &traj.termination {
        super::Termination::Completed => "completed".into(),
        super::Termination::Diverged { time, .. } => format!("diverged@{time:.2}"),
        super::Termination::Singular { time, .. } => format!("singular@{time:.2}"),
    }
}

fn scenario(
    name: &str,
    duration: f64,
    plant: PlantSpec,
    reference: ReferenceSignal,
    horizon: f64,
    alpha: f64,
) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        duration,
        require_stable: false,
        plant,
        reference: Some(reference),
        controller: ControllerSpec::new(horizon, alpha),
        initial: InitialSpec::default(),
        platoon: None,
    }
}

/// Scenario specs making up an experiment, in run order.
pub fn experiment_specs(name: ExperimentName) -> Vec<ScenarioSpec> {
    let ramp = ReferenceSignal::RampResidual { dim: 1 };
    let position = |a: f64, r_slope: f64| PlantSpec::Position { a, r_slope };
    let pendulum = PlantSpec::Pendulum { a: 1.0, b: 0.2 };
    match name {
        ExperimentName::Fig2 => [(1.0, "fig2_T1"), (0.5, "fig2_T05"), (0.4, "fig2_T04")]
            .into_iter()
            .map(|(t, label)| scenario(label, 40.0, position(-1.0, 2.0), ramp.clone(), t, 1.0))
            .collect(),
        ExperimentName::Fig3 => {
            let r = ReferenceSignal::sinusoid(2.0, 1.0, 1.0);
            vec![
                scenario("fig3_T3", 40.0, position(0.5, 0.0), r.clone(), 3.0, 1.0),
                scenario("fig3_T04_a5", 40.0, position(0.5, 0.0), r, 0.4, 5.0),
            ]
        }
        ExperimentName::Fig4 => {
            let r = ReferenceSignal::constant(&[PI / 6.0]);
            vec![
                scenario("fig4_T2", 40.0, pendulum.clone(), r.clone(), 2.0, 1.0),
                scenario("fig4_T08", 40.0, pendulum, r, 0.8, 1.0),
            ]
        }
        ExperimentName::Fig5 => {
            let r = ReferenceSignal::sinusoid(PI / 6.0, PI / 8.0, 1.0);
            [
                ("fig5_T2", 2.0, 1.0),
                ("fig5_T015", 0.15, 1.0),
                ("fig5_T015_a20", 0.15, 20.0),
                ("fig5_T02_a8", 0.2, 8.0),
            ]
            .into_iter()
            .map(|(label, t, alpha)| {
                let mut spec = scenario(label, 40.0, pendulum.clone(), r.clone(), t, alpha);
                spec.controller.preview = Preview::Hold;
                spec
            })
            .collect()
        }
        ExperimentName::Platoon => vec![ScenarioSpec {
            name: "platoon".into(),
            duration: 20.0,
            require_stable: false,
            plant: PlantSpec::Integrator { k: 2 },
            reference: None,
            controller: ControllerSpec::new(0.6, 45.0),
            initial: InitialSpec::default(),
            platoon: Some(PlatoonSpec::new(8, 28.0, 14.0)),
        }],
        ExperimentName::Prop1 => [(1.0, "prop1_a1"), (10.0, "prop1_a10")]
            .into_iter()
            .map(|(alpha, label)| {
                scenario(
                    label,
                    60.0,
                    PlantSpec::Memoryless {
                        map: MemorylessMapKind::Cubic,
                        k: 1,
                    },
                    ReferenceSignal::sinusoid(0.0, 1.0, 1.0),
                    1.0,
                    alpha,
                )
            })
            .collect(),
    }
}

/// Run independent scenarios concurrently; results keep input order.
fn run_all(specs: Vec<ScenarioSpec>) -> Result<Vec<ExperimentRun>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .into_iter()
            .map(|spec| {
                s.spawn(move || {
                    simulate_closed_loop(&spec).map(|trajectory| ExperimentRun {
                        label: spec.name.clone(),
                        spec,
                        trajectory,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Amplitude of `y₁` over `[30, 40)` relative to `[10, 20)`.
/// Amplitudes of the first output over consecutive 10 s windows.
fn window_amplitudes(traj: &Trajectory, windows: usize) -> Result<Vec<f64>> {
    (0..windows)
        .map(|w| output_amplitude(traj, 0, 10.0 * w as f64, 10.0 * (w + 1) as f64))
        .collect()
}

/// `(growth, monotone)`: last over first window amplitude, and whether every
/// window exceeds the one before it.
fn successive_growth(traj: &Trajectory) -> Result<(f64, bool)> {
    let amps = window_amplitudes(traj, 4)?;
    let monotone = amps.windows(2).all(|p| p[1] > p[0]);
    let last = amps[amps.len() - 1];
    Ok((
        if last.is_infinite() {
            f64::INFINITY
        } else {
            last / amps[0]
        },
        monotone,
    ))
}

fn growth(traj: &Trajectory) -> Result<f64> {
    let early = output_amplitude(traj, 0, 10.0, 20.0)?;
    let late = output_amplitude(traj, 0, 30.0, 40.0)?;
    Ok(if late.is_infinite() {
        f64::INFINITY
    } else {
        late / early
    })
}

pub fn run_named_experiment(name: ExperimentName) -> Result<ExperimentBundle> {
    let specs = experiment_specs(name);
    let mut bundle = ExperimentBundle {
        name,
        runs: Vec::new(),
        platoon: None,
        metrics: Vec::new(),
        verdicts: Vec::new(),
    };
    let metric = |b: &mut ExperimentBundle, k: &str, v: f64| b.metrics.push((k.into(), v));

    match name {
        ExperimentName::Platoon => {
            let spec = specs.into_iter().next().expect("one platoon spec");
            let run = simulate_platoon(&spec)?;
            let d = spec.platoon.as_ref().map_or(0.0, |p| p.spacing);
            let dev = run.spacing.max_deviation(d, 15.0, spec.duration);
            metric(&mut bundle, "spacing_max_dev_15_20", dev);
            bundle
                .verdicts
                .push(("interspacing_tracked".into(), dev < 0.5));
            bundle.platoon = Some(run);
            return Ok(bundle);
        }
        _ => bundle.runs = run_all(specs)?,
    }

    let traj =
        |b: &ExperimentBundle, label: &str| b.run(label).expect("run present").trajectory.clone();
    match name {
        ExperimentName::Fig2 => {
            let t1 = traj(&bundle, "fig2_T1");
            let final_x1 = t1.outputs.last().map_or(f64::NAN, |y| y[0].abs());
            metric(&mut bundle, "T1.final_abs_x1", final_x1);
            let g05 = growth(&traj(&bundle, "fig2_T05"))?;
            let g04 = growth(&traj(&bundle, "fig2_T04"))?;
            metric(&mut bundle, "T05.amplitude_growth", g05);
            metric(&mut bundle, "T04.amplitude_growth", g04);
            bundle
                .verdicts
                .push(("T1.converges".into(), final_x1 < 1e-3));
            bundle
                .verdicts
                .push(("T05.oscillation_grows".into(), g05 > 1.0));
            bundle.verdicts.push(("T04.unstable".into(), g04 >= 5.0));
        }
        ExperimentName::Fig3 => {
            let slow = traj(&bundle, "fig3_T3");
            let fast = traj(&bundle, "fig3_T04_a5");
            let e_slow = mean_tracking_error(&slow, 20.0, 40.0)?;
            let e_fast = mean_tracking_error(&fast, 20.0, 40.0)?;
            metric(&mut bundle, "T3.mean_error_20_40", e_slow);
            metric(&mut bundle, "T04_a5.mean_error_20_40", e_fast);
            metric(
                &mut bundle,
                "T04_a5.peak_udot_0_3",
                peak_control_rate(&fast, 0.0, 3.0)?,
            );
            bundle
                .verdicts
                .push(("T3.bounded".into(), slow.completed()));
            bundle
                .verdicts
                .push(("T04_a5.tracks".into(), e_fast < 0.15));
            bundle
                .verdicts
                .push(("error_ratio_above_3".into(), e_slow > 3.0 * e_fast));
        }
        ExperimentName::Fig4 => {
            let stable = traj(&bundle, "fig4_T2");
            let target = PI / 6.0;
            let range = stable.window(30.0, stable.end_time())?;
            let dev = stable.outputs[range.start..]
                .iter()
                .map(|y| (y[0] - target).abs())
                .fold(0.0, f64::max);
            metric(&mut bundle, "T2.max_dev_after_30", dev);
            let unstable = traj(&bundle, "fig4_T08");
            let (g, monotone) = successive_growth(&unstable)?;
            metric(&mut bundle, "T08.amplitude_growth", g);
            bundle.verdicts.push(("T2.tracks".into(), dev < 0.01));
            bundle.verdicts.push((
                "T08.unstable".into(),
                unstable.diverged() || (monotone && g >= 5.0),
            ));
        }
        ExperimentName::Fig5 => {
            for label in ["fig5_T2", "fig5_T015_a20", "fig5_T02_a8"] {
                let t = traj(&bundle, label);
                let e = tracking_error_integral(&t, 5.0, 35.0)?;
                metric(&mut bundle, &format!("{}.E", &label[5..]), e);
            }
            let unstable = traj(&bundle, "fig5_T015");
            bundle.verdicts.push((
                "T015.unstable".into(),
                !unstable.completed() || growth(&unstable)? >= 5.0,
            ));
            let e20 = bundle.metric("T015_a20.E").unwrap_or(f64::NAN);
            let e8 = bundle.metric("T02_a8.E").unwrap_or(f64::NAN);
            bundle
                .verdicts
                .push(("E_T015_a20_below_E_T02_a8".into(), e20 < e8));
        }
        ExperimentName::Prop1 => {
            for (label, alpha) in [("prop1_a1", 1.0), ("prop1_a10", 10.0)] {
                let t = traj(&bundle, label);
                let sup = asymptotic_error_sup(&t, 0.25)?;
                let bound = 1.0 / alpha;
                metric(&mut bundle, &format!("{}.tail_sup", &label[6..]), sup);
                metric(&mut bundle, &format!("{}.bound", &label[6..]), bound);
                bundle
                    .verdicts
                    .push((format!("{}.within_bound", &label[6..]), sup <= bound));
            }
        }
        ExperimentName::Platoon => unreachable!(),
    }
    Ok(bundle)
}
