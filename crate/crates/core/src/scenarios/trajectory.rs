use std::io::Write;

use crate::error::{Error, Result};
use crate::Vector;

/// How a simulation run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The overflow guard tripped during the step starting at `time`.
    Diverged {
        step: usize,
        time: f64,
    },
    /// The lookahead Jacobian became singular at `time`.
    Singular {
        time: f64,
        message: String,
    },
}

/// Uniformly sampled record of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub references: Vec<Vector>,
    pub termination: Termination,
}

impl Trajectory {
    pub(crate) fn new(dt: f64) -> Self {
        Self {
            dt,
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            outputs: Vec::new(),
            references: Vec::new(),
            termination: Termination::Completed,
        }
    }

    pub(crate) fn push(&mut self, t: f64, x: Vector, u: Vector, y: Vector, r: Vector) {
        self.times.push(t);
        self.states.push(x);
        self.controls.push(u);
        self.outputs.push(y);
        self.references.push(r);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Tracking error `‖r(t_n) − y(t_n)‖` per sample.
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.references
            .iter()
            .zip(&self.outputs)
            .map(|(r, y)| (r - y).norm())
    }

    /// Sample index range `[n0, n1)` covering the time window `[t0, t1)`.
    pub fn window(&self, t0: f64, t1: f64) -> Result<std::ops::Range<usize>> {
        let start = self.times.first().copied().unwrap_or(0.0);
        let slack = 1e-9 * self.dt;
        if !(t0 < t1) || t0 < start - slack || t1 > self.end_time() + slack {
            return Err(Error::InvalidArgument(format!(
                "window [{t0}, {t1}] outside trajectory span [{start}, {}]",
                self.end_time()
            )));
        }
        let n0 = ((t0 - start) / self.dt).round() as usize;
        let n1 = ((t1 - start) / self.dt).round() as usize;
        Ok(n0..n1.min(self.len()))
    }

    /// CSV with columns `t, x_1..x_n, u_1..u_k, y_1..y_k, r_1..r_k`; floats
    /// carry nine significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let k = self.controls.first().map_or(0, |u| u.len());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for (prefix, count) in [("x", n), ("u", k), ("y", k), ("r", k)] {
            header.extend((1..=count).map(|i| format!("{prefix}_{i}")));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.states[i].iter().copied())
                .chain(self.controls[i].iter().copied())
                .chain(self.outputs[i].iter().copied())
                .chain(self.references[i].iter().copied())
                .map(fmt_float);
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nine significant digits in scientific notation.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}
