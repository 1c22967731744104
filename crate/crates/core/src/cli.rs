//! Command implementations behind the `nrflow` binary.
//!
//! Each command writes its artifacts into an output directory and returns a
//! [`CommandOutput`]; the binary only parses arguments and maps errors to
//! exit codes via [`exit_code`].

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lti::{position_stability_condition, position_stability_report, Verdict};
use crate::scenarios::{
    asymptotic_error_sup, fmt_float, mean_tracking_error, run_named_experiment,
    simulate_closed_loop, simulate_platoon, termination_label, ExperimentName, ScenarioSpec,
    Termination, Trajectory,
};

/// Parse and validate a TOML scenario document.
///
/// Unknown keys are rejected. Structural problems are reported as
/// [`Error::Validation`] naming the dotted field path (for example
/// `controller.T`); syntax errors as [`Error::Parse`] with a 1-based
/// line and column.
pub fn parse_config(text: &str) -> Result<ScenarioSpec> {
    let de = toml::Deserializer::new(text);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        config_error(text, &path, &inner)
    })?;
    spec.validate()?;
    Ok(spec)
}

fn config_error(text: &str, path: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    let prefix = if path == "." {
        String::new()
    } else {
        format!("{path}.")
    };
    // Missing keys are reported against their parent table.
    if let Some(rest) = message.strip_prefix("missing field `") {
        let name = rest.split('`').next().unwrap_or_default();
        return Error::validation(format!("{prefix}{name}"), message.clone());
    }
    if path != "." {
        return Error::validation(path, message);
    }
    let (line, column) = err
        .span()
        .map(|s| line_column(text, s.start))
        .unwrap_or((0, 0));
    Error::Parse {
        line,
        column,
        message,
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Canonical TOML form of a scenario; [`parse_config`] reads it back to an
/// equal spec.
pub fn canonical_config(spec: &ScenarioSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::InvalidArgument(format!("cannot serialize: {e}")))
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ScenarioSpec) -> Result<()> {
        if let Some(t) = self.horizon {
            spec.controller.horizon = t;
        }
        if let Some(a) = self.alpha {
            spec.controller.alpha = a;
        }
        if let Some(dt) = self.dt {
            spec.controller.dt = dt;
        }
        if let Some(d) = self.duration {
            spec.duration = d;
        }
        if let Some(seed) = self.seed {
            match spec.platoon.as_mut() {
                Some(p) => p.seed = seed,
                None => {
                    return Err(Error::validation(
                        "platoon.seed",
                        "seed override needs a [platoon] section",
                    ))
                }
            }
        }
        spec.validate().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A run diverged although the scenario demands stability.
    Diverged,
    /// A run aborted on a singular lookahead Jacobian.
    Singular,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Diverged => 4,
            Status::Singular => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub status: Status,
}

/// Process exit code for an error: 2 usage, 3 validation, 4 numeric,
/// 5 singular, 1 i/o.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        "argument" => 2,
        "validation" => 3,
        "numeric" => 4,
        "singular" => 5,
        _ => 1,
    }
}

/// One-line machine-parsable error report.
pub fn error_line(err: &Error) -> String {
    format!(
        "error[{}]: {}",
        err.class(),
        err.to_string().replace('\n', " ")
    )
}

struct OutDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<fs::File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.root.join(name);
        f(BufWriter::new(fs::File::create(&path)?))?;
        self.files.push(path);
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn trajectory(&mut self, label: &str, traj: &Trajectory) -> Result<()> {
        self.write_with(&format!("{label}.csv"), |w| traj.write_csv(w))
    }
}

/// Gnuplot script drawing column `y` of each CSV against time, plus an
/// optional dashed reference curve.
fn plot_script(
    title: &str,
    series: &[(String, usize)],
    reference: Option<(String, usize)>,
) -> String {
    let mut out = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nset xlabel 't'\nplot \\\n"
    );
    let mut lines: Vec<_> = series
        .iter()
        .map(|(csv, y)| format!("  '{csv}' using 1:{y} with lines title '{csv}'"))
        .collect();
    if let Some((csv, col)) = reference {
        lines.push(format!(
            "  '{csv}' using 1:{col} with lines dashtype 2 title 'reference'"
        ));
    }
    out.push_str(&lines.join(", \\\n"));
    out.push('\n');
    out
}

/// Columns (1-based) of `y_1` and `r_1` in a trajectory CSV.
fn output_columns(traj: &Trajectory) -> (usize, usize) {
    let n = traj.states.first().map_or(0, |x| x.len());
    let k = traj.controls.first().map_or(0, |u| u.len());
    (2 + n + k, 2 + n + 2 * k)
}

fn run_summary(spec: &ScenarioSpec, traj: &Trajectory) -> Result<String> {
    let mut out = format!("scenario = {}\n", spec.name);
    out.push_str(&format!("termination = {}\n", termination_label(traj)));
    out.push_str(&format!("samples = {}\n", traj.len()));
    if traj.len() > 1 {
        let end = traj.end_time();
        out.push_str(&format!(
            "mean_tracking_error = {}\n",
            fmt_float(mean_tracking_error(traj, 0.0, end)?)
        ));
        out.push_str(&format!(
            "tail_error_sup = {}\n",
            fmt_float(asymptotic_error_sup(traj, 0.25)?)
        ));
    }
    if let Termination::Singular { message, .. } = &traj.termination {
        out.push_str(&format!("diagnostic = {message}\n"));
    }
    Ok(out)
}

fn status_of(spec: &ScenarioSpec, traj: &Trajectory) -> Status {
    match traj.termination {
        Termination::Singular { .. } => Status::Singular,
        Termination::Diverged { .. } if spec.require_stable => Status::Diverged,
        _ => Status::Ok,
    }
}

/// `run`: simulate a scenario file.
pub fn cmd_run(config: &Path, out_dir: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let text =
        fs::read_to_string(config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
    let mut spec = parse_config(&text)?;
    overrides.apply(&mut spec)?;
    let label = if spec.name.is_empty() {
        "run".to_string()
    } else {
        spec.name.clone()
    };
    let mut out = OutDir::create(out_dir)?;
    out.write_text("scenario.toml", &canonical_config(&spec)?)?;

    let (summary, status) = if let Some(platoon) = &spec.platoon {
        let run = simulate_platoon(&spec)?;
        let mut csvs = Vec::new();
        for (i, agent) in run.agents.iter().enumerate() {
            let name = format!("{label}_agent{}", i + 1);
            out.trajectory(&name, agent)?;
            csvs.push((format!("{name}.csv"), 2));
        }
        out.write_with("spacing.csv", |w| run.spacing.write_csv(w))?;
        let pairs = run.spacing.values.first().map_or(0, |v| v.len());
        let mut script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset title '{label} interspacing'\nplot \\\n"
        );
        let lines: Vec<_> = (0..pairs)
            .map(|p| format!("  'spacing.csv' using 1:{} with lines", p + 2))
            .collect();
        script.push_str(&lines.join(", \\\n"));
        script.push('\n');
        out.write_text(&format!("{label}.gp"), &script)?;

        let end = run.spacing.times.last().copied().unwrap_or(0.0);
        let mut summary = format!("scenario = {label}\nagents = {}\n", run.agents.len());
        for (i, agent) in run.agents.iter().enumerate() {
            summary.push_str(&format!(
                "agent{}.termination = {}\n",
                i + 1,
                termination_label(agent)
            ));
        }
        summary.push_str(&format!(
            "spacing_max_dev_last_quarter = {}\n",
            fmt_float(run.spacing.max_deviation(platoon.spacing, 0.75 * end, end))
        ));
        let status = run
            .agents
            .iter()
            .map(|a| status_of(&spec, a))
            .max_by_key(|s| s.code())
            .unwrap_or(Status::Ok);
        (summary, status)
    } else {
        let traj = simulate_closed_loop(&spec)?;
        out.trajectory(&label, &traj)?;
        let csv = format!("{label}.csv");
        let (y, r) = output_columns(&traj);
        out.write_text(
            &format!("{label}.gp"),
            &plot_script(&label, &[(csv.clone(), y)], Some((csv, r))),
        )?;
        (run_summary(&spec, &traj)?, status_of(&spec, &traj))
    };
    out.write_text("summary.txt", &summary)?;
    Ok(CommandOutput {
        files: out.files,
        summary,
        status,
    })
}

/// `experiment`: run a named experiment set.
pub fn cmd_experiment(name: &str, out_dir: &Path) -> Result<CommandOutput> {
    let name: ExperimentName = name.parse()?;
    let bundle = run_named_experiment(name)?;
    let mut out = OutDir::create(out_dir)?;
    let mut csvs = Vec::new();
    let mut reference = None;
    for run in &bundle.runs {
        out.trajectory(&run.label, &run.trajectory)?;
        let csv = format!("{}.csv", run.label);
        let (y, r) = output_columns(&run.trajectory);
        reference.get_or_insert((csv.clone(), r));
        csvs.push((csv, y));
    }
    if let Some(platoon) = &bundle.platoon {
        for (i, agent) in platoon.agents.iter().enumerate() {
            let label = format!("{name}_agent{}", i + 1);
            out.trajectory(&label, agent)?;
            csvs.push((format!("{label}.csv"), 2));
        }
        out.write_with("spacing.csv", |w| platoon.spacing.write_csv(w))?;
    }
    out.write_text(
        &format!("{name}.gp"),
        &plot_script(name.as_str(), &csvs, reference),
    )?;
    let summary = bundle.summary();
    out.write_text("summary.txt", &summary)?;
    Ok(CommandOutput {
        files: out.files,
        summary,
        status: Status::Ok,
    })
}

/// `stability`: closed-loop analysis of the position system.
pub fn cmd_stability(a: f64, horizon: f64, alpha: f64) -> Result<String> {
    let report = position_stability_report(a, horizon, alpha)?;
    let closed_form = position_stability_condition(a, horizon, alpha)?;
    let mut out = format!("a = {a}\nT = {horizon}\nalpha = {alpha}\n");
    out.push_str(&report.to_record());
    out.push_str(&format!("closed_form = {closed_form}\n"));
    out.push_str(&format!("verdict = {}\n", report.hurwitz));
    Ok(out)
}

/// Inclusive evenly spaced axis of a sweep grid.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    fn values(&self, field: &str) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::validation(
                field,
                "need finite bounds and points >= 1",
            ));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.min + step * i as f64)
            .collect())
    }
}

/// Grid of `(a, T, alpha)` points for `sweep`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub a: Axis,
    #[serde(rename = "T")]
    pub horizon: Axis,
    pub alpha: Vec<f64>,
}

pub fn parse_grid(text: &str) -> Result<SweepGrid> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(text, &path, &e.into_inner())
    })
}

/// Verdicts over a grid. Points with `a = 0` are skipped.
pub fn sweep_rows(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let a_values = grid.a.values("a")?;
    let t_values = grid.horizon.values("T")?;
    if grid.alpha.is_empty() {
        return Err(Error::validation("alpha", "need at least one value"));
    }
    let mut rows = Vec::new();
    for &alpha in &grid.alpha {
        for &a in &a_values {
            if a == 0.0 {
                continue;
            }
            for &horizon in &t_values {
                let report = position_stability_report(a, horizon, alpha)?;
                rows.push(SweepRow {
                    a,
                    horizon,
                    alpha,
                    verdict: report.hurwitz,
                    max_real_eigenvalue: report.max_real_eigenvalue,
                    closed_form: position_stability_condition(a, horizon, alpha)?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub verdict: Verdict,
    pub max_real_eigenvalue: f64,
    pub closed_form: Verdict,
}

/// `sweep`: stability verdicts over a grid, written to `sweep.csv`.
pub fn cmd_sweep(grid_path: &Path, out_dir: &Path) -> Result<CommandOutput> {
    let text = fs::read_to_string(grid_path)
        .map_err(|e| Error::Io(format!("{}: {e}", grid_path.display())))?;
    let rows = sweep_rows(&parse_grid(&text)?)?;
    let mut out = OutDir::create(out_dir)?;
    out.write_with("sweep.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["a", "T", "alpha", "verdict", "max_real_eig", "closed_form"])?;
        for r in &rows {
            w.write_record([
                fmt_float(r.a),
                fmt_float(r.horizon),
                fmt_float(r.alpha),
                r.verdict.to_string(),
                fmt_float(r.max_real_eigenvalue),
                r.closed_form.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let disagree = rows.iter().filter(|r| r.verdict != r.closed_form).count();
    let summary = format!("points = {}\ndisagreements = {disagree}\n", rows.len());
    out.write_text("summary.txt", &summary)?;
    Ok(CommandOutput {
        files: out.files,
        summary,
        status: Status::Ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{experiment_specs, PlantSpec};

    const FIG2: &str = r#"
name = "fig2_T1"
duration = 40.0

[plant]
kind = "position"
a = -1.0
r_slope = 2.0

[reference]
kind = "ramp-residual"

[controller]
T = 1.0
"#;

    #[test]
    fn parses_fig2_config() {
        let spec = parse_config(FIG2).unwrap();
        let expected = experiment_specs(ExperimentName::Fig2).remove(0);
        assert_eq!(spec, expected);
    }

    #[test]
    fn missing_horizon_names_field() {
        let text = FIG2.replace("T = 1.0", "alpha = 2.0");
        match parse_config(&text).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "controller.T"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_drag_is_rejected() {
        let text = FIG2.replace("a = -1.0", "a = 0.0");
        match parse_config(&text).unwrap_err() {
            Error::Validation { field, message } => {
                assert_eq!(field, "plant.a");
                assert!(message.contains("a"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = FIG2.replace("T = 1.0", "T = 1.0\ngain = 3.0");
        match parse_config(&text).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "controller.gain"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let text = "duration = 40.0\n[plant\nkind = 1\n";
        match parse_config(text).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column >= 1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn canonical_form_round_trips_every_experiment() {
        for name in ExperimentName::ALL {
            for spec in experiment_specs(name) {
                let text = canonical_config(&spec).unwrap();
                assert_eq!(parse_config(&text).unwrap(), spec, "{text}");
            }
        }
    }

    #[test]
    fn lti_config_round_trips() {
        let text = r#"
duration = 5.0
[plant]
kind = "lti"
a = [[0.0, 1.0], [-2.0, -3.0]]
b = [[0.0], [1.0]]
c = [[1.0, 0.0]]
[reference]
kind = "constant"
value = [1.0]
[controller]
T = 0.5
alpha = 2.0
jacobian = "closed-form"
[initial]
x0 = [0.1, 0.0]
"#;
        let spec = parse_config(text).unwrap();
        assert!(matches!(spec.plant, PlantSpec::Lti { .. }));
        let again = parse_config(&canonical_config(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut spec = parse_config(FIG2).unwrap();
        let o = Overrides {
            horizon: Some(0.5),
            duration: Some(10.0),
            ..Default::default()
        };
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.horizon, 0.5);
        assert_eq!(spec.duration, 10.0);
        let bad = Overrides {
            alpha: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(exit_code(&bad.apply(&mut spec).unwrap_err()), 3);
        let seed = Overrides {
            seed: Some(3),
            ..Default::default()
        };
        assert!(seed.apply(&mut spec).is_err());
    }

    #[test]
    fn stability_example_is_stable() {
        let text = cmd_stability(0.5, 3.0, 1.0).unwrap();
        assert!(text.contains("verdict = stable"), "{text}");
        assert!(text.contains("closed_form = stable"), "{text}");
    }

    #[test]
    fn sweep_flips_on_the_closed_form_boundary() {
        let grid = SweepGrid {
            a: Axis {
                min: -2.0,
                max: 1.5,
                points: 15,
            },
            horizon: Axis {
                min: 0.1,
                max: 4.0,
                points: 27,
            },
            alpha: vec![1.0, 5.0],
        };
        let rows = sweep_rows(&grid).unwrap();
        for r in &rows {
            let boundary = 1.0 / (r.alpha - r.a);
            if r.a < r.alpha && (r.horizon - boundary).abs() < 0.05 {
                continue;
            }
            assert_eq!(r.verdict, r.closed_form, "{r:?}");
        }
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
        assert_eq!(exit_code(&Error::validation("f", "m")), 3);
        assert_eq!(
            exit_code(&Error::Divergence {
                step: 1,
                norm: 1e13
            }),
            4
        );
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
        let line = error_line(&Error::validation("controller.T", "missing"));
        assert!(line.starts_with("error[validation]: "));
        assert!(!line.contains('\n'));
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
