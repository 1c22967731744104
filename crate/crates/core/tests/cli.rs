use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nrflow::cli::{canonical_config, parse_config};
use nrflow::controller::Preview;
use nrflow::predictor::JacobianMethod;
use nrflow::reference::ReferenceSignal;
use nrflow::scenarios::{ControllerSpec, InitialSpec, PlantSpec, ScenarioSpec};
use proptest::prelude::*;

fn nrflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const PLATOON: &str = r#"
name = "ring"
duration = 4.0

[plant]
kind = "integrator"

[controller]
T = 0.6
alpha = 45.0

[platoon]
agents = 4
radius = 28.0
spacing = 14.0
seed = 11
"#;

#[test]
fn experiment_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = nrflow(&["experiment", "fig2", "-o", "fig2"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["fig2_T1.csv", "fig2_T05.csv", "summary.txt", "fig2.gp"] {
        assert!(dir.path().join("fig2").join(f).exists(), "missing {f}");
    }
    let summary = fs::read_to_string(dir.path().join("fig2/summary.txt")).unwrap();
    assert!(summary.contains("T1.converges = true"), "{summary}");
    let csv = fs::read_to_string(dir.path().join("fig2/fig2_T1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x_1,x_2,u_1,y_1,r_1"));
    assert_eq!(csv.lines().count(), 4002);
}

#[test]
fn stability_reports_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = nrflow(
        &["stability", "--a", "0.5", "--T", "3", "--alpha", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict = stable"), "{text}");
    let out = nrflow(&["stability", "--a", "-1", "--T", "0.4"], dir.path());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("verdict = unstable"));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    let missing = write(
        p,
        "missing.toml",
        "duration = 1.0\n[plant]\nkind = \"position\"\na = -1.0\n[controller]\nalpha = 1.0\n",
    );
    let out = nrflow(&["run", &missing], p);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[validation]:"), "{err}");
    assert!(err.contains("controller.T"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let out = nrflow(&["experiment", "fig9"], p);
    assert_eq!(out.status.code(), Some(2));
    let out = nrflow(&["stability", "--a", "1"], p);
    assert_eq!(out.status.code(), Some(2));

    let unstable = write(
        p,
        "unstable.toml",
        "duration = 200.0\nrequire_stable = true\n[plant]\nkind = \"position\"\na = -1.0\nr_slope = 2.0\n[reference]\nkind = \"ramp-residual\"\n[controller]\nT = 0.3\n",
    );
    let out = nrflow(&["run", &unstable, "-o", "u"], p);
    assert_eq!(out.status.code(), Some(4));
    assert!(p.join("u/summary.txt").exists());

    // C is orthogonal to the reachable direction, so ∂g/∂u vanishes.
    let singular = write(
        p,
        "singular.toml",
        "duration = 1.0\n[plant]\nkind = \"lti\"\na = [[-1.0, 0.0], [0.0, -2.0]]\nb = [[1.0], [0.0]]\nc = [[0.0, 1.0]]\n[reference]\nkind = \"constant\"\nvalue = [1.0]\n[controller]\nT = 1.0\n",
    );
    let out = nrflow(&["run", &singular, "-o", "s"], p);
    assert_eq!(out.status.code(), Some(5));
    let summary = fs::read_to_string(p.join("s/summary.txt")).unwrap();
    assert!(summary.contains("termination = singular@0.00"), "{summary}");
}

#[test]
fn platoon_runs_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = write(p, "ring.toml", PLATOON);
    for out in ["a", "b"] {
        assert!(nrflow(&["run", &cfg, "-o", out], p).status.success());
    }
    let c = nrflow(&["run", &cfg, "-o", "c", "--seed", "12"], p);
    assert!(c.status.success());
    for f in ["spacing.csv", "ring_agent1.csv", "ring_agent4.csv"] {
        let a = fs::read(p.join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(p.join("b").join(f)).unwrap(), "{f}");
        // The leader starts on the circle; only followers are jittered.
        if f != "ring_agent1.csv" {
            assert_ne!(a, fs::read(p.join("c").join(f)).unwrap(), "{f}");
        }
    }
    let header = fs::read_to_string(p.join("a/spacing.csv")).unwrap();
    assert_eq!(header.lines().next(), Some("t,s_12,s_23,s_34"));
}

#[test]
fn run_overrides_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = write(
        p,
        "ramp.toml",
        "name = \"ramp\"\nduration = 40.0\n[plant]\nkind = \"position\"\na = -1.0\nr_slope = 2.0\n[reference]\nkind = \"ramp-residual\"\n[controller]\nT = 0.5\n",
    );
    let out = nrflow(&["run", &cfg, "-o", "o", "--T", "1", "--duration", "2"], p);
    assert!(out.status.success());
    let canonical = fs::read_to_string(p.join("o/scenario.toml")).unwrap();
    let spec = parse_config(&canonical).unwrap();
    assert_eq!(spec.controller.horizon, 1.0);
    assert_eq!(spec.duration, 2.0);
    let csv = fs::read_to_string(p.join("o/ramp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn sweep_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let grid = write(
        p,
        "grid.toml",
        "alpha = [1.0, 5.0]\n[a]\nmin = -2.0\nmax = 1.5\npoints = 8\n[T]\nmin = 0.1\nmax = 4.0\npoints = 8\n",
    );
    let out = nrflow(&["sweep", &grid, "-o", "sw"], p);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(p.join("sw/sweep.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("a,T,alpha,verdict,max_real_eig,closed_form")
    );
    // The a axis steps by 0.5 through 0, where the plant is undefined.
    assert_eq!(csv.lines().count(), 1 + 2 * 7 * 8);
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn plant_spec() -> impl Strategy<Value = PlantSpec> {
    prop_oneof![
        (
            prop_oneof![finite(-3.0, -0.1), finite(0.1, 3.0)],
            finite(-3.0, 3.0)
        )
            .prop_map(|(a, r_slope)| PlantSpec::Position { a, r_slope }),
        (finite(0.1, 3.0), finite(0.1, 3.0)).prop_map(|(a, b)| PlantSpec::Pendulum { a, b }),
        (finite(-2.0, -0.5), finite(-1.0, 1.0), finite(0.5, 2.0)).prop_map(|(d, b, c)| {
            PlantSpec::Lti {
                a: vec![vec![d]],
                b: vec![vec![b + 2.0]],
                c: vec![vec![c]],
            }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_round_trips(
        plant in plant_spec(),
        horizon in finite(0.05, 5.0),
        alpha in finite(0.5, 50.0),
        duration in finite(0.5, 100.0),
        offset in finite(-1.0, 1.0),
        amplitude in finite(0.0, 1.0),
        fd in any::<bool>(),
        with_x0 in any::<bool>(),
    ) {
        let n = match &plant {
            PlantSpec::Lti { .. } => 1,
            _ => 2,
        };
        let mut controller = ControllerSpec::new(horizon, alpha);
        if fd {
            controller.jacobian = JacobianMethod::SimulatedFd;
        }
        if amplitude > 0.5 {
            controller.preview = Preview::Hold;
        }
        let spec = ScenarioSpec {
            name: "prop".into(),
            duration,
            require_stable: fd,
            plant,
            reference: Some(ReferenceSignal::sinusoid(offset, amplitude, 1.5)),
            controller,
            initial: InitialSpec {
                x0: with_x0.then(|| vec![offset; n]),
                u0: None,
            },
            platoon: None,
        };
        spec.validate().unwrap();
        let text = canonical_config(&spec).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), spec);
    }
}
