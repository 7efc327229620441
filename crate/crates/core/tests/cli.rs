//! End-to-end runs of the `rumorsim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rumorsim::output::read_trajectory_csv;
use rumorsim::scenario::{expand_preset, load_scenario, PresetId};

fn rumorsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rumorsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn docs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenarios")
}

#[test]
fn run_writes_trajectory_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorsim(&["run", "--preset", "high-quality", "--out", "d/"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("d/trajectory.csv")).unwrap();
    assert!(text.starts_with("time,s,ia,ib,r\n"));
    let (times, states) = read_trajectory_csv(&dir.path().join("d/trajectory.csv")).unwrap();
    assert_eq!(times.len(), 1001);
    assert_eq!(states[0].ia, 100.0);
    let meta = std::fs::read_to_string(dir.path().join("d/trajectory.meta")).unwrap();
    for key in ["b1=0.3", "mode=conserving", "dt=0.01", "version=", "command=run"] {
        assert!(meta.contains(key), "missing {key}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("peak_ia="));
}

#[test]
fn sweep_report_has_one_row_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorsim(
        &["sweep", "--preset", "high-quality", "--param", "b2", "--out", "s"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "param_value,peak_ia,peak_time,duration,spread_scale,final_r");
    assert_eq!(lines.len(), 12);
    assert!(lines[4].starts_with("0.3,"));
    assert!(dir.path().join("s/sweep_directions.csv").exists());

    let o = rumorsim(&["sweep", "--param", "w1", "--grid", "2,4,6", "--out", "g"], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("g/sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn fixed_and_unknown_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorsim(&["sweep", "--param", "r1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fixed"));
    assert!(o.stdout.is_empty());
    assert!(!dir.path().join("out").exists());
    assert_eq!(code(&rumorsim(&["sweep", "--param", "r2"], dir.path())), 2);
    assert_eq!(code(&rumorsim(&["sweep", "--param", "gamma"], dir.path())), 1);
}

#[test]
fn usage_validation_and_divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rumorsim(&[], dir.path())), 1);
    assert_eq!(code(&rumorsim(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&rumorsim(&["run", "--preset", "baseline"], dir.path())), 1);
    assert_eq!(code(&rumorsim(&["run", "--scenario", "missing.json"], dir.path())), 1);
    assert_eq!(code(&rumorsim(&["--help"], dir.path())), 0);
    assert_eq!(code(&rumorsim(&["--version"], dir.path())), 0);
    assert_eq!(code(&rumorsim(&["run", "--dt=-1"], dir.path())), 2);
    assert_eq!(code(&rumorsim(&["run", "--n", "0"], dir.path())), 2);
    assert_eq!(
        code(&rumorsim(&["sweep", "--param", "b1", "--grid", "0,1.5"], dir.path())),
        2
    );
    assert_eq!(
        code(&rumorsim(
            &["stochastic", "--mode", "literal", "--runs", "2"],
            dir.path()
        )),
        2
    );
    let o = rumorsim(
        &[
            "run",
            "--preset",
            "strong-contact",
            "--method",
            "euler",
            "--no-clamp",
            "--dt",
            "1",
            "--output-every",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn scenario_files_load_and_errors_point_at_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let good = docs_dir().join("weak-contact.json");
    let o = rumorsim(&["run", "--scenario", good.to_str().unwrap(), "--out", "w"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"params\": {\"b1\": 0.3, \"b2\": 0.5, \"o\": 0.2, \"w1\": 4, \"w2\": 4, \"w3\": \"x\",\n  \"r1\": 0.1, \"r2\": 0.1, \"n\": 100},\n  \"initial\": {\"ia\": 2, \"ib\": 1}\n}\n",
    )
    .unwrap();
    let o = rumorsim(&["run", "--scenario", "bad.json"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.w3") && err.contains("line 2"), "{err}");

    let equal = dir.path().join("equal.json");
    std::fs::write(
        &equal,
        r#"{"params": {"b1": 0.3, "b2": 0.5, "o": 0.2, "w1": 4, "w2": 4, "w3": 4,
            "r1": 0.1, "r2": 0.1, "n": 100}, "initial": {"ia": 10, "ib": 10}}"#,
    )
    .unwrap();
    let o = rumorsim(&["run", "--scenario", "equal.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("I_A > I_B"));
    let o = rumorsim(&["run", "--scenario", "equal.json", "--allow-equal-seeds"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn shipped_scenarios_match_presets() {
    for id in PresetId::ALL {
        let doc = load_scenario(&docs_dir().join(format!("{id}.json"))).unwrap();
        assert_eq!(doc, expand_preset(id, 10_000.0).unwrap(), "{id}");
    }
}

#[test]
fn presets_listing_marks_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorsim(&["presets"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for id in PresetId::ALL {
        assert!(text.contains(id.as_str()));
    }
    assert!(text.contains("implementation default"));
    assert!(text.contains("scenario definition"));
}

#[test]
fn stochastic_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorsim(
        &[
            "stochastic",
            "--preset",
            "high-quality",
            "--n",
            "1000",
            "--runs",
            "10",
            "--seed",
            "3",
            "--out",
            "e",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("e/ensemble.csv")).unwrap();
    assert!(text.starts_with("time,mean_s,mean_ia,mean_ib,mean_r,sd_s,sd_ia,sd_ib,sd_r\n"));
    let meta = std::fs::read_to_string(dir.path().join("e/ensemble.meta")).unwrap();
    assert!(meta.contains("seed=3\n") && meta.contains("runs=10\n") && meta.contains("rng=ChaCha8"));

    let o = rumorsim(&["compare", "--n", "1000", "--runs", "10", "--out", "c"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ia_within_3se="));
    assert!(dir.path().join("c/compare.meta").exists());
}

#[test]
fn rerun_in_place_reproduces_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&rumorsim(&["run", "--preset", "low-quality", "--out", "a"], dir.path())),
        0
    );
    let before = std::fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(code(&rumorsim(&["rerun", "a/trajectory.meta"], dir.path())), 0);
    assert_eq!(std::fs::read(dir.path().join("a/trajectory.csv")).unwrap(), before);
    std::fs::write(dir.path().join("bad.meta"), "format=1\ncommand=run\n").unwrap();
    assert_eq!(code(&rumorsim(&["rerun", "bad.meta"], dir.path())), 2);
}
