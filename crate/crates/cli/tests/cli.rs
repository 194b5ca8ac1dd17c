use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdp-abr"))
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn variant(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(repo().join("scenarios/fair.cfg")).unwrap();
    assert!(text.contains(from));
    let p = dir.join("variant.cfg");
    fs::write(&p, text.replace(from, to)).unwrap();
    p
}

#[test]
fn validate_bundled_scenarios() {
    for name in ["fair.cfg", "diff.cfg"] {
        let cfg = repo().join("scenarios").join(name);
        let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        let out = stdout(&o);
        assert!(out.contains("delta_min_kbps = 0.110000"), "{out}");
        assert!(out.contains("eta_play"));
        assert!(out.contains("stationary_distribution"));
    }
}

#[test]
fn validate_reports_bad_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "gamma = 0.2", "gamma = 0.3");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("alpha+beta+gamma"), "{}", stdout(&o));
}

#[test]
fn validate_names_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "[0.2, 0.6, 0.2, 0.0]", "[0.2, 0.6, 0.3, 0.0]");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("row 1"), "{}", stdout(&o));
}

#[test]
fn infeasible_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "r_th_kbps = 850.0", "r_th_kbps = 180.0");
    let out = dir.path().join("t.policy");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no feasible action"), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(
        code(&run(&["validate", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.policy");
    let missing = run(&[
        "solve",
        "--config",
        "/nonexistent.cfg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&missing), 1);
    let junk = dir.path().join("junk.cfg");
    fs::write(&junk, "this is = not [valid").unwrap();
    assert_eq!(
        code(&run(&["validate", "--config", junk.to_str().unwrap()])),
        1
    );
    assert_eq!(code(&run(&["solve"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn solve_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo().join("scenarios/fair.cfg");
    let a = dir.path().join("a.policy");
    let b = dir.path().join("b.policy");
    for p in [&a, &b] {
        let o = run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.contains("\nM 5\nK 4\nN 2\nT 200\n"));
    // 400 states x 200 epochs of records after the 8 header lines.
    assert_eq!(text.lines().count(), 8 + 400 * 200);
}

#[test]
fn run_writes_summaries_and_uses_stored_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo().join("scenarios/diff.cfg");
    let table = dir.path().join("diff.policy");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let spec = dir.path().join("exp.toml");
    fs::write(
        &spec,
        format!(
            "scenario = {:?}\narms = [\"proposed\", \"client_centric\"]\npolicy_table = \"diff.policy\"\n",
            cfg.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 15);
    assert!(summary.starts_with(
        "arm,sweep_axis,sweep_value,run,profit,overloaded_epochs,u1_avg_bitrate_kbps"
    ));
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 30);
    assert!(fs::read_to_string(out.join("aggregate.csv"))
        .unwrap()
        .starts_with("arm,sweep_axis,sweep_value,metric"));

    // A table solved for another model is rejected.
    let other = dir.path().join("other.policy");
    let fair = repo().join("scenarios/fair.cfg");
    run(&[
        "solve",
        "--config",
        fair.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
    ]);
    fs::rename(&other, &table).unwrap();
    let o = run(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("does not match"), "{}", stderr(&o));

    fs::remove_file(&table).unwrap();
    let o = run(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing file"), "{}", stderr(&o));
}

#[test]
fn sweep_spec_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = repo().join("experiments/rth_sweep.toml");
    let o = run(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--stationary",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 7 * 15);
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("proposed,r_th,500,0,"));
}
