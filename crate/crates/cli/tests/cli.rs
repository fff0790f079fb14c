//! End-to-end runs of the `mlp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn mlp(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlp"))
        .args(args)
        .arg("--cache-dir")
        .arg(cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn single_cell_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mlp(
        &["run", "oscillatory_sweep", "--set", "r=100", "--set", "levels=2", "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("oscillatory_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[1].starts_with("1.0000000000000000e2,2,"), "{csv}");
    let cfg = std::fs::read_to_string(out.join("oscillatory_sweep.cfg")).unwrap();
    assert!(cfg.starts_with("[oscillatory_sweep]"));
    assert!(cfg.contains("r = 100"));
}

#[test]
fn csv_is_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(workers);
        let o = mlp(
            &["run", "three_scale_iters", "--set", "dt=0.4", "--set", "k2_max=2", "--workers", workers, "--out", out.to_str().unwrap()],
            dir.path(),
        );
        assert!(o.status.success());
        let csv = std::fs::read_to_string(out.join("three_scale_iters.csv")).unwrap();
        // drop the trailing wall-time column
        let stripped: Vec<String> = csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
        tables.push(stripped);
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0][0], "dt,k2,error,error_mean,embedded_error,serial_steps");
}

#[test]
fn config_file_sections_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# reduced sweep\n[decay_levels]\nlevels = 2,3\n").unwrap();
    let out = dir.path().join("out");
    let o = mlp(
        &["--config", cfg.to_str().unwrap(), "run", "decay_levels", "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn check_reports_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = mlp(&["check", "complexity_tables"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.contains("PASS")));
    assert!(text.contains("rswe_f1_two_level k=2 [exact]: got 7280, expected 7280"));
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mlp(&["run", "decay_levels", "--set", "nonsense=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense"));
    let o = mlp(&["run", "no_such_experiment"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plan_and_complexity_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = mlp(&["plan", "decay_levels", "--set", "levels=3"], dir.path());
    assert_eq!(
        stdout(&o).trim(),
        "levels=3: guess@2, guess@1 (parallel), fine@0 (parallel), correct@1, correct@2"
    );
    let o = mlp(&["complexity", "--levels", "3", "--coarsen", "10", "--fine-steps", "1000"], dir.path());
    assert!(stdout(&o).starts_with("serial steps: 50\n"));
}
