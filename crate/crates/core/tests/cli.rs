use std::path::Path;
use std::process::{Command, Output};

use spdelab::runner::preset;

fn spdelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdelab"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_example1(out: &Path) -> String {
    let mut cfg = preset("example1").unwrap();
    cfg.paths = 200;
    cfg.steps = 32;
    cfg.truncation = 60;
    cfg.checks.residual_levels = vec![8, 16, 32];
    cfg.checks.bootstrap_replicates = 100;
    cfg.output = Some(out.to_path_buf());
    cfg.to_toml()
}

#[test]
fn delta_base_below_quarter_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        small_example1(&dir.path().join("out")).replace("regularity = 0.3", "regularity = 0.2");
    let o = spdelab(&["run", &write_config(dir.path(), &text)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regularity"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_example1(&dir.path().join("out"));
    let line = text.lines().position(|l| l.starts_with("steps")).unwrap() + 1;
    let text = text.replace("steps =", "stepz =");
    let o = spdelab(&["run", &write_config(dir.path(), &text)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("stepz") && err.contains(&format!("line {line}")),
        "{err}"
    );
}

#[test]
fn missing_file_and_unknown_preset_exit_2() {
    assert_eq!(
        spdelab(&["run", "/nonexistent/scenario.toml"])
            .status
            .code(),
        Some(2)
    );
    let o = spdelab(&["preset", "example9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("example9"));
    assert_eq!(spdelab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn oversized_run_is_rejected_before_simulating() {
    assert_eq!(
        spdelab(&["preset", "example1", "--steps", "1000000"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        spdelab(&["preset", "example1", "--paths", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn small_run_writes_artifacts_and_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = spdelab(&["run", &write_config(dir.path(), &small_example1(&out))]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("martingale_mean") && stdout.contains("overall:"));
    let h = std::fs::read_to_string(out.join("h_table.csv")).unwrap();
    assert_eq!(h.lines().filter(|l| !l.starts_with('#')).count(), 34);
    let law = std::fs::read_to_string(out.join("lawtest.csv")).unwrap();
    assert!(law.contains("functional,statistic,critical,pass"));
    let res = std::fs::read_to_string(out.join("residuals_base.csv")).unwrap();
    assert!(res.contains("dt,mean_abs_residual,stderr,n_paths"));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    let failed = summary.lines().any(|l| l.starts_with("FAIL"));
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }));
}

#[test]
fn overrides_change_the_recorded_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_example1(&out));
    spdelab(&["run", &cfg, "--seed", "9", "--paths", "100"]);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed 9"));
    assert!(manifest.contains("law=100"));
}

#[test]
fn norms_table() {
    let o = spdelab(&[
        "norms",
        "--p",
        "0.3",
        "--xmax",
        "2",
        "--grid",
        "5",
        "--truncation",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = stdout.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,norm");
    assert_eq!(rows.len(), 6);
    assert!(rows[3].starts_with("0.0,"));
    assert_eq!(spdelab(&["norms", "--p", "0.2"]).status.code(), Some(2));
    assert_eq!(
        spdelab(&["norms", "--p", "0.3", "--grid", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn selftest_passes() {
    let o = spdelab(&["selftest"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_example1(&dir.path().join("unused")));
    let mut tables = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_spdelab"))
            .args(["run", &cfg, "--seed", "42", "--out"])
            .arg(&out)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(matches!(o.status.code(), Some(0 | 1)));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        tables.push(files);
    }
    assert!(tables[0].len() >= 10);
    assert_eq!(tables[0], tables[1]);
}
