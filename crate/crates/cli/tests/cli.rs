use std::path::Path;
use std::process::{Command, Output};

fn qel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qel"))
        .args(args)
        .current_dir(dir)
        .env_remove("QEL_OUTPUT_DIR")
        .output()
        .expect("qel runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qel(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(qel(dir.path(), &["self-entry", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(
        qel(dir.path(), &["self-entry", "--lambda0", "abc"]).status.code(),
        Some(2)
    );
    let ambiguous = qel(dir.path(), &["compare-ode", "--kappa", "0.5"]);
    assert_eq!(ambiguous.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&ambiguous.stderr).contains("comparison.kappa"));
    assert_eq!(qel(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn self_entry_passes_and_fails_on_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["self-entry", "--n-r", "129", "--n-z", "129"];
    let ok = qel(dir.path(), &args);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("self-entry: passed"));

    let mut bad = args.to_vec();
    bad.extend(["--lambda0", "0.06"]);
    let bad = qel(dir.path(), &bad);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAILED"));
}

#[test]
fn zero_length_evolution_writes_one_record_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out_arg = out_dir.to_str().unwrap();
    let grid = ["--n-r", "65", "--n-z", "65"];

    let mut args = vec!["evolve", "--t-final", "0", "--output-dir", out_arg];
    args.extend(grid);
    let o = qel(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(out_dir.join("final.qel").is_file());
    let manifest = std::fs::read_to_string(out_dir.join("run-manifest.toml")).unwrap();
    assert!(manifest.contains("t_final = 0.0"));
    assert!(manifest.contains("n_r = 65"));

    let o = qel(dir.path(), &["report", "--output-dir", out_arg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["q.svg", "c.svg", "e_components.svg", "inv_q.svg"] {
        let len = std::fs::metadata(out_dir.join(f)).unwrap().len();
        assert!(len > 1000, "{f} has {len} bytes");
    }
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[output]\ndir = \"from-file\"\n[grid]\nn_r = 33\nn_z = 33\n").unwrap();
    let cfg_arg = cfg.to_str().unwrap();

    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qel"));
        cmd.current_dir(dir.path()).env_remove("QEL_OUTPUT_DIR");
        if let Some(e) = env {
            cmd.env("QEL_OUTPUT_DIR", e);
        }
        let o = cmd
            .args(["make-data", "--config", cfg_arg, "--half-width", "6"])
            .args(extra)
            .output()
            .unwrap();
        assert!(
            o.status.code().is_some_and(|c| c <= 1),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    run(None, &[]);
    assert!(dir.path().join("from-file/initial.qel").is_file());
    run(Some("from-env"), &[]);
    assert!(dir.path().join("from-env/initial.qel").is_file());
    run(Some("from-env-2"), &["--output-dir", "from-flag"]);
    assert!(dir.path().join("from-flag/initial.qel").is_file());
    assert!(!dir.path().join("from-env-2").exists());
}

#[test]
fn riccati_comparison_reports_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let o = qel(dir.path(), &["compare-ode"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("blow-up time 1.0000000000"), "{}", stdout(&o));
    let o = qel(
        dir.path(),
        &["compare-ode", "--mode", "coupled", "--comparison.kappa", "0.25"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("bound ok"));
}
