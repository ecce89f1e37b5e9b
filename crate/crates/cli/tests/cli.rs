use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lnn_rl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lnn-rl")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const TINY: &str = "episodes = 6\n[level]\nlength = 4\ndistractors = 1\nmax_steps = 20\n";

#[test]
fn run_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let csv = dir.path().join("r.csv");
    let trace = dir.path().join("t.jsonl");
    let out = lnn_rl(&["run", "--config", &cfg, "--method", "guide", "--out", csv.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "method,seed,episode,reward,steps,fallbacks,moving_avg");
    assert_eq!(rows.lines().count(), 7);
    let steps: usize = rows.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse::<usize>().unwrap()).sum();
    let trace = fs::read_to_string(&trace).unwrap();
    assert_eq!(trace.lines().count(), steps);
    assert!(trace.lines().all(|l| l.starts_with('{') && l.contains("\"p_lnn\"")));
}

#[test]
fn compare_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("cmp");
    let out = lnn_rl(&["compare", "--config", &cfg, "--seeds", "2", "--out", out_dir.to_str().unwrap(), "--gnuplot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for m in ["baseline", "shield", "guide"] {
        assert!(stdout.contains(m));
    }
    let rows = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 6 * 2 * 3);
    for f in ["summary.json", "summary.txt", "curves.dat", "plot.gp"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();

    let again = lnn_rl(&["summarize", "--in", out_dir.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), summary);
}

#[test]
fn compare_accepts_one_config_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("cmp");
    let out = lnn_rl(&[
        "compare", "--baseline", &cfg, "--shield", &cfg, "--guide", &cfg, "--seeds", "1", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let half = dir.path().join("other.toml");
    fs::write(&half, "episodes = 3\n").unwrap();
    let out = lnn_rl(&[
        "compare", "--baseline", &cfg, "--shield", &cfg, "--guide", half.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("episodes"));
}

#[test]
fn config_errors_name_path_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[agent]\ngama = 0.5\n");
    let out = lnn_rl(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("exp.toml") && err.contains("gama"), "{err}");
}

#[test]
fn summarize_rejects_zero_window() {
    let out = lnn_rl(&["summarize", "--in", "nowhere", "--window", "0"]);
    assert!(!out.status.success());
}
