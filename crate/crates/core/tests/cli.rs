use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elastic_core::trace::read_trace;
use elastic_core::RunSummary;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elastic-sim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_trace_and_summary_and_exits_zero_on_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let summary = dir.path().join("summary.txt");
    let out = bin()
        .arg("run")
        .arg(scenario("test1"))
        .arg("--trace")
        .arg(&trace)
        .arg("--summary")
        .arg(&summary)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&summary).unwrap();
    assert_eq!(stdout(&out), text);
    let parsed = RunSummary::from_key_values(&text).unwrap();
    assert!(parsed.converged);
    assert_eq!(parsed.total_steps, 150);

    let records = read_trace(std::io::BufReader::new(std::fs::File::open(&trace).unwrap())).unwrap();
    assert_eq!(records.first().unwrap().cores, 15);
    assert_eq!(records.last().unwrap().step, 149);
}

#[test]
fn seed_flag_changes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, tag: &str| {
        let trace = dir.path().join(format!("{tag}.csv"));
        bin()
            .arg("run")
            .arg(scenario("test4"))
            .args(["--seed", seed])
            .arg("--trace")
            .arg(&trace)
            .arg("--summary")
            .arg(dir.path().join(format!("{tag}.txt")))
            .output()
            .unwrap();
        std::fs::read(trace).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "c"), run("6", "d"));
}

#[test]
fn unconverged_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(scenario("test6"))
        .arg("--trace")
        .arg(dir.path().join("t.csv"))
        .arg("--summary")
        .arg(dir.path().join("s.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("converged = false"));
}

#[test]
fn invalid_config_exits_two_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        "[controller]\nce_min = 0.9\nce_max = 0.92\naveraging_period_steps = 10\nrate_of_change = 0.5\n\
         initial_cores = 15\nstarting_step = 5\ntotal_steps = 10\n",
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--trace")
        .arg(dir.path().join("t.csv"))
        .arg("--summary")
        .arg(dir.path().join("s.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("controller.rate_of_change"));
}

#[test]
fn missing_output_path_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("no_output.toml");
    std::fs::write(
        &config,
        "[controller]\nce_min = 0.9\nce_max = 0.92\naveraging_period_steps = 10\nrate_of_change = 2.0\n\
         initial_cores = 15\nstarting_step = 5\ntotal_steps = 10\n",
    )
    .unwrap();
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_prints_raw_and_clamped() {
    let out = bin()
        .args(["estimate", "--cores", "15", "--ce", "0.98", "--ce-min", "0.9", "--ce-max", "0.92"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("raw_estimate = 72.6923077\n"), "{text}");
    assert!(text.contains("cores = 30\n"));
}

#[test]
fn estimate_warns_when_ce_is_one() {
    let out = bin()
        .args(["estimate", "--cores", "15", "--ce", "1.0", "--ce-min", "0.9", "--ce-max", "0.92"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(stdout(&out).contains("ce_clamped = true"));
}

#[test]
fn sweep_emits_csv_with_prediction_columns() {
    let out = bin()
        .arg("sweep")
        .arg(scenario("test1"))
        .args(["--cores", "15,60,240", "--noiseless"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,ce,lb,pe,pred_from_15,pred_from_60,pred_from_240"));
    let ces: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ces.len(), 3);
    assert!(ces.windows(2).all(|w| w[1] < w[0]));
}
