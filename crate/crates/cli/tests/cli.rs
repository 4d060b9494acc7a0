use std::path::Path;
use std::process::{Command, Output};

fn rdvswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdvswarm"))
        .args(args)
        .env_remove("RDV_SWARM_SEED")
        .output()
        .expect("spawn rdvswarm")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timing(mut v: serde_json::Value) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("elapsed_seconds");
                m.remove("outputs");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}

#[test]
fn help_lists_defaults() {
    let out = rdvswarm(&["train", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "[default: 0.4]",
        "[default: 0.9]",
        "[default: 12]",
        "[default: 30]",
        "RDV_SWARM_SEED",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(rdvswarm(&["bench", "--iw", "sideways"]).status.code(), Some(2));
    assert_eq!(rdvswarm(&["bench", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(
        rdvswarm(&["sweep", "--alpha-grid", "0.5:0.1:0.1"]).status.code(),
        Some(2)
    );
    assert_eq!(rdvswarm(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = rdvswarm(&["train", "--data", p(&missing), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let gap = dir.path().join("gap.csv");
    std::fs::write(&gap, "month,value\n2020-01,1\n2020-03,2\n").unwrap();
    assert_eq!(rdvswarm(&["train", "--data", p(&gap)]).status.code(), Some(3));
}

#[test]
fn self_comparison_exits_4_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdvswarm(&[
        "compare",
        "--iw",
        "constant",
        "--baseline-iw",
        "constant",
        "--dim",
        "3",
        "--runs",
        "4",
        "--iters",
        "20",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("compare.json").exists());
}

#[test]
fn bench_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdvswarm(&[
        "bench",
        "--function",
        "rosenbrock",
        "--dim",
        "3",
        "--iters",
        "50",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["command"], "bench");
    assert_eq!(report["seed"], 42);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,best_fitness,mean_abs_velocity,inertia_weight")
    );
    assert_eq!(lines.count(), 50);
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rdvswarm"))
        .args(["bench", "--iters", "5", "--out", p(dir.path())])
        .env("RDV_SWARM_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read_json(&dir.path().join("report.json"))["seed"], 77);
}

#[test]
fn train_replay_and_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    assert!(rdvswarm(&["synth", "--len", "80", "--out", p(&series)])
        .status
        .success());

    let first = dir.path().join("first");
    let out = rdvswarm(&[
        "train",
        "--data",
        p(&series),
        "--lags",
        "6",
        "--hidden",
        "4",
        "--iters",
        "40",
        "--nmse",
        "--out",
        p(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "trace.csv", "report.json"] {
        assert!(first.join(f).exists(), "{f} missing");
    }
    let report = read_json(&first.join("report.json"));
    assert!(report["metrics"]["test"]["nmse"].is_number());
    assert!(report["metrics"]["test"]["r2"].is_number());

    let second = dir.path().join("second");
    let out = rdvswarm(&["train", "--replay", p(&first.join("report.json")), "--out", p(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        without_timing(read_json(&first.join("report.json"))),
        without_timing(read_json(&second.join("report.json")))
    );
    assert_eq!(
        std::fs::read(first.join("model.json")).unwrap(),
        std::fs::read(second.join("model.json")).unwrap()
    );

    let out = rdvswarm(&[
        "forecast",
        "--model",
        p(&first.join("model.json")),
        "--data",
        p(&series),
        "--horizon",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "month,value");
    assert_eq!(lines.len(), 4);
    // 80 months from 2009-03 end at 2015-10
    assert!(lines[1].starts_with("2015-11,"));
}

#[test]
fn sweep_table_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdvswarm(&[
        "sweep",
        "--dim",
        "2",
        "--iters",
        "10",
        "--swarm",
        "5",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,alpha_dump,mean_pe,best_pe,runs"));
    assert_eq!(lines.count(), 100);
}
