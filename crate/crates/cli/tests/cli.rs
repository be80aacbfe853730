use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-tq"))
}

const HEADER: &str = "scenario_id,estimator,axis_name,axis_value,trial_count,nmse_linear_mean,nmse_db,bits_total,bits_per_adc,wall_time_ms";

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sweep.json");
    fs::write(&path, body).unwrap();
    path
}

fn run_csv(config: &Path, out: &Path, threads: &str) -> String {
    let status = bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RIS_TQ_THREADS", threads)
        .status()
        .unwrap();
    assert!(status.success());
    fs::read_to_string(out).unwrap()
}

#[test]
fn run_writes_expected_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"scenario_id":"cli","mode":"both","sweep_axis":"total_bits","axis_values":[64,128],
            "estimators":["task_based","digital_only","individual_two_stage"],"n_trials":3,"base_seed":11}"#,
    );
    let text = run_csv(&config, &dir.path().join("a.csv"), "1");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // task_based, digital_only, individual F and G, two axis values each
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(r.len(), 10);
        assert_eq!(r[0], "cli");
        assert_eq!(r[2], "total_bits");
        assert_eq!(r[4], "3");
        let lin: f64 = r[5].parse().unwrap();
        let db: f64 = r[6].parse().unwrap();
        assert!(lin >= 0.0);
        assert!((10.0 * lin.log10() - db).abs() < 1e-6);
    }
    let estimators: Vec<&str> = rows.iter().map(|r| r[1]).collect();
    assert!(estimators.contains(&"individual_two_stage:F"));
    assert!(estimators.contains(&"task_based"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"scenario_id":"det","mode":"cascaded","sweep_axis":"T","axis_values":[2,4],
            "estimators":["task_based","no_quant","ls"],"n_trials":4,"base_seed":5}"#,
    );
    let strip = |s: String| -> Vec<String> {
        s.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let a = strip(run_csv(&config, &dir.path().join("a.csv"), "1"));
    let b = strip(run_csv(&config, &dir.path().join("b.csv"), "3"));
    assert_eq!(a, b);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"scenario_id":"x","mode":"cascaded","sweep_axis":"total_bits","axis_values":[64],
            "estimators":["task_based"],"n_trials":1,"trials":5}"#,
    );
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn bad_thread_env_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"scenario_id":"x","mode":"cascaded","sweep_axis":"total_bits","axis_values":[64],
            "estimators":["task_based"],"n_trials":1}"#,
    );
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .env("RIS_TQ_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn list_scenarios_names_presets() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("desk:"));
    assert!(text.contains("full_scale:"));
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ris_tq::harness::SweepSpec::load(&path).unwrap();
            n += 1;
        }
    }
    assert!(n >= 5);
}
