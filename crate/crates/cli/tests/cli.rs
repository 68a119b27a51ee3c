use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn popinfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popinfer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_sweep_config(dir: &Path, sampled: bool) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("sweep_shared_map.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    if sampled {
        v["pipeline"] = "sampled".into();
        v["n_samples"] = 5000.into();
    }
    let path = dir.join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn run_shared_map_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = popinfer(&["run", "--config", configs().join("shared_map.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    let row = &report["realizations"][0];
    assert!((row["det_inv_standard"].as_f64().unwrap() - 377.8).abs() / 377.8 < 1e-3);
    assert!((row["det_inv_pop"].as_f64().unwrap() - 444.4).abs() / 444.4 < 1e-3);
}

#[test]
fn sweep_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for sampled in [false, true] {
        let cfg = small_sweep_config(dir.path(), sampled);
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = dir.path().join(format!("out_{sampled}_{threads}"));
            let o = popinfer(&[
                "--threads",
                threads,
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--realizations",
                "50",
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            outputs.push((
                std::fs::read(out.join("sweep.csv")).unwrap(),
                std::fs::read(out.join("sweep_summary.json")).unwrap(),
            ));
        }
        assert_eq!(outputs[0], outputs[1], "sampled = {sampled}");
        let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
        assert!(csv.starts_with("realization,y,kl_standard,kl_pop,relative_gain,ood_flag\n"));
        assert_eq!(csv.lines().count(), 51);
    }
}

#[test]
fn sampled_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("sampled_shared_map.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["n_samples"] = 5000.into();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let mut files = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("o{k}"));
        let o = popinfer(&["--threads", threads, "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let names = ["report.json", "samples_updated.csv", "samples_standard.csv", "samples_population.csv"];
        files.push(names.map(|n| std::fs::read(out.join(n)).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn seed_override_changes_sampled_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("sampled_shared_map.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["n_samples"] = 2000.into();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = popinfer(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(out.join("samples_updated.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
    assert_eq!(run("1", "c"), run("1", "d"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");

    let missing = popinfer(&["run", "--config", "/nonexistent.json", "--out", out.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"pipeline": "analytic"}"#).unwrap();
    let o = popinfer(&["run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    // observed variance far above what the map can produce
    let text = std::fs::read_to_string(configs().join("shared_map.json")).unwrap();
    let violating = dir.path().join("violating.json");
    std::fs::write(&violating, text.replace("\"cov\": [[0.3]]", "\"cov\": [[3.0]]")).unwrap();
    let o = popinfer(&["run", "--config", violating.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = popinfer(&["diagnose", "--config", violating.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["satisfied"], false);
}

#[test]
fn diagnose_prints_spectrum() {
    let o = popinfer(&["diagnose", "--config", configs().join("shared_map.json").to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "predictability");
    let s = v["singular_values"][0].as_f64().unwrap();
    assert!((s - 2.5f64.sqrt()).abs() < 1e-12);
}
