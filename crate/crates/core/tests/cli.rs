use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_barriertop"));
    c.env_remove("BARRIERTOP_THREADS");
    c
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("config_in.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn quick_config() -> Value {
    json!({
        "potential": {"family": "sech2_barrier", "params": [1.0]},
        "h_list": [0.1],
        "grid": {"half_length": 10.0, "spacing_per_h": 0.4},
        "scaling": {"kind": "uniform", "theta": 0.6},
        "discretization": "fourier",
        "strip": {"c": 3.5}
    })
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .arg(args[0])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(out: &Path) -> Vec<(String, String)> {
    manifest(out)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn bundled_resonances_config_writes_table_and_lattice() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["resonances"], &bundled("resonances.json"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("resonances_h0.05.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("alpha,re_z,im_z,residual,match_distance"));
    assert_eq!(lines.count(), 3);
    let lattice: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("lattice_h0.05.json")).unwrap()).unwrap();
    let first = &lattice.as_array().unwrap()[0];
    for key in ["alpha", "re", "im", "decay_sum", "simple"] {
        assert!(first.get(key).is_some(), "lattice entry lacks {key}");
    }
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    for (path, sum) in checksums(tmp.path()) {
        let bytes = std::fs::read(tmp.path().join(&path)).unwrap();
        assert_eq!(barriertop::cli::sha256_hex(&bytes), sum, "{path}");
    }
}

#[test]
fn forbidden_strip_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config();
    cfg["strip"]["c"] = json!(3.0);
    let out = run(&["resonances"], &write_config(tmp.path(), &cfg), &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("decay sum 3"), "{err}");
    assert!(!tmp.path().join("out/manifest.json").exists());
}

#[test]
fn identical_runs_have_identical_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &quick_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["probe-resolvent"], &cfg, &a).status.code(), Some(0));
    assert_eq!(run(&["probe-resolvent"], &cfg, &b).status.code(), Some(0));
    assert_eq!(checksums(&a), checksums(&b));
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}

#[test]
fn malformed_requests_exit_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut unknown = quick_config();
    unknown["grid"]["halflength"] = json!(4.0);
    let mut increasing = quick_config();
    increasing["h_list"] = json!([0.05, 0.1]);
    for cfg in [unknown, increasing] {
        let out = run(&["resonances"], &write_config(tmp.path(), &cfg), &tmp.path().join("out"));
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = bin().arg("resonances").output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let unknown_command = bin().arg("plot").output().unwrap();
    assert_eq!(unknown_command.status.code(), Some(2));
    let cfg = write_config(tmp.path(), &quick_config());
    let threads = bin()
        .env("BARRIERTOP_THREADS", "zero")
        .args(["resonances", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("t"))
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn overrides_and_thread_cap_reach_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &quick_config());
    let out = tmp.path().join("out");
    let status = bin()
        .env("BARRIERTOP_THREADS", "1")
        .args(["resonances", "--h", "0.2,0.1", "--oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let m = manifest(&out);
    assert_eq!(m["h_list"], json!([0.2, 0.1]));
    assert_eq!(m["threads"], 1);
    assert_eq!(m["oracle"], true);
    assert!(out.join("oracle_h0.2.csv").exists() && out.join("resonances_h0.1.csv").exists());
    let effective: Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(effective["h_list"], json!([0.2, 0.1]));
}

#[test]
fn numerical_failure_is_recorded_with_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config();
    cfg["h_list"] = json!([0.05]);
    cfg["grid"] = json!({"half_length": 7.0, "points": 300});
    cfg["scaling"] = json!({"kind": "exterior", "theta": 0.5, "r0": 3.5, "width": 3.0});
    // a contour of radius 3h around z_0 also encloses z_1
    cfg["contour"] = json!({"radius_per_h": 3.0, "n_quad": 24});
    let out = tmp.path().join("out");
    let res = run(&["project"], &write_config(tmp.path(), &cfg), &out);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert!(m["failure"].as_str().unwrap().contains("h=0.05"), "{}", m["failure"]);
}
