use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn olu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olu")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn base() -> Value {
    json!({
        "dimension": 2,
        "horizon": 80,
        "radius": 1.0,
        "class": { "mu": 1.0, "beta": 3.0 },
        "generator": { "kind": "sc-quadratic" },
        "schedule": { "kind": "pattern", "k": 2, "gap": 5, "spacing": 30 },
        "algorithm": "passive",
        "rate": { "kind": "sc-decreasing" },
        "unlearner": { "alpha": 2.0, "eps": 0.5, "gamma_mode": "per-step-product" },
        "seeds": [0, 1]
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The single experiment directory created under `out`.
fn experiment_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[test]
fn run_then_recompute() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &base());
    let (par, seq) = (tmp.path().join("par"), tmp.path().join("seq"));
    let o = olu(&["run", "--config", s(&cfg), "--out", s(&par)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    let o = olu(&["run", "--config", s(&cfg), "--out", s(&seq), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let (a, b) = (experiment_dir(&par), experiment_dir(&seq));
    assert_eq!(a.file_name(), b.file_name());
    for f in ["summary.json", "config.json", "0/trace.csv", "1/regret.json", "1/cert.json", "0/regret_curve.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let o = olu(&["regret-report", "--config", s(&cfg), "--out", s(&par)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("unchanged").count(), 2);
    let o = olu(&["regret-report", "--dir", s(&a)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn seeds_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &base());
    let out = tmp.path().join("out");
    let o = olu(&["certify", "--config", s(&cfg), "--out", s(&out), "--seeds", "3..=5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = experiment_dir(&out);
    for seed in ["3", "4", "5"] {
        assert!(dir.join(seed).join("cert.json").exists());
        assert!(!dir.join(seed).join("regret.json").exists());
    }
    assert!(dir.join("cert_summary.json").exists());
}

#[test]
fn refused_certification_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = base();
    v["rate"] = json!({ "kind": "constant", "eta": 0.9 });
    v["schedule"] = json!({ "kind": "explicit", "deletions": [{ "index": 1, "time": 6 }] });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let o = olu(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = base();
    v["unlearner"]["omega"] = json!(0.5);
    let cfg = write_config(tmp.path(), "c.json", &v);
    let o = olu(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unlearner"), "{}", stderr(&o));

    let o = olu(&["run", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = olu(&["run", "--config", s(&cfg), "--seeds", "a,b"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_runs_every_point() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = json!({
        "name": "algorithms",
        "base": base(),
        "axes": [{ "path": "/algorithm", "values": ["passive", "retrain", "discard"] }]
    });
    let cfg = write_config(tmp.path(), "sweep.json", &sweep);
    let out = tmp.path().join("out");
    let o = olu(&["sweep", "--config", s(&cfg), "--out", s(&out), "--seeds", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for alg in ["passive", "retrain", "discard"] {
        assert!(text.contains(&format!("/algorithm=\"{alg}\"")), "{text}");
    }
}
