use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aheston(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aheston")).current_dir(dir).args(args).output().expect("binary runs")
}

fn manifest(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("manifest is JSON")
}

const BAD_MODEL: &str = "[model]\nr = 0.0\na = 5.0\nb = 0.14\nsigma = 0.08\nsigma_n = 1.0\nalpha = 2.5\nrho = 1.0\ns0 = 1.0\nv0 = 0.03\n";

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), BAD_MODEL).unwrap();
    let out = aheston(dir.path(), &["--config", "bad.toml", "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["errors"].as_array().unwrap().len(), 2);

    let out = aheston(dir.path(), &["--config", "bad.toml", "simulate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());

    fs::write(dir.path().join("typo.toml"), "sed = 3\n").unwrap();
    assert_eq!(aheston(dir.path(), &["--config", "typo.toml", "measure"]).status.code(), Some(2));
    assert_eq!(aheston(dir.path(), &["measure", "--eta", "1000"]).status.code(), Some(2));
}

#[test]
fn feller_violation_is_only_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("f.toml"),
        "[model]\nr = 0.0\na = 5.0\nb = 0.001\nsigma = 0.5\nsigma_n = 1.0\nalpha = 1.26\nrho = 0.0\ns0 = 1.0\nv0 = 0.03\n",
    )
    .unwrap();
    let out = aheston(dir.path(), &["--config", "f.toml", "validate"]);
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&aheston(dir.path(), &["--config", "f.toml", "simulate", "--out", "o"]));
    assert!(m["warnings"][0].as_str().unwrap().contains("Feller"));
}

#[test]
fn output_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = aheston(dir.path(), &["measure", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_gives_identical_bytes_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str, th: &'static str| {
        vec!["--seed", "11", "--threads", th, "--out", o, "tails", "--paths", "2000", "--steps", "100"]
    };
    let a = manifest(&aheston(dir.path(), &args("a", "1")));
    let b = manifest(&aheston(dir.path(), &args("b", "4")));
    let c = manifest(&aheston(dir.path(), &args("c", "4")));
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(b["outputs"], c["outputs"]);
    for f in ["tails.csv", "summary.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let d = manifest(&aheston(dir.path(), &["--seed", "12", "--out", "d", "tails", "--paths", "2000", "--steps", "100"]));
    assert_ne!(a["outputs"], d["outputs"]);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn simulate_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(&aheston(dir.path(), &["simulate", "--maturity", "14", "--steps", "2800", "--out", "o"]));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    let (h, rows) = read_csv(&dir.path().join("o/path.csv"));
    assert_eq!(h, ["t", "V", "logS", "intV"]);
    assert_eq!(rows.len(), 2801);
    let last: f64 = rows[2800][0].parse().unwrap();
    assert!((last - 14.0).abs() < 1e-9);
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap() >= 0.0);
    }
    let (h, jumps) = read_csv(&dir.path().join("o/jumps.csv"));
    assert_eq!(h, ["t", "size"]);
    assert!(!jumps.is_empty());
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(s["n_jumps"].as_u64().unwrap() as usize, jumps.len());
}

#[test]
fn riccati_and_measure_reports_parse() {
    let dir = tempfile::tempdir().unwrap();
    manifest(&aheston(dir.path(), &["riccati", "--maturity", "0.5", "--out", "o"]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/riccati.json")).unwrap()).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 10);
    assert_eq!(entries[3]["status"], "blowup");
    assert_eq!(entries[0]["transform"][0].as_f64().unwrap(), 1.0);
    let (_, rows) = read_csv(&dir.path().join("o/riccati.csv"));
    assert_eq!(rows.len(), 10);

    manifest(&aheston(dir.path(), &["measure", "--eta", "-0.3", "--eta-bar", "0.1", "--theta", "0", "--out", "m"]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m/measure.json")).unwrap()).unwrap();
    let a = v["params_p"]["a"].as_f64().unwrap();
    assert!((a - (5.0 + 0.08 * 0.3)).abs() < 1e-12);
    assert_eq!(v["valid"], true);
}

#[test]
fn smile_clusters_and_poisson_outputs_parse() {
    let dir = tempfile::tempdir().unwrap();
    manifest(&aheston(dir.path(), &["smile", "--paths", "5000", "--steps", "100", "--out", "s"]));
    let (h, rows) = read_csv(&dir.path().join("s/smile.csv"));
    assert_eq!(h[..4], ["k", "price", "std_err", "implied_vol"]);
    assert!(rows.len() > 10);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s/summary.json")).unwrap()).unwrap();
    assert!(s["forward"].as_f64().unwrap() > 0.0);

    manifest(&aheston(
        dir.path(),
        &["clusters", "--y", "0.3,0.5", "--alphas", "1.5", "--t", "2", "--n-reps", "50", "--out", "c"],
    ));
    let (h, table) = read_csv(&dir.path().join("c/table.csv"));
    assert_eq!(h[..3], ["alpha", "y", "expected_count"]);
    assert_eq!(table.len(), 2);
    let (_, counts) = read_csv(&dir.path().join("c/counts.csv"));
    assert_eq!(counts.len(), 100);

    manifest(&aheston(dir.path(), &["poisson-limit", "--n", "20", "--out", "p"]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p/poisson.json")).unwrap()).unwrap();
    assert!(v["lambda"].as_f64().unwrap() > 0.0);
    let (h, _) = read_csv(&dir.path().join("p/pmf.csv"));
    assert_eq!(h, ["k", "observed", "empirical_pmf", "target_pmf"]);
}
