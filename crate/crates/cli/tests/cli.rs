use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn qgloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgloop")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("scenario.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(cfg: &Value) -> (TempDir, Output) {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), cfg);
    let out = tmp.path().join("out");
    let o = qgloop(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (tmp, o)
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(String::from).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let i = header(path).iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {}", name));
    read_csv(path).iter().map(|r| r[i].to_string()).collect()
}

#[test]
fn empty_analysis_set_writes_nothing() {
    let (tmp, o) = run(&json!({ "schema_version": 1, "preset": "pikovski-gamma", "analysis": [] }));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn config_errors_exit_one() {
    let (_t, o) = run(&json!({ "schema_version": 1, "preset": "no-such-preset", "analysis": ["precision"] }));
    assert_eq!(o.status.code(), Some(1));
    let (_t, o) = run(&json!({ "schema_version": 99, "analysis": [] }));
    assert_eq!(o.status.code(), Some(1));
    let (_t, o) = run(&json!({ "schema_version": 1, "analysis": ["precision"], "colour": "blue" }));
    assert_eq!(o.status.code(), Some(1));
    let o = qgloop(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = qgloop(&["tables", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analysis_errors_exit_two_with_record() {
    // the square loop has no deformation phase under the undeformed model
    let (tmp, o) = run(&json!({
        "schema_version": 1,
        "model": "none",
        "loop": "square",
        "analysis": ["precision"],
    }));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/error.json")).unwrap()).unwrap();
    assert_eq!(rec["status"], "error");
    assert_eq!(rec["analysis"], "precision");
    assert!(rec["kind"].as_str().is_some_and(|k| !k.is_empty()));
    assert!(rec["message"].as_str().is_some_and(|m| !m.is_empty()));
}

#[test]
fn order_out_of_range_is_an_analysis_error() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), &json!({ "schema_version": 1, "preset": "pikovski-mu", "analysis": ["phase_budget"] }));
    let out = tmp.path().join("out");
    let o = qgloop(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--bch-order", "40"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(rec["kind"], "order_out_of_range");
}

#[test]
fn required_runs_table() {
    let tmp = TempDir::new().unwrap();
    let o = qgloop(&["tables", "3", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = tmp.path().join("table3.csv");
    let rows = read_csv(&p);
    assert_eq!(rows.len(), 6);
    let models = column(&p, "model");
    let schemes = column(&p, "scheme");
    let runs: Vec<f64> = column(&p, "n_runs").iter().map(|v| v.parse().unwrap()).collect();
    let find = |m: &str, s: &str| (0..rows.len()).find(|&i| models[i] == m && schemes[i] == s).map(|i| runs[i]).unwrap();
    let near = |x: f64, want: f64| (x / want).log10().abs() < 3f64.log10();
    assert!(near(find("mu", "quantum_noise"), 1e5));
    assert!(near(find("mu", "classical_noise"), 1e5));
    assert!(near(find("gamma", "quantum_noise"), 1e14));
    assert!(near(find("gamma", "classical_noise"), 5e16));
    for h in ["loop", "bch_order", "k_order", "scheme"] {
        assert!(header(&p).iter().any(|c| c == h), "missing provenance column {}", h);
    }
}

#[test]
fn squeezing_sweep_minimum() {
    let cfg: Value = serde_json::from_str(include_str!("../configs/squeezing-sweep.json")).unwrap();
    let (tmp, o) = run(&cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = tmp.path().join("out/nr_vs_squeezing.csv");
    let r: Vec<f64> = column(&p, "r").iter().map(|v| v.parse().unwrap()).collect();
    let lg: Vec<f64> = column(&p, "log10_n_runs").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(r.len(), 201);
    let best = (0..r.len()).min_by(|&a, &b| lg[a].total_cmp(&lg[b])).unwrap();
    assert!((r[best] + 2.3).abs() < 0.15, "minimum at r = {}", r[best]);
    assert!((lg[best] - 2e4f64.log10()).abs() < 3f64.log10(), "log10 N_r = {}", lg[best]);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg: Value = serde_json::from_str(include_str!("../configs/gamma-square.json")).unwrap();
    let (a, oa) = run(&cfg);
    let (b, ob) = run(&cfg);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert_eq!(x, y, "{:?} differs between runs", n);
    }
}

#[test]
fn json_mirrors_csv() {
    let base = json!({ "schema_version": 1, "preset": "pikovski-mu", "analysis": ["precision"] });
    let (c, oc) = run(&base);
    let mut js = base.clone();
    js["output"] = json!({ "format": "json" });
    let (j, oj) = run(&js);
    assert_eq!(oc.status.code(), Some(0));
    assert_eq!(oj.status.code(), Some(0));
    let csv_path = c.path().join("out/precision.csv");
    let v: Value = serde_json::from_str(&fs::read_to_string(j.path().join("out/precision.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), read_csv(&csv_path).len());
    let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
    assert_eq!(keys.iter().map(|k| k.as_str()).collect::<Vec<_>>(), header(&csv_path));
}

#[test]
fn oracle_check_subcommand() {
    let o = qgloop(&["oracle-check", "--model", "mu", "--n-p", "9", "--dim-mech", "48"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let h = rdr.headers().unwrap().clone();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let i = h.iter().position(|c| c == "within_bound").expect("within_bound column");
    assert_eq!(&rows[0][i], "true");
}
