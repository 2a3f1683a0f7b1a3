use ionsim_cli::app::{catalog, execute, Request};
use ionsim_cli::config::{ConfigFile, Format};
use ionsim_cli::scenarios::registry;
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ionsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("IONSIM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("stderr has a line")).expect("machine-readable error")
}

/// Data rows of a CSV written by the tool, as (header, rows).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# manifest: manifest.json"));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn statics_example_separation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["statics", "--species", "Yb-171", "--f-mhz", "1", "--n", "2"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("ionsim-out/statics");
    let (header, rows) = read_csv(&dir.join("positions.csv"));
    assert_eq!(header[..2], ["ion", "position_m"]);
    let x: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let sep = (x[1] - x[0]) * 1e6;
    assert!((sep / 3.7 - 1.0).abs() < 0.1, "separation {sep} μm");
    let m = manifest(&dir);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["seed"], 0);
    assert_eq!(m["config"]["params"]["species"], "Yb-171");
    assert_eq!(m["constants"]["version"], "CODATA 2018");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    for name in m["outputs"].as_array().unwrap() {
        assert!(dir.join(name.as_str().unwrap()).exists());
    }
}

#[test]
fn schema_errors_exit_two_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["statics", "--f-mhz", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["category"], "schema");
    assert!(e["message"].as_str().unwrap().starts_with("params.n"), "{e}");
    let m = manifest(&tmp.path().join("ionsim-out/statics"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["exit_code"], 2);
    assert!(m["outputs"].as_array().unwrap().is_empty());

    let out = ionsim(&["statics", "--f-mhz", "1", "--n", "two"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().starts_with("params.n:"));

    let out = ionsim(&["statics", "--f-mhz", "1", "--n", "2", "--colour", "red"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("colour"));

    let out = ionsim(&["mz", "--phi", "1:0:0.1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().starts_with("params.phi"));

    let out = ionsim(&["statics", "--species", "Xx-1", "--f-mhz", "1", "--n", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().starts_with("params.species"));
}

#[test]
fn unknown_scenario_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["warp-drive", "--n", "3"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["category"], "schema");
    let out = ionsim(&["--out", "bad", "warp-drive"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(manifest(&tmp.path().join("bad"))["error"]["category"], "schema");
}

#[test]
fn oversized_hilbert_space_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["bhm", "--sites", "12", "--u-over-t", "5", "--out", "big"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["category"], "capacity");
    assert_eq!(manifest(&tmp.path().join("big"))["error"]["exit_code"], 4);
}

#[test]
fn catalog_lists_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["list", "--json"], tmp.path());
    assert!(out.status.success());
    let listed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = listed.as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    for id in ["statics", "jmatrix", "ising", "hopfield", "bhm", "fkim", "mz", "unruh", "dirac"] {
        assert!(ids.contains(&id), "{id} missing");
    }
    assert_eq!(listed, catalog());
    assert!(listed.as_array().unwrap().iter().all(|s| !s["params"].as_array().unwrap().is_empty()));
    let text = ionsim(&["list"], tmp.path());
    assert!(String::from_utf8_lossy(&text.stdout).contains("--f-mhz"));
}

#[test]
fn every_scenario_round_trips_through_validation() {
    for s in registry() {
        let example = s.example();
        let echo = s.validate(&example).unwrap_or_else(|e| panic!("{}: {e}", s.id));
        let documented: Vec<&str> = s.fields.iter().map(|f| f.name).collect();
        let keys: Vec<&String> = echo.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), documented.len(), "{}: {keys:?} vs {documented:?}", s.id);
        for k in keys {
            assert!(documented.contains(&k.as_str()), "{}: undocumented {k}", s.id);
        }
        // the filled-in echo is itself a valid config
        let text = format!("scenario = \"{}\"\n[params]\n{}", s.id, toml::to_string(&echo_as_toml(&echo)).unwrap());
        let file = ConfigFile::parse(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", s.id));
        let again = s.validate(&file.params).unwrap();
        assert_eq!(again, echo, "{}", s.id);
    }
}

fn echo_as_toml(echo: &Value) -> toml::Table {
    let mut t = toml::Table::new();
    for (k, v) in echo.as_object().unwrap() {
        let value = match v {
            Value::Null => continue,
            Value::Bool(b) => toml::Value::Boolean(*b),
            Value::String(s) => toml::Value::String(s.clone()),
            Value::Number(n) if n.is_i64() || n.is_u64() => toml::Value::Integer(n.as_i64().unwrap()),
            Value::Number(n) => toml::Value::Float(n.as_f64().unwrap()),
            Value::Array(a) => toml::Value::Array(a.iter().map(|x| toml::Value::Float(x.as_f64().unwrap())).collect()),
            Value::Object(_) => unreachable!("flat schemas"),
        };
        t.insert(k.clone(), value);
    }
    t
}

#[test]
fn config_file_runs_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mz.toml");
    fs::write(&cfg, "scenario = \"mz\"\nseed = 9\noutput = \"from-file\"\n[params]\norder = 2\nphi = \"0:3.2:0.4\"\n").unwrap();
    let out = ionsim(&["run", "mz.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("from-file"));
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["params"]["phi"].as_array().unwrap().len(), 9);
    assert_eq!(m["checks_failed"], 0);
    let (_, rows) = read_csv(&tmp.path().join("from-file/fringes.csv"));
    assert_eq!(rows.len(), 9);

    let out = ionsim(&["--seed", "4", "--format", "json", "--out", "flagged", "run", "mz.toml"], tmp.path());
    assert!(out.status.success());
    let dir = tmp.path().join("flagged");
    assert_eq!(manifest(&dir)["config"]["seed"], 4);
    let fringes: Value = serde_json::from_str(&fs::read_to_string(dir.join("fringes.json")).unwrap()).unwrap();
    assert_eq!(fringes["manifest"], "manifest.json");
    assert_eq!(fringes["rows"].as_array().unwrap().len(), 9);

    fs::write(&cfg, "scenario = \"mz\"\nsed = 9\n").unwrap();
    let out = ionsim(&["run", "mz.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("sed"));
    fs::write(&cfg, "seed = 9\n").unwrap();
    let out = ionsim(&["run", "mz.toml"], tmp.path());
    assert!(error_line(&out)["message"].as_str().unwrap().starts_with("scenario"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .args(["ising", "ramp"])
        .current_dir(tmp.path())
        .env("IONSIM_OUTPUT_ROOT", "runs")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("runs/ising/ramp.csv").exists());
}

#[test]
fn identical_seeds_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, threads: &str| {
        let out = ionsim(
            &["hopfield", "--n", "40", "--loads", "2:10:2", "--trials", "40", "--seed", "17", "--threads", threads, "--out", dir],
            tmp.path(),
        );
        assert!(out.status.success());
        fs::read(tmp.path().join(dir).join("capacity.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));
    let other = ionsim(&["hopfield", "--n", "40", "--loads", "2:10:2", "--trials", "40", "--seed", "18", "--out", "d"], tmp.path());
    assert!(other.status.success());
    assert_ne!(a, fs::read(tmp.path().join("d/capacity.csv")).unwrap());
}

#[test]
fn rerun_leaves_no_orphans() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let base = Request {
        scenario: "statics".into(),
        params: toml::from_str("f_mhz = 1.0\nn = 3").unwrap(),
        output: Some(dir.clone()),
        ..Default::default()
    };
    assert_eq!(execute(&base).exit_code, 0);
    assert!(dir.join("positions.csv").exists());
    let json = Request { format: Some(Format::Json), ..base.clone() };
    assert_eq!(execute(&json).exit_code, 0);
    assert!(!dir.join("positions.csv").exists());
    assert!(dir.join("positions.json").exists());
    let broken = Request { params: toml::from_str("f_mhz = -1.0\nn = 3").unwrap(), ..base };
    let report = execute(&broken);
    assert_eq!(report.exit_code, 2);
    let listed: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(listed, vec![std::ffi::OsString::from("manifest.json")]);
}

#[test]
fn fkim_scan_max_gap_rises() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ionsim(&["fkim", "scan", "--k", "log:0.01:0.2:16", "--out", "fk"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("fk/scan.csv"));
    let k = header.iter().position(|h| h == "max_gap").unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r[k].parse().unwrap()).collect();
    assert!(gaps.last().unwrap() > &(2.0 * gaps[0]));
    let m = manifest(&tmp.path().join("fk"));
    assert_eq!(m["checks_failed"], 0, "{}", m["checks"]);
}
