use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use subdivlab::report::{SummaryReport, CLAIM_CSV_HEADER, SCHEMA_ID};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_subdivlab"));
    c.env_remove("SUBDIVLAB_THREADS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

/// Ran to completion: every claim evaluated, whether or not all passed.
fn completed(o: &Output) -> bool {
    matches!(o.status.code(), Some(0) | Some(1))
}

const SMALL_QUAD: &[&str] = &["quad", "--replicas", "2000", "--samples", "200"];
const SMALL_BISECTOR: &[&str] = &["bisector", "--replicas", "200000", "--steps", "20", "--samples", "500", "--bins", "20", "--resolution", "10"];
const SMALL_SUBTRIANGLE: &[&str] = &["subtriangle", "--replicas", "500", "--steps", "100", "--samples", "20000"];

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(bin().arg("--version").output().unwrap().status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["quad", "--steps", "many"],
        vec!["quad", "--format", "xml"],
        vec!["quad", "--replicas", "0"],
        vec!["subtriangle", "--steps", "20"],
        vec!["verify", "--x-grid", "0.2,0.7"],
    ] {
        let o = run(&args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn failed_claim_exits_one() {
    // after one step every limit point is the midpoint, so the KS claim fails
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["quad", "--steps", "1", "--replicas", "50", "--samples", "10"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL]"), "{stdout}");
    let r: SummaryReport = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!(!r.all_pass);
}

#[test]
fn small_runs_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    for (args, files) in [
        (SMALL_QUAD, &["trajectory.csv", "limit_samples.csv", "summary.json"][..]),
        (
            SMALL_BISECTOR,
            &["samples.csv", "ternary_histogram.csv", "angle_histogram.csv", "moments.json", "summary.json"][..],
        ),
        (SMALL_SUBTRIANGLE, &["trajectory.csv", "tail.csv", "x_limit_samples.csv", "lyapunov.json", "summary.json"][..]),
    ] {
        let out = tmp.path().join(args[0]);
        let o = run(args, &out);
        assert!(completed(&o), "{}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(out.join(f).is_file(), "{} missing {f}", args[0]);
        }
    }
    let header = fs::read_to_string(tmp.path().join("quad/trajectory.csv")).unwrap();
    assert!(header.starts_with("step,ux,uy,vx,vy,defect\n"));
    let header = fs::read_to_string(tmp.path().join("bisector/ternary_histogram.csv")).unwrap();
    assert!(header.starts_with("i,j,count\n"));
    let header = fs::read_to_string(tmp.path().join("subtriangle/trajectory.csv")).unwrap();
    assert!(header.starts_with("replica,step,x,y,log_y,r,R,S\n"));
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "summary.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn output_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [SMALL_QUAD, SMALL_BISECTOR, SMALL_SUBTRIANGLE] {
        let a = tmp.path().join(format!("{}-1", args[0]));
        let b = tmp.path().join(format!("{}-4", args[0]));
        assert!(completed(&bin().args(args).args(["--threads", "1", "--out"]).arg(&a).output().unwrap()));
        assert!(completed(&bin().args(args).arg("--out").arg(&b).env("SUBDIVLAB_THREADS", "4").output().unwrap()));
        assert_eq!(data_files(&a), data_files(&b), "{} differs across thread counts", args[0]);
    }
}

#[test]
fn seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(SMALL_QUAD, &a).status.success());
    assert!(bin().args(SMALL_QUAD).args(["--seed", "7", "--out"]).arg(&b).status().unwrap().success());
    assert_ne!(
        fs::read(a.join("limit_samples.csv")).unwrap(),
        fs::read(b.join("limit_samples.csv")).unwrap()
    );
}

#[test]
fn json_and_csv_summaries_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let j = tmp.path().join("json");
    let c = tmp.path().join("csv");
    assert!(run(SMALL_QUAD, &j).status.success());
    assert!(bin().args(SMALL_QUAD).args(["--format", "csv", "--out"]).arg(&c).status().unwrap().success());
    let report: SummaryReport = serde_json::from_str(&fs::read_to_string(j.join("summary.json")).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(c.join("summary.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","), CLAIM_CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), report.claims.len());
    for (row, claim) in rows.iter().zip(&report.claims) {
        assert_eq!(&row[0], claim.name);
        assert_eq!(row[2].parse::<f64>().unwrap(), claim.expected);
        assert_eq!(row[3].parse::<f64>().unwrap(), claim.observed);
        assert_eq!(row[4].parse::<f64>().unwrap(), claim.tolerance);
        assert_eq!(row[5].parse::<bool>().unwrap(), claim.pass);
    }
}

/// Minimal structural validator for the subset of JSON Schema the published
/// schema uses.
fn validate(value: &Value, schema: &Value, path: &str) -> Vec<String> {
    let mut errs = Vec::new();
    if let Some(c) = schema.get("const") {
        if value != c {
            errs.push(format!("{path}: expected {c}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errs.push(format!("{path}: {value} not in enum"));
        }
    }
    if let Some(t) = schema.get("type").and_then(Value::as_str) {
        let ok = match t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "boolean" => value.is_boolean(),
            _ => true,
        };
        if !ok {
            errs.push(format!("{path}: not {t}"));
            return errs;
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if value.as_f64().is_some_and(|v| v < min) {
            errs.push(format!("{path}: below {min}"));
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                errs.push(format!("{path}: missing {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, v) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => errs.extend(validate(v, s, &format!("{path}.{k}"))),
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errs.push(format!("{path}: unexpected {k}"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            errs.extend(validate(v, items, &format!("{path}[{i}]")));
        }
    }
    errs
}

#[test]
fn summary_matches_published_schema() {
    let schema: Value =
        serde_json::from_str(include_str!("../schemas/summary_report.schema.json")).unwrap();
    assert_eq!(schema["$id"], SCHEMA_ID);
    let tmp = tempfile::tempdir().unwrap();
    for args in [SMALL_QUAD, SMALL_BISECTOR] {
        let out = tmp.path().join(args[0]);
        assert!(completed(&run(args, &out)));
        let v: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        let errs = validate(&v, &schema, "$");
        assert!(errs.is_empty(), "{errs:?}");
    }
    // the validator itself rejects a broken document
    let bad = serde_json::json!({"schema": "other", "claims": [{"name": 1}]});
    assert!(validate(&bad, &schema, "$").len() >= 3);
}

#[test]
fn moments_file_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(completed(&run(SMALL_BISECTOR, tmp.path())));
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("moments.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["replicas"], 200000);
    assert_eq!(v["config"]["steps"], 20);
    assert_eq!(v["n_samples"], 200000);
    assert!(v["mean_a"].as_f64().is_some());
}
