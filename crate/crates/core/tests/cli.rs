use std::path::Path;
use std::process::{Command, Output};

use prismint::harness::{BENCH_CSV_COLUMNS, BENCH_REPORT_SCHEMA, PLAN_REPORT_SCHEMA, VERIFY_REPORT_SCHEMA};
use serde_json::Value;

fn prismint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prismint"))
        .args(args)
        .output()
        .expect("spawn prismint")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_valid(schema: &str, path: &Path) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
}

/// `error[kind] code=N: message`
fn error_code(o: &Output) -> i32 {
    let s = stderr(o);
    let rest = s.split("code=").nth(1).unwrap_or_else(|| panic!("no code in {s:?}"));
    rest.split(':').next().unwrap().parse().unwrap()
}

#[test]
fn plan_check_tables_passes_for_both_profiles() {
    for profile in ["gtx580", "hd5870"] {
        let o = prismint(&["plan", "--profile", profile, "--p", "3", "--check-tables"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = String::from_utf8(o.stdout).unwrap();
        assert!(out.contains("parts of A^e"));
        assert!(!out.contains("FAIL"));
    }
}

#[test]
fn plan_json_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let o = prismint(&["plan", "--p", "4", "--variant", "shm-jac,reg-nojac", "--elements", "1000", "--json", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let items = doc.as_array().unwrap();
    assert_eq!(items.len(), 2);
    let schema: Value = serde_json::from_str(PLAN_REPORT_SCHEMA).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    for item in items {
        assert!(v.is_valid(item), "{item}");
    }
}

#[test]
fn verify_small_mesh_writes_valid_report_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let dump = dir.path().join("buffers");
    let o = prismint(&[
        "verify", "--p", "2,3", "--mesh", "2,1,1", "--workers", "2",
        "--json", json.to_str().unwrap(), "--dump-buffers", dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert_valid(VERIFY_REPORT_SCHEMA, &json);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["ok"], Value::Bool(true));
    assert_eq!(doc["failed"], 0);
    for f in ["exec_params.bin", "shape_table.bin", "quadrature.bin", "material.bin", "layout.json"] {
        assert!(dump.join(f).exists(), "missing {f}");
    }
    let layout: Value = serde_json::from_str(&std::fs::read_to_string(dump.join("layout.json")).unwrap()).unwrap();
    assert!(layout.is_object());
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let json = dir.path().join("bench.json");
    let o = prismint(&[
        "bench", "--p", "1-3", "--mesh", "1,1,2", "--reps", "2", "--warmup", "0",
        "--csv", csv_path.to_str().unwrap(), "--json", json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_valid(BENCH_REPORT_SCHEMA, &json);

    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, BENCH_CSV_COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 4);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for variant in ["REG_JAC", "REG_NOJAC", "SHM_JAC", "SHM_NOJAC"] {
        let flops: Vec<u64> = rows
            .iter()
            .filter(|r| &r[col("variant")] == variant)
            .map(|r| r[col("flops_per_element")].parse().unwrap())
            .collect();
        assert_eq!(flops.len(), 3);
        assert!(flops.windows(2).all(|w| w[0] < w[1]), "{variant}: {flops:?}");
    }
    assert!(csv_path.with_extension("long.csv").exists());
}

#[test]
fn failures_exit_with_stable_codes() {
    let cases: [(&[&str], i32); 6] = [
        (&["plan", "--p", "9"], 10),
        (&["plan", "--profile", "no-such-device"], 40),
        (&["plan", "--variant", "tex-jac"], 40),
        (&["plan", "--p", "7", "--wg", "100"], 40),
        (&["verify", "--p", "2", "--mesh", "1,1,1", "--poisson", "0.5"], 30),
        (&["verify", "--p", "2", "--mesh", "2,2,1", "--invert-element", "3"], 20),
    ];
    for (args, code) in cases {
        let o = prismint(args);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
        assert_eq!(error_code(&o), code);
    }
    let o = prismint(&["verify", "--p", "2", "--mesh", "2,2,1", "--invert-element", "3"]);
    assert!(stderr(&o).contains("element 3"), "{}", stderr(&o));
}
