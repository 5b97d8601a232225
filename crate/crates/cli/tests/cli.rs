use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jumpsde_cli::RunConfig;
use serde_json::Value;

fn jumpsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpsde")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    jsonschema::validator_for(&read_json(path)).expect("schema compiles")
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema errors {errors:?} in {doc}");
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_example_maps_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = jumpsde(&[
        "check", "--model", "section4", "--param", "p=3", "--param", "K0=4", "--conditions", "C9,C5,C8,LIN",
        "--seed", "7", "--out", &out_arg(&out), "--set", "grid_points=200", "--set", "grid_pairs=200",
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let cfg = RunConfig::parse(&fs::read_to_string(out.join("resolved.conf")).unwrap()).unwrap();
    assert_eq!(cfg.conditions().len(), 4);
    assert_eq!(cfg.seed(), 7);
    assert_eq!(cfg.params()["p"], 3.0);
    assert_eq!(cfg.params()["K0"], 4.0);
    let report = schema("check_report.v1.schema.json");
    for id in ["C9", "C5", "C8", "LIN"] {
        assert_valid(&report, &read_json(out.join(format!("check_{id}.json"))));
    }
    assert_valid(&schema("check_summary.v1.schema.json"), &read_json(out.join("summary.json")));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);
}

#[test]
fn check_c9_on_section4_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = jumpsde(&["check", "--model", "section4", "--conditions", "C9", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(dir.path().join("check_C9.json"));
    assert_eq!(r["satisfied"], Value::Bool(true));
}

#[test]
fn check_c8_on_section4_exits_two_with_origin_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = jumpsde(&["check", "--model", "section4", "--conditions", "C8", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let r = read_json(dir.path().join("check_C8.json"));
    assert_eq!(r["satisfied"], Value::Bool(false));
    assert_eq!(r["witness"]["x"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn simulate_writes_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = jumpsde(&[
        "simulate", "--model", "gbm_jump", "--x0", "1", "--n-steps", "100", "--seed", "3", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x_1,jump_flag"));
    let summary = read_json(dir.path().join("summary.json"));
    assert_valid(&schema("simulate_summary.v1.schema.json"), &summary);
    let jumps = summary["x"]["n_jumps"].as_u64().unwrap() as usize;
    let rows = lines.count();
    assert!(rows >= 101 && rows <= 101 + jumps, "{rows} rows, {jumps} jump times");
    assert_eq!(rows, summary["x"]["n_points"].as_u64().unwrap() as usize);
}

#[test]
fn simulate_pair_writes_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = jumpsde(&[
        "simulate", "--model", "section4", "--x0", "1,0", "--y0", "-1,0.5", "--n-steps", "50", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["path_x.csv", "path_y.csv"] {
        let csv = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(csv.starts_with("t,x_1,x_2,jump_flag\n"));
    }
    assert_valid(&schema("simulate_summary.v1.schema.json"), &read_json(dir.path().join("summary.json")));
}

#[test]
fn nonconfluence_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = jumpsde(&[
            "experiment", "nonconfluence", "--model", "section4", "--x0", "1,0", "--y0", "0,1", "--T", "1", "--n-paths",
            "1000", "--n-steps", "200", "--seed", "42", "--format", "csv,json", "--out", &out_arg(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (fs::read(out.join("summary.json")).unwrap(), fs::read(out.join("per_path.csv")).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let summary: Value = serde_json::from_slice(&a.0).unwrap();
    assert_valid(&schema("experiment_summary.v1.schema.json"), &summary);
    assert!(String::from_utf8_lossy(&a.1).starts_with("path_id,"));
}

#[test]
fn every_experiment_summary_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let validator = schema("experiment_summary.v1.schema.json");
    let cases: [&[&str]; 5] = [
        &["continuity", "--model", "gbm_jump", "--x0", "1", "--set", "ladder=1.1;1.01"],
        &["nonconfluence", "--model", "gbm_jump", "--x0", "1", "--y0", "2"],
        &["moments", "--model", "gbm_jump", "--x0", "1", "--set", "p=3"],
        &["girsanov", "--model", "bm", "--x0", "0", "--y0", "1", "--set", "eps=0.1"],
        &["irreducibility", "--model", "bm", "--x0", "0", "--y0", "1"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let mut full = vec!["experiment"];
        full.extend_from_slice(args);
        let out_s = out_arg(&out);
        full.extend_from_slice(&["--n-paths", "200", "--n-steps", "100", "--out", &out_s]);
        let o = jumpsde(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let summary = read_json(out.join("summary.json"));
        assert_valid(&validator, &summary);
        assert_eq!(summary["experiment_id"], Value::String(args[0].to_string()));
        assert!(!out.join("per_path.csv").exists());
    }
}

#[test]
fn config_file_with_misspelled_model_lists_registry() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# misspelled\nmodel = \"sectoin4\"\nconditions = C9\n").unwrap();
    let o = jumpsde(&["check", "--config", conf.to_str().unwrap(), "--out", &out_arg(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("{section4, gbm_jump, bm, ou_jump}"), "{}", stderr(&o));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "model = gbm_jump\nx0 = 1\nn_steps = 10\nseed = 1\n").unwrap();
    let out = dir.path().join("o");
    let o = jumpsde(&["simulate", "--config", conf.to_str().unwrap(), "--n-steps", "20", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = RunConfig::parse(&fs::read_to_string(out.join("resolved.conf")).unwrap()).unwrap();
    assert_eq!(cfg.uint("n_steps"), Some(20));
    assert_eq!(cfg.seed(), 1);
}

#[test]
fn usage_errors_exit_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("o"));
    let o = jumpsde(&["simulate", "--model", "bm", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("'x0'"));
    let o = jumpsde(&["simulate", "--model", "bm", "--x0", "0", "--n-steps", "many", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("'n_steps'") && stderr(&o).contains("unsigned integer"));
    let o = jumpsde(&["simulate", "--model", "bm", "--x0", "0", "--set", "colour=red", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'colour'"));
}

#[test]
fn unwritable_output_dir_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("sub");
    let o = jumpsde(&["simulate", "--model", "bm", "--x0", "0", "--n-steps", "10", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot create output directory"), "{}", stderr(&o));
}
