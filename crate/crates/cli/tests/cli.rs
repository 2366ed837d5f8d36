use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use opspace::corpus::{build_column_h2, build_full_matrix, build_linf, CorpusEntry};
use opspace::criteria::CheckReport;
use serde_json::Value;
use tempfile::TempDir;

fn opspace() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_opspace"));
    c.env_remove("OPSPACE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    opspace().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_space(dir: &Path, name: &str, entry: &CorpusEntry) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, entry.space_json()).unwrap();
    p
}

fn without_timestamp(json: &str) -> Value {
    let mut v: Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("generated_at");
    v
}

#[test]
fn check_exit_codes_follow_verdicts() {
    let dir = TempDir::new().unwrap();
    let linf3 = write_space(dir.path(), "linf3.json", &build_linf(3).unwrap());
    let m2 = write_space(dir.path(), "m2.json", &build_full_matrix(2).unwrap());
    let l = linf3.to_str().unwrap();

    let o = run(&["check", l, "unitary-four-rotation", "--unit-index", "0"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("VIOLATED") && text.contains("witness"), "{text}");

    let o = run(&["check", m2.to_str().unwrap(), "unitary-four-rotation"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let o = run(&["check", l, "unknown-criterion"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown"));
}

#[test]
fn input_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["check", missing.to_str().unwrap(), "isometry"])), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&run(&["check", bad.to_str().unwrap(), "isometry"])), 3);

    let linf3 = write_space(dir.path(), "linf3.json", &build_linf(3).unwrap());
    assert_eq!(code(&run(&["check", linf3.to_str().unwrap(), "isometry", "--unit-index", "7"])), 3);
    assert_eq!(code(&run(&["check", linf3.to_str().unwrap(), "isometry", "--format", "yaml"])), 3);
    assert_eq!(code(&run(&["corpus", "--only", "no_such_entry"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn search_dumps_witness_and_trace() {
    let dir = TempDir::new().unwrap();
    let h2 = write_space(dir.path(), "h2.json", &build_column_h2().unwrap());
    let o = run(&["search", h2.to_str().unwrap(), "unitary-t-gadget", "--format", "json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["manifest"]["command"], "search");
    assert_eq!(v["report"]["verdict"], "VIOLATED");
    assert!(v["report"]["witness"]["coeffs"].is_array());
    assert!(!v["report"]["trace"].as_array().unwrap().is_empty());
}

#[test]
fn budget_flags_restrict_the_search() {
    let dir = TempDir::new().unwrap();
    let m2 = write_space(dir.path(), "m2.json", &build_full_matrix(2).unwrap());
    let m = m2.to_str().unwrap();

    let o = run(&["check", m, "isometry", "--levels", "1", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["levels_checked"], serde_json::json!([1]));

    let o = run(&["search", m, "isometry", "--restarts", "0", "--format", "json"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["verdict"], "INCONCLUSIVE");
}

#[test]
fn seed_comes_from_flag_or_environment() {
    let dir = TempDir::new().unwrap();
    let m2 = write_space(dir.path(), "m2.json", &build_full_matrix(2).unwrap());
    let args = ["check", m2.to_str().unwrap(), "coisometry", "--levels", "1", "--format", "json"];
    let o = opspace().args(args).env("OPSPACE_SEED", "4242").output().unwrap();
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["config"]["seed"], 4242);

    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "17"]);
    let o = opspace().args(&with_flag).env("OPSPACE_SEED", "4242").output().unwrap();
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["config"]["seed"], 17);
}

#[test]
fn json_reports_round_trip_and_repeat_exactly() {
    let dir = TempDir::new().unwrap();
    let linf3 = write_space(dir.path(), "linf3.json", &build_linf(3).unwrap());
    let out = dir.path().join("out/report.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = run(&[
            "check",
            linf3.to_str().unwrap(),
            "coisometry",
            "--unit-index",
            "1",
            "--format",
            "json",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 1);
        assert!(o.stdout.is_empty());
        runs.push(std::fs::read_to_string(&out).unwrap());
    }
    let (ja, jb) = (&runs[0], &runs[1]);
    assert_eq!(without_timestamp(ja), without_timestamp(jb));
    let strip = |s: &str| s.lines().filter(|l| !l.contains("\"generated_at\"")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(ja), strip(jb));

    let v: Value = serde_json::from_str(ja).unwrap();
    let report: CheckReport = serde_json::from_value(v["report"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&report).unwrap(), v["report"]);
    for key in ["criterion", "verdict", "margin", "witness", "samples", "levels_checked", "config", "tool_version"] {
        assert!(v["report"].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_formulas_passes_and_detects_injected_bug() {
    let o = run(&["verify-formulas"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("all suites pass"));
    assert_eq!(code(&run(&["verify-formulas", "--inject-sign-bug"])), 1);

    let args = ["verify-formulas", "--trials", "1000", "--seed", "7", "--format", "json"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(without_timestamp(&stdout(&a)), without_timestamp(&stdout(&b)));
}

#[test]
fn corpus_single_entry_reports_pinned_gap() {
    let dir = TempDir::new().unwrap();
    let o = run(&["corpus", "--only", "trace_class_2", "--emit-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("trace_class_2") && text.contains("pinned x = 0.25 E21: violation 8.72"), "{text}");
    assert!(dir.path().join("trace_class_2.json").exists());

    let o = run(&["corpus", "--only", "trace_class_2", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pinned = v["report"]["entries"][0]["pinned"][0]["violation"].as_f64().unwrap();
    assert!((pinned - (1.25f64.sqrt() - 1.0625f64.sqrt())).abs() < 1e-9);
}

#[test]
fn corpus_output_is_thread_count_independent() {
    let base = ["corpus", "--only", "linf_1", "--only", "lower_triangular_L12", "--format", "json"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut eight = base.to_vec();
    eight.extend(["--threads", "8"]);
    let (a, b) = (run(&one), run(&eight));
    assert_eq!(code(&a), 0);
    assert_eq!(without_timestamp(&stdout(&a)), without_timestamp(&stdout(&b)));
}
