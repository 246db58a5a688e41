//! The binary's contract: exit statuses, output formats, config files and
//! the documented run examples.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn gradlim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradlim"))
        .args(args)
        .env_remove("GRADLIM_THREADS")
        .output()
        .expect("spawn gradlim")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(o: &Output) -> Value {
    assert_eq!(code(o), 0, "{}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("json report")
}

fn validate(report: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).expect("schema parses");
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["checks"].as_array().unwrap())
        .rfind(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn every_experiment_runs_and_matches_the_schema() {
    let small: &[(&str, &[&str])] = &[
        ("exactness", &["--samples", "1000"]),
        ("rajchman", &["--samples", "2000"]),
        ("uniformity", &["--samples", "5000"]),
        ("gamma", &["--samples", "5000"]),
        ("bias", &["--samples", "20000"]),
        ("change_of_measure", &["--samples", "5000"]),
        ("rootzen", &["--samples", "2000", "--n-list", "64"]),
        ("error_integrals", &["--samples", "2000", "--n-list", "64"]),
        ("quadratic_form", &["--samples", "5000"]),
        ("euler_error", &["--samples", "2000", "--n-list", "32"]),
    ];
    for (name, extra) in small {
        let mut args = vec!["--experiment", name, "--seed", "3"];
        args.extend_from_slice(extra);
        let o = gradlim(&args);
        // small budgets may fail a check, but must never error
        assert!(matches!(code(&o), 0 | 1), "{name}: {}", stderr(&o));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        validate(&r);
        assert_eq!(r["config"]["experiment"], *name);
        assert_eq!(r["seed"], 3);
        assert!(r["sections"].as_array().unwrap().iter().all(|s| !s["anchor"].as_str().unwrap().is_empty()));
    }
}

#[test]
fn uniformity_example_passes_ks() {
    let o = gradlim(&["uniformity", "--law", "normal", "--n", "1024", "--samples", "100000", "--seed", "7"]);
    let r = report(&o);
    validate(&r);
    assert_eq!(check(&r, "ks_uniform[0]")["verdict"], "pass");
}

#[test]
fn gamma_example_hits_the_oracle() {
    let o = gradlim(&[
        "--experiment",
        "gamma",
        "--law",
        "normal",
        "--phi",
        "sin",
        "--scheme",
        "nearest",
        "--n-list",
        "64,256,1024",
        "--samples",
        "200000",
        "--seed",
        "7",
    ]);
    let r = report(&o);
    let g = check(&r, "gamma");
    assert_eq!(g["n"], 1024);
    let (est, se) = (g["estimate"].as_f64().unwrap(), g["stderr"].as_f64().unwrap());
    assert!((est - 0.04733).abs() < 3.0 * se + 5e-6, "{est} +- {se}");
}

#[test]
fn unknown_names_are_usage_errors() {
    assert_eq!(code(&gradlim(&["--experiment", "gamma", "--law", "cauchy"])), 2);
    assert_eq!(code(&gradlim(&["--experiment", "eq42"])), 2);
    assert_eq!(code(&gradlim(&[])), 2);
}

#[test]
fn suite_rules_are_enforced() {
    let o = gradlim(&["--experiment", "all"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"));
    assert_eq!(code(&gradlim(&["--experiment", "all", "--seed", "7", "--samples", "10"])), 2);
}

#[test]
fn invalid_values_are_config_errors() {
    assert_eq!(code(&gradlim(&["--experiment", "gamma", "--n-list", "64,16"])), 2);
    assert_eq!(code(&gradlim(&["--experiment", "gamma", "--level", "1.5"])), 2);
    assert_eq!(code(&gradlim(&["--experiment", "gamma", "--samples", "0"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_gradlim"))
        .args(["--experiment", "exactness"])
        .env("GRADLIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn io_failures_have_their_own_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("report.json");
    let o = gradlim(&["--experiment", "exactness", "--samples", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = gradlim(&["--experiment", "gamma", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn library_errors_have_their_own_status() {
    // a dyadic grid of 2^-60 is not representable
    let o = gradlim(&["--experiment", "gamma", "--scheme", "dyadic", "--n-list", "60", "--samples", "100"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn failed_checks_exit_one() {
    // an absurdly tight tolerance turns sampling noise into failures
    let o = gradlim(&["--experiment", "gamma", "--samples", "2000", "--k-sigma", "1e-9"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], "fail");
    assert!(r["summary"]["fail"].as_u64().unwrap() > 0);
}

#[test]
fn csv_is_tidy_long_format() {
    let o = gradlim(&["--experiment", "rootzen", "--samples", "2000", "--n-list", "64", "--format", "csv"]);
    assert!(matches!(code(&o), 0 | 1));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rd.headers().unwrap(), vec!["experiment", "case", "check", "n", "statistic", "value", "verdict"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert!(rows
        .iter()
        .any(|r| &r[2] == "variance" && &r[4] == "target" && r[5].parse::<f64>().unwrap() == 1.0 / 12.0));
    assert!(rows.iter().all(|r| &r[0] == "rootzen" && r[5].parse::<f64>().is_ok()));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "experiment = \"quadratic_form\"\nintegrands = \"opposite\"\nn_list = [16, 64]\nsamples = 4000\nseed = 11\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = gradlim(&["--config", cfg.to_str().unwrap(), "--seed", "12", "--out", out.to_str().unwrap()]);
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    validate(&r);
    assert_eq!(r["seed"], 12);
    assert_eq!(r["config"]["integrands"], "opposite");
    assert_eq!(r["config"]["n_list"], serde_json::json!([16, 64]));
    // the output path is not echoed, so reruns elsewhere are byte-identical
    assert!(r["config"].get("out").is_none());

    std::fs::write(&cfg, "experiment = \"gamma\"\nwidget = 3\n").unwrap();
    assert_eq!(code(&gradlim(&["--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn output_is_independent_of_thread_count_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, file: &str| {
        let out = dir.path().join(file);
        let o = Command::new(env!("CARGO_BIN_EXE_gradlim"))
            .args(["--experiment", "uniformity", "--samples", "20000", "--seed", "5", "--out", out.to_str().unwrap()])
            .env("GRADLIM_THREADS", threads)
            .output()
            .unwrap();
        assert!(matches!(code(&o), 0 | 1));
        std::fs::read(Path::new(&out)).unwrap()
    };
    assert_eq!(run("1", "a.json"), run("3", "b.json"));
}
