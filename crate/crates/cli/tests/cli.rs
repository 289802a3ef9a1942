use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fnmix() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fnmix"));
    cmd.env_remove("FNMIX_NMAX");
    cmd
}

fn run(args: &[&str]) -> Output {
    fnmix().args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn cycle_file(dir: &Path) -> PathBuf {
    let path = dir.join("cycle.json");
    let out = run(&[
        "zoo",
        "--out",
        path.to_str().unwrap(),
        "cycle",
        "--d",
        "4",
        "--js",
        "1,4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn spectrum_reports_gaps_of_the_lazy_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let v = json_of(&run(&[
        "spectrum",
        "--chain",
        chain.to_str().unwrap(),
        "--f-name",
        "f_1",
    ]));
    let r = &v["result"];
    let gamma_0 = 1.0 - (1.0 + (std::f64::consts::PI / 4.0).cos()) / 2.0;
    assert!((r["gamma_0"].as_f64().unwrap() - gamma_0).abs() < 1e-12);
    assert!((r["pi_min"].as_f64().unwrap() - 0.125).abs() < 1e-15);
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 8);
    let j_f: Vec<u64> = r["function"]["J_f"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert!(j_f.iter().all(|&j| j >= 2));
    assert_eq!(v["config"]["command"]["spectrum"]["chain"]["f_name"], "f_1");
}

#[test]
fn zoo_chain_file_is_accepted_by_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let c = chain.to_str().unwrap();
    let samples = dir.path().join("samples.txt");
    std::fs::write(&samples, "0\n1\n".repeat(2000)).unwrap();
    let s = samples.to_str().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["spectrum", "--chain", c],
        vec!["discrepancy", "--chain", c, "--f-name", "f_1", "--steps", "20"],
        vec!["mixing-time", "--chain", c, "--f-name", "f_1", "--delta", "0.1,0.01"],
        vec![
            "hoeffding",
            "--chain",
            c,
            "--f-name",
            "f_1",
            "--N",
            "10000",
            "--method",
            "master,uniform-burnin",
        ],
        vec![
            "interval",
            "--chain",
            c,
            "--f-name",
            "f_1",
            "--samples",
            s,
            "--method",
            "uniform",
        ],
        vec!["seqtest", "--chain", c, "--f-name", "f_1", "--r", "0.3", "--reps", "5"],
        vec![
            "simulate", "--chain", c, "--f-name", "f_1", "--N", "500", "--reps", "10",
        ],
    ];
    for args in invocations {
        let out = run(&args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn mixing_time_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let v = json_of(&run(&[
        "mixing-time",
        "--chain",
        chain.to_str().unwrap(),
        "--f-name",
        "f_1",
        "--delta",
        "0.01",
    ]));
    let rows = v["result"]["rows"].as_array().unwrap();
    let get = |name: &str| {
        rows.iter().find(|r| r["bound_type"] == name).unwrap()["values"][0]
            .as_u64()
            .unwrap()
    };
    assert!(get("Actual") <= get("Oracle"));
    assert!(get("Oracle") <= get("FS"));
    assert!(get("FS") <= get("Uniform"));
}

#[test]
fn eigen_indices_on_the_command_line_are_one_based() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let c = chain.to_str().unwrap();
    let v = json_of(&run(&[
        "discrepancy",
        "--chain",
        c,
        "--f-name",
        "f_1",
        "--steps",
        "3",
        "--J",
        "2..3",
    ]));
    assert_eq!(v["result"]["J"], serde_json::json!([2, 3]));
    let trivial = run(&["discrepancy", "--chain", c, "--f-name", "f_1", "--J", "1..3"]);
    assert_eq!(trivial.status.code(), Some(1));
}

#[test]
fn exit_codes_separate_input_errors_from_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let c = chain.to_str().unwrap();
    assert_eq!(
        run(&["spectrum", "--chain", c, "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["spectrum", "--chain", "/nonexistent/chain.json"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let clt = run(&[
        "interval",
        "--chain",
        c,
        "--f-name",
        "f_1",
        "--simulate",
        "100",
        "--method",
        "clt",
    ]);
    assert_eq!(clt.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&clt.stderr).contains("requires N >="));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn nmax_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let c = chain.to_str().unwrap();
    let capped = fnmix()
        .args(["mixing-time", "--chain", c, "--f-name", "f_1", "--delta", "1e-9"])
        .env("FNMIX_NMAX", "5")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(2));
    let ok = fnmix()
        .args(["spectrum", "--chain", c])
        .env("FNMIX_NMAX", "77")
        .output()
        .unwrap();
    assert_eq!(json_of(&ok)["config"]["n_max"], 77);
}

#[test]
fn csv_output_is_reproducible_with_full_precision() {
    let args = ["reproduce", "cycle", "--d", "4", "--steps", "40"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# fnmix reproduce "));
    assert_eq!(lines.next().unwrap(), "j,n,exact,bound");
    let first = lines.next().unwrap();
    let exact = first.split(',').nth(2).unwrap();
    let mantissa = exact.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn simulated_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let chain = cycle_file(dir.path());
    let c = chain.to_str().unwrap();
    let args = [
        "simulate", "--chain", c, "--f-name", "f_1", "--N", "300", "--reps", "20", "--seed", "9", "--format", "csv",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn mixture_table_has_the_bound_comparison_layout() {
    let out = run(&["reproduce", "mixture"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "bound_type,Tf_0.01,Tf_1e-6");
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["Uniform", "FS", "Oracle", "Actual"]);
    let col = |k: usize| {
        lines[1..]
            .iter()
            .map(|l| l.split(',').nth(k).unwrap().parse::<u64>().unwrap())
            .collect::<Vec<_>>()
    };
    for k in [1, 2] {
        assert!(col(k).windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn reproduce_targets_produce_bound_and_exact_columns() {
    let oring = run(&["reproduce", "oring", "--half-width", "3", "--steps", "10"]);
    assert!(oring.status.success(), "{}", String::from_utf8_lossy(&oring.stderr));
    assert!(String::from_utf8_lossy(&oring.stdout).contains("n,exact,oracle,fs,f_gap,uniform"));
    let lb = run(&["reproduce", "lowerbound", "--d", "10", "--N", "4", "--reps", "2000"]);
    assert!(String::from_utf8_lossy(&lb.stdout).contains("N,frequency,std_error,reference"));
    let hc = run(&[
        "reproduce",
        "hoeffding-compare",
        "--N",
        "100000",
        "--epsilon",
        "0.05,0.1",
    ]);
    assert!(hc.status.success(), "{}", String::from_utf8_lossy(&hc.stderr));
    let text = String::from_utf8(hc.stdout).unwrap();
    let row = text.lines().nth(2).unwrap();
    let log_master: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(log_master.is_finite() && log_master < 0.0);
}

#[test]
fn missing_data_file_is_an_input_error() {
    let out = run(&["reproduce", "oring", "--data", "/nonexistent/oring.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("data"));
}

#[test]
fn help_names_the_quantity_each_flag_controls() {
    let out = run(&["hoeffding", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("T_f"));
    assert!(text.contains("Sample size N"));
    assert!(text.contains("FNMIX_NMAX"));
}
