use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_retail-dr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const TOY_SPOT: &str = "hour,price_eur_per_kwh,quantity_kwh\n1,0.02,100\n";

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["simulate", "--bogus"])), 1);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("frobnicate"));
}

#[test]
fn unknown_case_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--set", "case=Q", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`case`"), "{}", stderr(&o));
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# run\nseed = 3\nn_scenarios = lots\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("n_scenarios"), "{}", stderr(&o));
    let o = run(&["simulate", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_spot_file_is_a_config_error() {
    let o = run(&["simulate", "--set", "spot_csv=/no/such/spot.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("spot_csv"));
}

#[test]
fn unwritable_output_is_a_solver_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spot = dir.path().join("spot.csv");
    fs::write(&spot, TOY_SPOT).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&[
        "simulate",
        "--set",
        &format!("spot_csv={}", spot.display()),
        "--set",
        "model=eq-milp",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn single_hour_equilibrium_has_zero_profit() {
    let dir = tempfile::tempdir().unwrap();
    let spot = dir.path().join("spot.csv");
    fs::write(&spot, TOY_SPOT).unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "simulate",
        "--set",
        &format!("spot_csv={}", spot.display()),
        "--set",
        "model=eq-milp",
        "--set",
        "n_scenarios=5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(v["expected_profit"].as_f64().unwrap().abs() <= 1e-9);
    assert!(v["max_kkt_residual"].as_f64().unwrap() <= 1e-6);
    let tariffs = fs::read_to_string(out.join("tariffs.csv")).unwrap();
    assert!(tariffs.starts_with("hour,tariff\n1,"));
    let dispatch = fs::read_to_string(out.join("dispatch.csv")).unwrap();
    assert_eq!(dispatch.lines().next(), Some("scenario,hour,q_spot,imbalance,y"));
    assert_eq!(dispatch.lines().count(), 6);
    let consumers = fs::read_to_string(out.join("consumers.csv")).unwrap();
    assert_eq!(
        consumers.lines().next(),
        Some("consumer,scenario,hour,q,shift,utility,welfare")
    );
}

#[test]
fn simulate_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&[
            "simulate",
            "--set",
            "seed=7",
            "--set",
            "n_scenarios=6",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 4);
    assert_eq!(ta, tb);
}

#[test]
fn small_case_study_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "case-study",
        "--set",
        "n_mpec=3",
        "--set",
        "n_equilibrium=4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let subdirs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    assert_eq!(subdirs.len(), 8);
    let files = tree(dir.path());
    assert!(files.iter().all(|(n, _)| !n.ends_with(".tmp")));
    let comparison = String::from_utf8(fs::read(dir.path().join("comparison.csv")).unwrap()).unwrap();
    let mut lines = comparison.lines();
    assert_eq!(lines.next(), Some("case,model,expected_profit,avg_tariff,total_welfare"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 8);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][1], "mpec");
        assert_eq!(pair[1][1], "eq-milp");
        let (m, e): (f64, f64) = (pair[0][2].parse().unwrap(), pair[1][2].parse().unwrap());
        assert!(m >= e, "{pair:?}");
    }
    assert!(dir.path().join("paired.csv").is_file());
    assert!(dir.path().join("study.json").is_file());
}

#[test]
fn validate_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--set", "validate_instances=5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"big-m") && names.contains(&"consumer-kkt"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("reported") && stdout.contains("recovered"));
}

#[test]
fn injected_fault_fails_consumer_kkt() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "validate",
        "--set",
        "validate_instances=2",
        "--set",
        "inject_fault=consumer-kkt-sign",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("consumer-kkt"), "{}", stderr(&o));
}
