//! Batch front end: configuration, study execution and report files.

pub mod config;
pub mod output;
pub mod validate;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{
    run_case_study, sensitivity_cv, sensitivity_penalty, sensitivity_scenarios, solve, Model,
};
use crate::scenario::generate_scenarios;
use crate::{CaseSpec, Error, ScenarioSet, SolveReport, SpotObservation};

pub use config::{Fault, RunConfig, KEYS};
pub use output::{csv_bytes, fmt_num, json_bytes, write_atomic, write_report};
pub use validate::{run_validation, Check, ValidationReport, RESIDUAL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    CaseStudy,
    Sensitivity,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CaseStudy => "case-study",
            Command::Sensitivity => "sensitivity",
            Command::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "case-study" => Ok(Command::CaseStudy),
            "sensitivity" => Ok(Command::Sensitivity),
            "validate" => Ok(Command::Validate),
            _ => Err(Error::Config(format!(
                "unknown command `{s}` (expected simulate, case-study, sensitivity, validate)"
            ))),
        }
    }
}

/// Why a command stopped. Each kind maps to one process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or unreadable input data.
    Config(Error),
    /// Solver failure, residual breach or output I/O.
    Solver(Error),
    /// A validation check missed its tolerance.
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "error: {e}"),
            Failure::Solver(e) => write!(f, "solver error: {e}"),
            Failure::Validation(name) => write!(f, "validation failed: check `{name}`"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn solver<T>(r: crate::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Solver)
}

/// Input-stage errors are configuration errors, whatever their kind.
fn input<T>(r: crate::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Config)
}

fn say(log: &mut dyn Write, line: impl fmt::Display) {
    // a closed stdout must not turn a finished run into a failure
    let _ = writeln!(log, "{line}");
}

/// Runs `cmd`, writing results under `cfg.output_dir` and progress lines to
/// `log`.
pub fn run(cmd: Command, cfg: &RunConfig, log: &mut dyn Write) -> Outcome<()> {
    match cmd {
        Command::Simulate => simulate(cfg, log),
        Command::CaseStudy => case_study(cfg, log),
        Command::Sensitivity => sensitivity(cfg, log),
        Command::Validate => validate(cfg, log),
    }
}

fn scenarios(spot: &[SpotObservation], spec: &CaseSpec, n: usize, cfg: &RunConfig) -> Outcome<ScenarioSet> {
    input(generate_scenarios(spot, spec, n, cfg.seed).and_then(|s| s.with_penalty(cfg.penalty_c)))
}

fn check_residual(what: &str, r: &SolveReport) -> Outcome<()> {
    let res = r.max_residual();
    if res > RESIDUAL_TOL {
        return Err(Failure::Solver(Error::Solver(format!(
            "{what}: KKT residual {res:e} exceeds {RESIDUAL_TOL:e}"
        ))));
    }
    Ok(())
}

fn run_dir(case: &CaseSpec, model: Model) -> String {
    format!("{}-{}", case.name, model.as_str())
}

fn simulate(cfg: &RunConfig, log: &mut dyn Write) -> Outcome<()> {
    let spot = input(cfg.spot())?;
    let spec = input(cfg.case_spec())?;
    let s = scenarios(&spot, &spec, cfg.simulate_scenarios(), cfg)?;
    let r = solver(solve(cfg.model, &s, &cfg.settings_seeded()))?;
    solver(write_report(&cfg.output_dir, spec.name.as_str(), cfg.model, cfg.seed, &s, &r))?;
    say(
        log,
        format_args!(
            "{} {}: expected profit {}, average tariff {}, welfare {}, max residual {:e}",
            spec.name,
            cfg.model.as_str(),
            fmt_num(r.expected_profit),
            fmt_num(r.average_tariff()),
            fmt_num(r.total_welfare()),
            r.max_residual()
        ),
    );
    check_residual(&run_dir(&spec, cfg.model), &r)
}

#[derive(Serialize)]
struct StudyFile<'a> {
    seed: u64,
    n_mpec: usize,
    n_equilibrium: usize,
    equilibrium_model: &'a str,
    paired: &'a [crate::analytics::PairedComparison],
    diagnostics: &'a [String],
}

fn case_study(cfg: &RunConfig, log: &mut dyn Write) -> Outcome<()> {
    let spot = input(cfg.spot())?;
    let specs: Vec<CaseSpec> = input(cfg.cases.iter().map(|c| cfg.spec_for(*c)).collect())?;
    let study = cfg.study();
    let res = solver(run_case_study(&spot, &specs, &study))?;
    let dir = &cfg.output_dir;
    solver(output::ensure_dir(dir))?;

    let mut rows = Vec::new();
    for run in &res.runs {
        let name = run_dir(&run.case, run.model);
        solver(write_report(
            &dir.join(&name),
            run.case.name.as_str(),
            run.model,
            cfg.seed,
            &run.scenarios,
            &run.report,
        ))?;
        rows.push(vec![
            run.case.name.to_string(),
            run.model.as_str().to_string(),
            fmt_num(run.report.expected_profit),
            fmt_num(run.report.average_tariff()),
            fmt_num(run.report.total_welfare()),
        ]);
    }
    let comparison = solver(csv_bytes(
        &["case", "model", "expected_profit", "avg_tariff", "total_welfare"],
        rows,
    ))?;
    solver(write_atomic(&dir.join("comparison.csv"), &comparison))?;

    let paired = solver(csv_bytes(
        &[
            "case",
            "scenarios",
            "mpec_profit",
            "equilibrium_profit",
            "mpec_welfare",
            "equilibrium_welfare",
            "mpec_avg_tariff",
            "equilibrium_avg_tariff",
        ],
        res.paired.iter().map(|p| {
            vec![
                p.case.clone(),
                p.scenarios.to_string(),
                fmt_num(p.mpec_profit),
                fmt_num(p.equilibrium_profit),
                fmt_num(p.mpec_welfare),
                fmt_num(p.equilibrium_welfare),
                fmt_num(p.mpec_avg_tariff),
                fmt_num(p.equilibrium_avg_tariff),
            ]
        }),
    ))?;
    solver(write_atomic(&dir.join("paired.csv"), &paired))?;
    let file = StudyFile {
        seed: cfg.seed,
        n_mpec: study.n_mpec,
        n_equilibrium: study.n_equilibrium,
        equilibrium_model: study.equilibrium_model.as_str(),
        paired: &res.paired,
        diagnostics: &res.diagnostics,
    };
    solver(write_atomic(&dir.join("study.json"), &solver(json_bytes(&file))?))?;

    for run in &res.runs {
        say(
            log,
            format_args!(
                "{}: expected profit {}, average tariff {}, welfare {}",
                run_dir(&run.case, run.model),
                fmt_num(run.report.expected_profit),
                fmt_num(run.report.average_tariff()),
                fmt_num(run.report.total_welfare())
            ),
        );
    }
    for d in &res.diagnostics {
        say(log, d);
    }
    for run in &res.runs {
        check_residual(&run_dir(&run.case, run.model), &run.report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SensitivityFile<'a> {
    case: &'a str,
    seed: u64,
    scenarios: &'a crate::analytics::ScenarioCountTable,
    cv: &'a crate::analytics::CvTable,
    penalty: &'a crate::analytics::PenaltyTable,
}

fn sensitivity(cfg: &RunConfig, log: &mut dyn Write) -> Outcome<()> {
    let spot = input(cfg.spot())?;
    let spec = input(cfg.case_spec())?;
    let mpec = cfg.settings_seeded().mpec;
    let counts = solver(sensitivity_scenarios(&spot, &spec, &cfg.sensitivity_counts, cfg.seed, &mpec))?;
    let cv = solver(sensitivity_cv(&spot, &spec, &cfg.sensitivity_cvs, cfg.n_mpec, cfg.seed, &mpec))?;
    let pen = solver(sensitivity_penalty(
        &spot,
        &spec,
        &cfg.sensitivity_penalties,
        cfg.n_mpec,
        cfg.seed,
        &mpec,
    ))?;
    let dir = &cfg.output_dir;
    solver(output::ensure_dir(dir))?;

    let files: [(&str, Outcome<Vec<u8>>); 3] = [
        (
            "scenarios.csv",
            solver(csv_bytes(
                &["scenarios", "expected_profit", "mean_tariff", "mean_q_spot"],
                counts.rows.iter().map(|r| {
                    vec![
                        r.scenarios.to_string(),
                        fmt_num(r.expected_profit),
                        fmt_num(r.mean_tariff),
                        fmt_num(r.mean_q_spot),
                    ]
                }),
            )),
        ),
        (
            "cv.csv",
            solver(csv_bytes(
                &["cv_spot", "expected_profit", "mean_tariff", "total_welfare"],
                cv.rows.iter().map(|r| {
                    vec![
                        fmt_num(r.cv_spot),
                        fmt_num(r.expected_profit),
                        fmt_num(r.mean_tariff),
                        fmt_num(r.total_welfare),
                    ]
                }),
            )),
        ),
        (
            "penalty.csv",
            solver(csv_bytes(
                &["penalty_c", "hour", "tariff", "expected_profit", "expected_abs_imbalance"],
                pen.rows.iter().flat_map(|r| {
                    r.tariff.iter().enumerate().map(move |(t, p)| {
                        vec![
                            fmt_num(r.penalty_c),
                            (t + 1).to_string(),
                            fmt_num(*p),
                            fmt_num(r.expected_profit),
                            fmt_num(r.expected_abs_imbalance),
                        ]
                    })
                }),
            )),
        ),
    ];
    for (name, bytes) in files {
        solver(write_atomic(&dir.join(name), &bytes?))?;
    }
    let file = SensitivityFile {
        case: spec.name.as_str(),
        seed: cfg.seed,
        scenarios: &counts,
        cv: &cv,
        penalty: &pen,
    };
    solver(write_atomic(&dir.join("sensitivity.json"), &solver(json_bytes(&file))?))?;

    say(log, format_args!("scenario-count profit spread {}", fmt_num(counts.profit_spread)));
    say(
        log,
        format_args!(
            "spot cv tariff spread {}, welfare spread {}",
            fmt_num(cv.tariff_spread),
            fmt_num(cv.welfare_spread)
        ),
    );
    say(log, format_args!("penalty tariff deviation {}", fmt_num(pen.max_tariff_deviation)));
    for w in &pen.warnings {
        say(log, format_args!("warning: {w}"));
    }
    Ok(())
}

fn validate(cfg: &RunConfig, log: &mut dyn Write) -> Outcome<()> {
    let report = run_validation(cfg);
    for c in &report.checks {
        say(
            log,
            format_args!(
                "{} {}: metric {:e}, tolerance {:e} ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.metric,
                c.tolerance,
                c.detail
            ),
        );
    }
    write_validation(&cfg.output_dir, &report)?;
    match report.first_failure() {
        Some(c) => Err(Failure::Validation(c.name.to_string())),
        None => Ok(()),
    }
}

fn write_validation(dir: &Path, report: &ValidationReport) -> Outcome<()> {
    solver(output::ensure_dir(dir))?;
    solver(write_atomic(&dir.join("validation.json"), &solver(json_bytes(report))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in [Command::Simulate, Command::CaseStudy, Command::Sensitivity, Command::Validate] {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), c);
        }
        assert!("solve".parse::<Command>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Config(Error::Config("x".into())).exit_code(), 1);
        assert_eq!(Failure::Solver(Error::Solver("x".into())).exit_code(), 2);
        assert_eq!(Failure::Validation("x".into()).exit_code(), 3);
    }

    #[test]
    fn single_hour_simulation_has_zero_margin() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_str("case = custom\na_mean = 0.03\nb_mean = 0.0015\ndelta_max = 0\nmodel = eq-milp\nn_scenarios = 3")
            .unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        let spot = dir.path().join("spot.csv");
        std::fs::write(&spot, "hour,price_eur_per_kwh,quantity_kwh\n1,0.02,100\n").unwrap();
        cfg.spot_csv = Some(spot);
        let mut log = Vec::new();
        run(Command::Simulate, &cfg, &mut log).unwrap();
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(v["expected_profit"].as_f64().unwrap().abs() <= 1e-9);
    }
}
