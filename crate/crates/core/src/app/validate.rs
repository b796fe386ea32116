//! Desk-scale oracle suite behind the `validate` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Fault, RunConfig};
use crate::consumer::{best_response, best_response_oracle};
use crate::equilibrium::{
    enumerate_equilibria, solve_equilibrium_milp, solve_equilibrium_nlp, validate_big_m,
    EquilibriumConfig, EquilibriumError, NlpConfig,
};
use crate::model::{consumer_kkt_residuals_signed, KktResiduals};
use crate::mpec::{grid_search_oracle, solve_mpec, MpecConfig};
use crate::{Error, Result, ScenarioSet, SolveReport};

/// Residual threshold for every solver output.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn toy(spot: &[f64], a: &[f64], b: &[f64], dmax: f64) -> Result<ScenarioSet> {
    ScenarioSet::deterministic(spot, &[a.to_vec()], &[b.to_vec()], vec![dmax], 500.0)
}

fn check(name: &'static str, metric: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name,
        passed: metric <= tolerance,
        metric,
        tolerance,
        detail,
    }
}

fn best_response_check(cfg: &RunConfig) -> Result<Check> {
    let mut r = rng(cfg.seed, 1);
    let mut worst: f64 = 0.0;
    let n = 100;
    for _ in 0..n {
        let t = r.gen_range(2..=4);
        let p: Vec<f64> = (0..t).map(|_| r.gen_range(0.015..0.04)).collect();
        let a: Vec<f64> = (0..t).map(|_| r.gen_range(0.027..0.038)).collect();
        let b: Vec<f64> = (0..t).map(|_| r.gen_range(0.0013..0.0020)).collect();
        let dmax = r.gen_range(0.0..5.0);
        let cf = best_response(&p, &a, &b, dmax).objective(&p, &a, &b);
        let or = best_response_oracle(&p, &a, &b, dmax)?.objective(&p, &a, &b);
        worst = worst.max((cf - or).abs());
    }
    Ok(check(
        "consumer-best-response",
        worst,
        1e-6,
        format!("{n} instances with 2 to 4 hours against active-set enumeration"),
    ))
}

fn consumer_kkt_check(cfg: &RunConfig) -> Result<Check> {
    let sign = match cfg.inject_fault {
        Fault::ConsumerKktSign => -1.0,
        Fault::None => 1.0,
    };
    let s = toy(&[0.02, 0.026], &[0.03, 0.031], &[0.0015, 0.0014], 1.5)?;
    let mut worst: f64 = 0.0;
    let eq = solve_equilibrium_milp(&s, &EquilibriumConfig::default())?;
    let mp = solve_mpec(&s, &mpec_cfg(cfg, None))?;
    for r in [&eq, &mp] {
        let res = consumer_kkt_residuals_signed(&s, &r.prices, &r.consumer, &r.consumer_duals, 0, 0, sign);
        worst = worst.max(res.max());
    }
    Ok(check(
        "consumer-kkt",
        worst,
        RESIDUAL_TOL,
        "consumer stationarity, feasibility and complementarity at equilibrium and MPEC points".into(),
    ))
}

fn mpec_cfg(cfg: &RunConfig, p_max: Option<f64>) -> MpecConfig {
    let mut m = cfg.settings.mpec.clone();
    m.seed = cfg.seed;
    if p_max.is_some() {
        m.p_max = p_max;
    }
    m
}

fn mpec_grid_check(cfg: &RunConfig) -> Result<Check> {
    let mut r = rng(cfg.seed, 2);
    let mut worst = f64::NEG_INFINITY;
    let mcfg = mpec_cfg(cfg, Some(0.06));
    for _ in 0..cfg.validate_instances {
        let spot: Vec<f64> = (0..2).map(|_| r.gen_range(0.015..0.035)).collect();
        let a: Vec<f64> = (0..2).map(|_| r.gen_range(0.027..0.045)).collect();
        let b: Vec<f64> = (0..2).map(|_| r.gen_range(0.0013..0.0020)).collect();
        let s = toy(&spot, &a, &b, r.gen_range(0.0..3.0))?;
        let m = solve_mpec(&s, &mcfg)?;
        let (_, g) = grid_search_oracle(&s, cfg.validate_grid_step, 0.06)?;
        worst = worst.max(g - m.expected_profit);
    }
    Ok(check(
        "mpec-grid",
        worst.max(0.0),
        1e-4,
        format!(
            "{} two-hour instances, grid step {} on [0, 0.06]^2",
            cfg.validate_instances, cfg.validate_grid_step
        ),
    ))
}

fn monopoly_check(cfg: &RunConfig) -> Result<Check> {
    let s = toy(&[0.02], &[0.03], &[0.0015], 0.0)?;
    let m = solve_mpec(&s, &mpec_cfg(cfg, None))?;
    let dp = (m.tariff.p[0] - 0.025).abs();
    let dv = (m.expected_profit - 0.016665).abs();
    Ok(Check {
        name: "mpec-monopoly",
        passed: dp <= 1e-4 && dv <= 1e-5,
        metric: dp.max(dv),
        tolerance: 1e-5,
        detail: format!("tariff {} (want 0.025), profit {} (want 0.016665)", m.tariff.p[0], m.expected_profit),
    })
}

fn residual_and_products(r: &SolveReport) -> f64 {
    let c: &KktResiduals = &r.consumer_residuals;
    c.max().max(r.retailer_residuals.max())
}

fn equilibrium_toy_check(cfg: &RunConfig) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (a, ps, dmax) in [(0.03, 0.02, 0.0), (0.03, 0.02, 2.0), (0.035, 0.028, 1.0), (0.045, 0.03, 0.5)] {
        let s = toy(&[ps], &[a], &[0.0015], dmax)?;
        let milp = solve_equilibrium_milp(&s, &cfg.settings.equilibrium)?;
        let nlp = solve_equilibrium_nlp(&s, &NlpConfig { seed: cfg.seed, ..cfg.settings.nlp })?;
        for r in [&milp, &nlp] {
            worst = worst
                .max((r.tariff.p[0] - ps).abs())
                .max(r.expected_profit.abs())
                .max(residual_and_products(r) * 1e-3);
            cases += 1;
        }
    }
    Ok(check(
        "equilibrium-single-hour",
        worst,
        1e-9,
        format!("{cases} solves: price at spot, zero profit, residuals within {RESIDUAL_TOL}"),
    ))
}

fn enumeration_check(cfg: &RunConfig) -> Result<Check> {
    let mut r = rng(cfg.seed, 3);
    let mut worst: f64 = 0.0;
    let n = 5;
    for _ in 0..n {
        let spot: Vec<f64> = (0..2).map(|_| r.gen_range(0.015..0.035)).collect();
        let a: Vec<f64> = (0..2).map(|_| r.gen_range(0.025..0.045)).collect();
        let b: Vec<f64> = (0..2).map(|_| r.gen_range(0.0013..0.0020)).collect();
        let s = toy(&spot, &a, &b, r.gen_range(0.0..4.0))?;
        let milp = solve_equilibrium_milp(&s, &cfg.settings.equilibrium)?;
        let all = enumerate_equilibria(&s, cfg.settings.equilibrium.coupling, &cfg.settings.equilibrium.big_m)?;
        let gap = all
            .iter()
            .map(|e| {
                e.prices
                    .p
                    .iter()
                    .zip(&milp.prices.p)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        let nlp = solve_equilibrium_nlp(&s, &NlpConfig { seed: cfg.seed, ..cfg.settings.nlp })?;
        let agreement = (nlp.expected_profit - milp.expected_profit)
            .abs()
            .max((nlp.total_welfare() - milp.total_welfare()).abs())
            * 1e-3;
        worst = worst
            .max(gap)
            .max(residual_and_products(&milp))
            .max(residual_and_products(&nlp))
            .max(agreement);
    }
    Ok(check(
        "equilibrium-enumeration",
        worst,
        RESIDUAL_TOL,
        format!("{n} two-hour instances against exhaustive pattern enumeration; solver agreement within 1e-3"),
    ))
}

fn big_m_check(cfg: &RunConfig) -> Result<Check> {
    let s = toy(&[0.02, 0.026], &[0.03, 0.031], &[0.0015, 0.0014], 1.5)?;
    let base_cfg = cfg.settings.equilibrium;
    let base = solve_equilibrium_milp(&s, &base_cfg)?;
    let (mp, md) = base_cfg.big_m.resolve(&s);
    let verdict = validate_big_m(&base, mp, md, base_cfg.big_m.validation_margin);

    let mut tight = base_cfg;
    tight.big_m.m_dual = Some(cfg.validate_m_dual);
    tight.big_m.auto_double = false;
    let reported = match solve_equilibrium_milp(&s, &tight) {
        Err(Error::Equilibrium(EquilibriumError::BigMTooSmall(v))) => Some(v),
        Err(e) => return Err(e),
        Ok(_) => None,
    };
    tight.big_m.auto_double = true;
    let recovered = solve_equilibrium_milp(&s, &tight)?;
    let mut doubled = base_cfg;
    doubled.big_m.m_primal = Some(2.0 * mp);
    doubled.big_m.m_dual = Some(2.0 * md);
    let d2 = solve_equilibrium_milp(&s, &doubled)?;
    let drift = |r: &SolveReport| {
        r.tariff
            .p
            .iter()
            .zip(&base.tariff.p)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let metric = drift(&recovered).max(drift(&d2));
    let detail = format!(
        "default bounds {}; M_dual = {} {}; recovered at M_dual = {}",
        if verdict.is_ok() { "validate" } else { "fail validation" },
        cfg.validate_m_dual,
        match &reported {
            Some(v) => format!("reported {v}"),
            None => "was not reported".into(),
        },
        recovered.meta.m_dual.unwrap_or(f64::NAN),
    );
    Ok(Check {
        name: "big-m",
        passed: verdict.is_ok() && reported.is_some() && metric <= 1e-6,
        metric,
        tolerance: 1e-6,
        detail,
    })
}

/// Runs every check. Solver errors inside a check count as failures of that
/// check.
pub fn run_validation(cfg: &RunConfig) -> ValidationReport {
    type CheckFn = fn(&RunConfig) -> Result<Check>;
    let suite: [(&'static str, CheckFn); 7] = [
        ("consumer-best-response", best_response_check),
        ("consumer-kkt", consumer_kkt_check),
        ("mpec-grid", mpec_grid_check),
        ("mpec-monopoly", monopoly_check),
        ("equilibrium-single-hour", equilibrium_toy_check),
        ("equilibrium-enumeration", enumeration_check),
        ("big-m", big_m_check),
    ];
    let checks: Vec<Check> = suite
        .iter()
        .map(|(name, f)| {
            f(cfg).unwrap_or_else(|e| Check {
                name,
                passed: false,
                metric: f64::INFINITY,
                tolerance: 0.0,
                detail: format!("error: {e}"),
            })
        })
        .collect();
    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
