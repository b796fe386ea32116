//! Competitive equilibrium: every consumer best-responds and the retailer is
//! a price taker. Solved as the joint KKT system with complementarity handled
//! either by pattern branch and bound or by a penalty method.
//!
//! With [`Coupling::PerScenario`] each scenario clears its own hourly price
//! and the reported tariff is the expected clearing price. A single price
//! shared by all scenarios ([`Coupling::Linked`]) forces `P_t = P^S_tω` in
//! every scenario with positive purchase and so rarely admits a solution once
//! spot prices differ across scenarios.

mod bigm;
mod bnb;
mod clearing;
mod nlp;
mod system;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bigm::{validate_big_m, BigMConfig, BigMViolation};
pub use system::{PairKind, Side};

use self::bigm::{worst_violation, BoundedParts};
use self::bnb::Search;
use self::clearing::{clear_scenario, clearing_point};
use self::system::{assemble_vector, Extracted, KktSystem};
use crate::lp::{lp_minimize, LpOutcome};
use crate::model::{
    retailer_profit_breakdown, ConsumerDecision, ConsumerDuals, RetailerDecision, RetailerDuals,
    ScenarioPrices, SolveMeta,
};
use crate::{Error, Result, ScenarioSet, SolveReport};

/// Largest pair count the enumeration oracle accepts.
pub const ENUMERATION_MAX_PAIRS: usize = 14;
/// Probe bounds are this multiple of the larger of the current and the
/// instance-derived bounds.
const PROBE_FACTOR: f64 = 64.0;

#[derive(Debug, thiserror::Error)]
pub enum EquilibriumError {
    #[error("big-M bound too small: {0}")]
    BigMTooSmall(BigMViolation),
    #[error("no equilibrium exists: {0}")]
    Infeasible(String),
    #[error("node budget of {budget} exhausted (scenario {scenario})")]
    NodeBudget { budget: u64, scenario: usize },
    #[error("complementarity penalty stalled at {best:e} (scenario {scenario})")]
    NoConvergence { best: f64, scenario: usize },
    #[error("pattern enumeration over {pairs} pairs exceeds the limit of {limit}")]
    TooManyPairs { pairs: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// One clearing price per hour and scenario.
    #[default]
    PerScenario,
    /// One price per hour shared by all scenarios.
    Linked,
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "per-scenario" | "per_scenario" => Ok(Coupling::PerScenario),
            "linked" => Ok(Coupling::Linked),
            _ => Err(Error::Config(format!(
                "unknown coupling `{s}` (expected per-scenario, linked)"
            ))),
        }
    }
}

impl Coupling {
    pub fn as_str(self) -> &'static str {
        match self {
            Coupling::PerScenario => "per-scenario",
            Coupling::Linked => "linked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    pub big_m: BigMConfig,
    pub coupling: Coupling,
    /// Nodes per scenario block.
    pub node_budget: u64,
    /// Try the closed-form clearing pattern first and let it order branches.
    pub use_hint: bool,
    /// Row limit for a linked system.
    pub max_rows: usize,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            big_m: BigMConfig::default(),
            coupling: Coupling::PerScenario,
            node_budget: 20000,
            use_hint: true,
            max_rows: 2500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlpConfig {
    pub big_m: BigMConfig,
    pub coupling: Coupling,
    pub starts: usize,
    pub max_iterations: usize,
    /// Accept a point whose complementarity products are all below this.
    pub tolerance: f64,
    pub seed: u64,
    pub max_rows: usize,
}

impl Default for NlpConfig {
    fn default() -> Self {
        NlpConfig {
            big_m: BigMConfig::default(),
            coupling: Coupling::PerScenario,
            starts: 4,
            max_iterations: 200,
            tolerance: 1e-8,
            seed: 0,
            max_rows: 2500,
        }
    }
}

/// A solution of one block together with its search statistics.
enum BlockOutcome {
    Found {
        x: Vec<f64>,
        nodes: u64,
        iterations: u64,
    },
    Infeasible {
        iterations: u64,
    },
    Budget,
    Stalled {
        best: f64,
    },
}

struct Block {
    set: ScenarioSet,
    /// First scenario of the block in the full set.
    offset: usize,
}

fn blocks(s: &ScenarioSet, coupling: Coupling, max_rows: usize) -> Result<Vec<Block>> {
    match coupling {
        Coupling::PerScenario => Ok((0..s.dims().scenarios)
            .map(|w| Block {
                set: s.single_scenario_view(w),
                offset: w,
            })
            .collect()),
        Coupling::Linked => {
            let d = s.dims();
            let rows = d.consumers * d.scenarios * (3 * d.hours + 1) + 7 * d.hours * d.scenarios;
            if rows > max_rows {
                return Err(Error::TooLarge {
                    what: "linked equilibrium",
                    detail: format!("{rows} rows exceed the limit of {max_rows}"),
                });
            }
            Ok(vec![Block {
                set: s.clone(),
                offset: 0,
            }])
        }
    }
}

fn parts(e: &Extracted) -> BoundedParts<'_> {
    BoundedParts {
        prices: &e.prices,
        consumer: &e.consumer,
        consumer_duals: &e.consumer_duals,
        retailer: &e.retailer,
        retailer_duals: &e.retailer_duals,
    }
}

/// Runs `solve_block` on every block, enlarging the big-M bounds as needed,
/// and assembles the report.
fn drive<F>(
    s: &ScenarioSet,
    coupling: Coupling,
    big_m: &BigMConfig,
    max_rows: usize,
    mut meta: SolveMeta,
    solve_block: F,
) -> Result<SolveReport>
where
    F: Fn(&KktSystem, &Block) -> Result<BlockOutcome> + Sync,
{
    big_m.validate()?;
    let blocks = blocks(s, coupling, max_rows)?;
    let linked = coupling == Coupling::Linked;
    let (mut mp, mut md) = big_m.resolve(s);
    let margin = big_m.validation_margin;
    meta.notes.push(format!("coupling: {}", coupling.as_str()));
    for attempt in 0..=big_m.max_doublings {
        let outcomes: Vec<(KktSystem, BlockOutcome)> = blocks
            .par_iter()
            .map(|b| {
                let k = KktSystem::build(&b.set, linked, mp, md);
                let o = solve_block(&k, b)?;
                Ok((k, o))
            })
            .collect::<Result<_>>()?;
        let mut found = Vec::with_capacity(blocks.len());
        let mut infeasible = None;
        for (i, (k, o)) in outcomes.into_iter().enumerate() {
            match o {
                BlockOutcome::Found {
                    x,
                    nodes,
                    iterations,
                } => {
                    meta.nodes += nodes;
                    meta.iterations += iterations;
                    found.push(k.extract(&x));
                }
                BlockOutcome::Infeasible { iterations } => {
                    meta.iterations += iterations;
                    infeasible.get_or_insert(i);
                }
                BlockOutcome::Budget => {
                    return Err(EquilibriumError::NodeBudget {
                        budget: 0,
                        scenario: blocks[i].offset,
                    }
                    .into())
                }
                BlockOutcome::Stalled { best } => {
                    return Err(EquilibriumError::NoConvergence {
                        best,
                        scenario: blocks[i].offset,
                    }
                    .into())
                }
            }
        }
        let last = attempt == big_m.max_doublings;
        let violation = if let Some(i) = infeasible {
            // distinguish a genuine absence of equilibria from tight bounds
            let b = &blocks[i];
            let (dp, dd) = BigMConfig::default().resolve(&b.set);
            let (pp, pd) = (PROBE_FACTOR * mp.max(dp), PROBE_FACTOR * md.max(dd));
            let k = KktSystem::build(&b.set, linked, pp, pd);
            let probe = match solve_block(&k, b) {
                Ok(BlockOutcome::Found { x, .. }) => Some(k.extract(&x)),
                _ => None,
            };
            match probe.and_then(|e| worst_violation(&parts(&e), mp, md, margin, b.offset)) {
                Some(v) => v,
                None => {
                    return Err(EquilibriumError::Infeasible(format!(
                        "no complementarity pattern of scenario {} is feasible \
                         (probed with M_primal = {pp}, M_dual = {pd})",
                        b.offset
                    ))
                    .into())
                }
            }
        } else {
            let worst = found
                .iter()
                .zip(&blocks)
                .filter_map(|(e, b)| worst_violation(&parts(e), mp, md, margin, b.offset))
                .max_by(|a, b| (a.value.abs() / a.bound).total_cmp(&(b.value.abs() / b.bound)));
            match worst {
                Some(v) => v,
                None => {
                    meta.m_primal = Some(mp);
                    meta.m_dual = Some(md);
                    return merge(s, &blocks, found, meta);
                }
            }
        };
        if !big_m.auto_double || last {
            return Err(EquilibriumError::BigMTooSmall(violation).into());
        }
        meta.notes.push(format!("big-M validation failed: {violation}; doubling"));
        if violation.primal {
            mp *= 2.0;
        } else {
            md *= 2.0;
        }
    }
    unreachable!("the last attempt always returns")
}

fn merge(s: &ScenarioSet, blocks: &[Block], found: Vec<Extracted>, meta: SolveMeta) -> Result<SolveReport> {
    let d = s.dims();
    let mut prices = ScenarioPrices::zeros(d.hours, d.scenarios);
    let mut cons = ConsumerDecision::zeros(d);
    let mut cd = ConsumerDuals::zeros(d);
    let mut ret = RetailerDecision::zeros(d);
    let mut rd = RetailerDuals::zeros(d);
    for (e, b) in found.iter().zip(blocks) {
        let bd = e.consumer.dims;
        for wl in 0..bd.scenarios {
            let w = wl + b.offset;
            for j in 0..d.consumers {
                cd.lambda[j * d.scenarios + w] = e.consumer_duals.lambda[j * bd.scenarios + wl];
                for t in 0..d.hours {
                    let (g, l) = (d.c(j, t, w), bd.c(j, t, wl));
                    cons.q[g] = e.consumer.q[l];
                    cons.shift[g] = e.consumer.shift[l];
                    cd.eps[g] = e.consumer_duals.eps[l];
                    cd.nu_min[g] = e.consumer_duals.nu_min[l];
                    cd.nu_max[g] = e.consumer_duals.nu_max[l];
                }
            }
            for t in 0..d.hours {
                let (g, l) = (d.r(t, w), bd.r(t, wl));
                prices.p[g] = e.prices.p[l];
                ret.q_spot[g] = e.retailer.q_spot[l];
                ret.imbalance[g] = e.retailer.imbalance[l];
                ret.abs_imbalance[g] = e.retailer.abs_imbalance[l];
                rd.mu[g] = e.retailer_duals.mu[l];
                rd.alpha_plus[g] = e.retailer_duals.alpha_plus[l];
                rd.alpha_minus[g] = e.retailer_duals.alpha_minus[l];
                rd.theta[g] = e.retailer_duals.theta[l];
                rd.beta[g] = e.retailer_duals.beta[l];
            }
        }
    }
    let tariff = prices.expected(s.probs());
    SolveReport::assemble(s, tariff, prices, cons, cd, ret, Some(rd), meta)
}

/// Pattern of the closed-form clearing of a one-scenario block.
fn clearing_hint(k: &KktSystem, b: &Block) -> Vec<Side> {
    let c = clear_scenario(&b.set, 0);
    let e = clearing_point(&b.set, 0, &c);
    k.pattern_at(&assemble_vector(k, &e))
}

/// Solves the equilibrium by depth-first search over complementarity
/// patterns, each node an LP feasibility problem. Among the points of the
/// first feasible pattern the one with the lowest total price is returned.
pub fn solve_equilibrium_milp(s: &ScenarioSet, cfg: &EquilibriumConfig) -> Result<SolveReport> {
    if cfg.node_budget == 0 {
        return Err(Error::Config("node_budget must be positive".into()));
    }
    let meta = SolveMeta {
        solver: "equilibrium-pattern-bnb".into(),
        ..SolveMeta::default()
    };
    let budget = cfg.node_budget;
    let use_hint = cfg.use_hint && cfg.coupling == Coupling::PerScenario;
    drive(s, cfg.coupling, &cfg.big_m, cfg.max_rows, meta, |k, b| {
        let hint = use_hint.then(|| clearing_hint(k, b));
        Ok(match bnb::search(k, hint.as_deref(), budget)? {
            Search::Found {
                x,
                nodes,
                iterations,
            } => BlockOutcome::Found {
                x,
                nodes,
                iterations,
            },
            Search::RootInfeasible { iterations } | Search::Exhausted { iterations } => {
                BlockOutcome::Infeasible { iterations }
            }
            Search::Budget => BlockOutcome::Budget,
        })
    })
    .map_err(|e| match e {
        Error::Equilibrium(EquilibriumError::NodeBudget { scenario, .. }) => {
            EquilibriumError::NodeBudget {
                budget,
                scenario,
            }
            .into()
        }
        e => e,
    })
}

/// Solves the equilibrium by minimising the complementarity penalty with
/// Frank–Wolfe from several starts, snapping the best point to an exact
/// pattern.
pub fn solve_equilibrium_nlp(s: &ScenarioSet, cfg: &NlpConfig) -> Result<SolveReport> {
    if !(cfg.tolerance > 0.0) || cfg.starts == 0 {
        return Err(Error::Config(
            "nlp tolerance and start count must be positive".into(),
        ));
    }
    let meta = SolveMeta {
        solver: "equilibrium-frank-wolfe".into(),
        seed: Some(cfg.seed),
        ..SolveMeta::default()
    };
    let cfg = *cfg;
    drive(s, cfg.coupling, &cfg.big_m, cfg.max_rows, meta, move |k, b| {
        let seed = cfg.seed.wrapping_add(b.offset as u64);
        let run = nlp::frank_wolfe(k, cfg.starts, cfg.max_iterations, cfg.tolerance, seed)?;
        Ok(match run.x {
            Some(x) => BlockOutcome::Found {
                x,
                nodes: 0,
                iterations: run.iterations,
            },
            None if run.best.is_finite() => BlockOutcome::Stalled { best: run.best },
            None => BlockOutcome::Infeasible {
                iterations: run.iterations,
            },
        })
    })
}

/// One complementarity pattern with a feasible linear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedEquilibrium {
    pub pattern: Vec<Side>,
    /// Lowest-total-price point of the pattern.
    pub prices: ScenarioPrices,
    pub expected_profit: f64,
}

/// Every complementarity pattern of the joint system, each checked by LP.
/// Exhaustive, so limited to [`ENUMERATION_MAX_PAIRS`] pairs.
pub fn enumerate_equilibria(
    s: &ScenarioSet,
    coupling: Coupling,
    big_m: &BigMConfig,
) -> Result<Vec<EnumeratedEquilibrium>> {
    big_m.validate()?;
    let (mp, md) = big_m.resolve(s);
    let k = KktSystem::build(s, coupling == Coupling::Linked, mp, md);
    let n = k.pairs.len();
    if n > ENUMERATION_MAX_PAIRS {
        return Err(EquilibriumError::TooManyPairs {
            pairs: n,
            limit: ENUMERATION_MAX_PAIRS,
        }
        .into());
    }
    let obj = k.price_objective();
    let found: Vec<Option<EnumeratedEquilibrium>> = (0u32..1 << n)
        .into_par_iter()
        .map(|mask| {
            let pattern: Vec<Side> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { Side::Dual } else { Side::Primal })
                .collect();
            let fixed: Vec<Option<Side>> = pattern.iter().copied().map(Some).collect();
            let sys = k.with_pattern(&fixed);
            match lp_minimize(&sys, &obj)? {
                LpOutcome::Solved(sol) => {
                    let e = k.extract(&sol.x);
                    let profit =
                        retailer_profit_breakdown(s, &e.prices, &e.consumer, &e.retailer)?.profit;
                    Ok(Some(EnumeratedEquilibrium {
                        pattern,
                        prices: e.prices,
                        expected_profit: profit,
                    }))
                }
                LpOutcome::Infeasible(_) => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(spot: &[f64], a: f64, b: f64, dmax: f64) -> ScenarioSet {
        ScenarioSet::deterministic(
            spot,
            &[vec![a; spot.len()]],
            &[vec![b; spot.len()]],
            vec![dmax],
            500.0,
        )
        .unwrap()
    }

    #[test]
    fn single_hour_competitive_point() {
        let s = toy(&[0.02], 0.03, 0.0015, 2.0);
        let r = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        assert!((r.tariff.p[0] - 0.02).abs() < 1e-12);
        assert!((r.consumer.q[0] - 0.01 / 0.0015).abs() < 1e-9);
        assert!(r.expected_profit.abs() < 1e-12);
        assert!(r.max_residual() < 1e-9, "{:?}", r.retailer_residuals);
    }

    #[test]
    fn search_without_hint_agrees() {
        let s = toy(&[0.02, 0.026], 0.03, 0.0015, 1.5);
        let with = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        let cfg = EquilibriumConfig {
            use_hint: false,
            ..Default::default()
        };
        let without = solve_equilibrium_milp(&s, &cfg).unwrap();
        assert!(without.max_residual() < 1e-6);
        assert!((with.expected_profit - without.expected_profit).abs() < 1e-9);
        assert!(without.meta.nodes >= 1);
    }

    #[test]
    fn tiny_dual_bound_is_reported_then_recovered() {
        let s = toy(&[0.02], 0.03, 0.0015, 0.0);
        let mut cfg = EquilibriumConfig::default();
        cfg.big_m.m_dual = Some(1e-3);
        cfg.big_m.auto_double = false;
        let err = solve_equilibrium_milp(&s, &cfg).unwrap_err();
        match err {
            Error::Equilibrium(EquilibriumError::BigMTooSmall(v)) => assert!(!v.primal),
            e => panic!("unexpected {e}"),
        }
        cfg.big_m.auto_double = true;
        let r = solve_equilibrium_milp(&s, &cfg).unwrap();
        assert!(r.meta.m_dual.unwrap() > 1e-3);
        assert!(r.meta.notes.iter().any(|n| n.contains("doubling")));
        assert!((r.tariff.p[0] - 0.02).abs() < 1e-9);
    }

    #[test]
    fn linked_prices_fail_when_spot_differs() {
        let s = ScenarioSet::from_nested(
            vec![0.5, 0.5],
            &[vec![0.02, 0.03]],
            &[vec![vec![0.04, 0.04]]],
            &[vec![vec![0.0015, 0.0015]]],
            vec![0.0],
            500.0,
        )
        .unwrap();
        let cfg = EquilibriumConfig {
            coupling: Coupling::Linked,
            ..Default::default()
        };
        let err = solve_equilibrium_milp(&s, &cfg).unwrap_err();
        assert!(matches!(err, Error::Equilibrium(EquilibriumError::Infeasible(_))), "{err}");
        let ok = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        assert!((ok.tariff.p[0] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn enumeration_limit() {
        let s = toy(&[0.02, 0.03, 0.04], 0.05, 0.0015, 1.0);
        let err = enumerate_equilibria(&s, Coupling::PerScenario, &BigMConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Equilibrium(EquilibriumError::TooManyPairs { .. })));
    }

    #[test]
    fn coupling_parses() {
        assert_eq!("Linked".parse::<Coupling>().unwrap(), Coupling::Linked);
        assert!("both".parse::<Coupling>().is_err());
    }
}
