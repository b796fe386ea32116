//! Case studies and sensitivity sweeps over the two market models.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve_equilibrium_milp, solve_equilibrium_nlp, EquilibriumConfig, NlpConfig};
use crate::mpec::{solve_mpec, MpecConfig};
use crate::scenario::generate_scenarios;
use crate::{CaseSpec, Error, Result, ScenarioSet, SolveReport, SpotObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Mpec,
    EqMilp,
    EqNlp,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Mpec => "mpec",
            Model::EqMilp => "eq-milp",
            Model::EqNlp => "eq-nlp",
        }
    }

    pub fn is_equilibrium(self) -> bool {
        self != Model::Mpec
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mpec" => Ok(Model::Mpec),
            "eq-milp" | "milp" => Ok(Model::EqMilp),
            "eq-nlp" | "nlp" => Ok(Model::EqNlp),
            _ => Err(Error::Config(format!(
                "unknown model `{s}` (expected mpec, eq-milp, eq-nlp)"
            ))),
        }
    }
}

/// Solver settings shared by every study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SolverSettings {
    pub mpec: MpecConfig,
    pub equilibrium: EquilibriumConfig,
    pub nlp: NlpConfig,
}


/// Solves `s` with `model`.
pub fn solve(model: Model, s: &ScenarioSet, settings: &SolverSettings) -> Result<SolveReport> {
    match model {
        Model::Mpec => solve_mpec(s, &settings.mpec),
        Model::EqMilp => solve_equilibrium_milp(s, &settings.equilibrium),
        Model::EqNlp => solve_equilibrium_nlp(s, &settings.nlp),
    }
}

/// Expected retailer profit of each hour.
pub fn hourly_expected_profit(s: &ScenarioSet, r: &SolveReport) -> Vec<f64> {
    let d = s.dims();
    (0..d.hours)
        .map(|t| {
            (0..d.scenarios)
                .map(|w| {
                    let k = d.r(t, w);
                    let rev = r.prices.p[k] * r.consumer.aggregate(t, w);
                    let cost = s.spot(t, w) * r.retailer.q_spot[k]
                        + s.penalty_c() * r.retailer.abs_imbalance[k];
                    s.prob(w) * (rev - cost)
                })
                .sum()
        })
        .collect()
}

/// Expected imbalance `δ` of each hour.
pub fn hourly_expected_imbalance(s: &ScenarioSet, r: &SolveReport) -> Vec<f64> {
    let d = s.dims();
    (0..d.hours)
        .map(|t| (0..d.scenarios).map(|w| s.prob(w) * r.retailer.imbalance[d.r(t, w)]).sum())
        .collect()
}

/// `(max - min) / min |v|`; zero for fewer than two values.
pub fn relative_spread(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = v.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if max == min {
        0.0
    } else {
        (max - min) / floor
    }
}

/// One solved (case, model) pair with the series behind the figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub case: CaseSpec,
    pub model: Model,
    pub scenarios: ScenarioSet,
    pub report: SolveReport,
    pub tariff: Vec<f64>,
    pub purchase: Vec<f64>,
    pub q_spot: Vec<f64>,
    pub imbalance: Vec<f64>,
    pub hourly_profit: Vec<f64>,
}

impl CaseRun {
    fn new(case: &CaseSpec, model: Model, s: ScenarioSet, report: SolveReport) -> Self {
        CaseRun {
            case: case.clone(),
            model,
            tariff: report.tariff.p.clone(),
            purchase: report.expected_purchase(s.probs()),
            q_spot: report.expected_q_spot(s.probs()),
            imbalance: hourly_expected_imbalance(&s, &report),
            hourly_profit: hourly_expected_profit(&s, &report),
            scenarios: s,
            report,
        }
    }
}

/// Both models on one scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub case: String,
    pub scenarios: usize,
    pub mpec_profit: f64,
    pub equilibrium_profit: f64,
    pub mpec_welfare: f64,
    pub equilibrium_welfare: f64,
    pub mpec_avg_tariff: f64,
    pub equilibrium_avg_tariff: f64,
}

impl PairedComparison {
    pub fn profit_ordered(&self) -> bool {
        self.mpec_profit >= self.equilibrium_profit
    }
    pub fn welfare_ordered(&self) -> bool {
        self.equilibrium_welfare >= self.mpec_welfare
    }
    pub fn tariff_ordered(&self) -> bool {
        self.mpec_avg_tariff >= self.equilibrium_avg_tariff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_mpec: usize,
    pub n_equilibrium: usize,
    pub seed: u64,
    /// Penalty override for every case.
    pub penalty_c: Option<f64>,
    pub equilibrium_model: Model,
    /// Also solve the equilibrium on the MPEC scenario set.
    pub paired: bool,
    pub settings: SolverSettings,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n_mpec: 30,
            n_equilibrium: 300,
            seed: 0,
            penalty_c: None,
            equilibrium_model: Model::EqMilp,
            paired: true,
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    /// MPEC then equilibrium for each case, in case order.
    pub runs: Vec<CaseRun>,
    pub paired: Vec<PairedComparison>,
    pub diagnostics: Vec<String>,
}

fn scenarios_for(
    spot: &[SpotObservation],
    case: &CaseSpec,
    n: usize,
    seed: u64,
    penalty_c: Option<f64>,
) -> Result<ScenarioSet> {
    let s = generate_scenarios(spot, case, n, seed)?;
    match penalty_c {
        Some(c) => s.with_penalty(c),
        None => Ok(s),
    }
}

fn with_case<T>(case: &CaseSpec, what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Solver(m) => Error::Solver(format!("case {} ({what}): {m}", case.name)),
        e => e,
    })
}

struct CaseOutcome {
    mpec: CaseRun,
    equilibrium: CaseRun,
    paired: Option<PairedComparison>,
}

fn run_case(spot: &[SpotObservation], case: &CaseSpec, cfg: &StudyConfig) -> Result<CaseOutcome> {
    let sm = scenarios_for(spot, case, cfg.n_mpec, cfg.seed, cfg.penalty_c)?;
    let mpec = with_case(case, "mpec", solve(Model::Mpec, &sm, &cfg.settings))?;
    let paired = if cfg.paired {
        let eq = with_case(case, "paired equilibrium", solve(cfg.equilibrium_model, &sm, &cfg.settings))?;
        Some(PairedComparison {
            case: case.name.as_str().to_string(),
            scenarios: cfg.n_mpec,
            mpec_profit: mpec.expected_profit,
            equilibrium_profit: eq.expected_profit,
            mpec_welfare: mpec.total_welfare(),
            equilibrium_welfare: eq.total_welfare(),
            mpec_avg_tariff: mpec.average_tariff(),
            equilibrium_avg_tariff: eq.average_tariff(),
        })
    } else {
        None
    };
    let se = scenarios_for(spot, case, cfg.n_equilibrium, cfg.seed, cfg.penalty_c)?;
    let eq = with_case(case, "equilibrium", solve(cfg.equilibrium_model, &se, &cfg.settings))?;
    Ok(CaseOutcome {
        mpec: CaseRun::new(case, Model::Mpec, sm, mpec),
        equilibrium: CaseRun::new(case, cfg.equilibrium_model, se, eq),
        paired,
    })
}

/// Solves every case under both models. Each case draws its scenarios from
/// the same seed, so the smaller set is a prefix of the larger one.
pub fn run_case_study(
    spot: &[SpotObservation],
    cases: &[CaseSpec],
    cfg: &StudyConfig,
) -> Result<StudyResult> {
    if cases.is_empty() {
        return Err(Error::Config("case study needs at least one case".into()));
    }
    if !cfg.equilibrium_model.is_equilibrium() {
        return Err(Error::Config("equilibrium_model must be eq-milp or eq-nlp".into()));
    }
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .map(|c| run_case(spot, c, cfg))
        .collect::<Result<_>>()?;
    let mut runs = Vec::with_capacity(2 * cases.len());
    let mut paired = Vec::new();
    let mut diagnostics = Vec::new();
    for o in outcomes {
        let name = o.mpec.case.name;
        let positive: Vec<usize> = o
            .equilibrium
            .hourly_profit
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 1e-9)
            .map(|(t, _)| t + 1)
            .collect();
        diagnostics.push(if positive.is_empty() {
            format!("case {name}: equilibrium expected profit is non-positive in every hour")
        } else {
            format!("case {name}: equilibrium expected profit is positive in hours {positive:?}")
        });
        if o.mpec.scenarios.penalty_below_spot() {
            diagnostics.push(format!(
                "case {name}: penalty is below every spot price, dispatch is all imbalance"
            ));
        }
        if let Some(p) = o.paired {
            paired.push(p);
        }
        runs.push(o.mpec);
        runs.push(o.equilibrium);
    }
    Ok(StudyResult {
        runs,
        paired,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCountRow {
    pub scenarios: usize,
    pub expected_profit: f64,
    pub mean_tariff: f64,
    pub mean_q_spot: f64,
    /// Mean purchase of each consumer over hours and scenarios.
    pub mean_q: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCountTable {
    pub rows: Vec<ScenarioCountRow>,
    pub profit_spread: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// MPEC outcomes for each scenario count.
pub fn sensitivity_scenarios(
    spot: &[SpotObservation],
    case: &CaseSpec,
    counts: &[usize],
    seed: u64,
    mpec: &MpecConfig,
) -> Result<ScenarioCountTable> {
    if counts.is_empty() {
        return Err(Error::Config("scenario count list is empty".into()));
    }
    let rows: Vec<ScenarioCountRow> = counts
        .par_iter()
        .map(|&n| {
            let s = generate_scenarios(spot, case, n, seed)?;
            let r = solve_mpec(&s, mpec)?;
            let d = s.dims();
            let mean_q = (0..d.consumers)
                .map(|j| {
                    let mut acc = 0.0;
                    for w in 0..d.scenarios {
                        for t in 0..d.hours {
                            acc += s.prob(w) * r.consumer.q(j, t, w);
                        }
                    }
                    acc / d.hours as f64
                })
                .collect();
            Ok(ScenarioCountRow {
                scenarios: n,
                expected_profit: r.expected_profit,
                mean_tariff: r.average_tariff(),
                mean_q_spot: mean(&r.expected_q_spot(s.probs())),
                mean_q,
                probabilities: s.probs().to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let profits: Vec<f64> = rows.iter().map(|r| r.expected_profit).collect();
    Ok(ScenarioCountTable {
        profit_spread: relative_spread(&profits),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub cv_spot: f64,
    pub expected_profit: f64,
    pub mean_tariff: f64,
    pub total_welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    pub tariff_spread: f64,
    pub welfare_spread: f64,
}

/// MPEC outcomes for each spot-price coefficient of variation.
pub fn sensitivity_cv(
    spot: &[SpotObservation],
    case: &CaseSpec,
    cvs: &[f64],
    n: usize,
    seed: u64,
    mpec: &MpecConfig,
) -> Result<CvTable> {
    if cvs.is_empty() {
        return Err(Error::Config("cv list is empty".into()));
    }
    let rows: Vec<CvRow> = cvs
        .par_iter()
        .map(|&cv| {
            let mut c = case.clone();
            c.cv_spot = cv;
            c.validate()?;
            let s = generate_scenarios(spot, &c, n, seed)?;
            let r = solve_mpec(&s, mpec)?;
            Ok(CvRow {
                cv_spot: cv,
                expected_profit: r.expected_profit,
                mean_tariff: r.average_tariff(),
                total_welfare: r.total_welfare(),
            })
        })
        .collect::<Result<_>>()?;
    let tariffs: Vec<f64> = rows.iter().map(|r| r.mean_tariff).collect();
    let welfare: Vec<f64> = rows.iter().map(|r| r.total_welfare).collect();
    Ok(CvTable {
        tariff_spread: relative_spread(&tariffs),
        welfare_spread: relative_spread(&welfare),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub penalty_c: f64,
    pub tariff: Vec<f64>,
    pub expected_profit: f64,
    /// Expected `y` summed over hours.
    pub expected_abs_imbalance: f64,
    pub below_spot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTable {
    pub rows: Vec<PenaltyRow>,
    /// Largest relative per-hour tariff spread across penalties.
    pub max_tariff_deviation: f64,
    pub warnings: Vec<String>,
}

/// MPEC tariffs for each imbalance penalty, on one scenario draw.
pub fn sensitivity_penalty(
    spot: &[SpotObservation],
    case: &CaseSpec,
    penalties: &[f64],
    n: usize,
    seed: u64,
    mpec: &MpecConfig,
) -> Result<PenaltyTable> {
    if penalties.is_empty() {
        return Err(Error::Config("penalty list is empty".into()));
    }
    if let Some(c) = penalties.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("penalty must be positive, got {c}")));
    }
    let base = generate_scenarios(spot, case, n, seed)?;
    let rows: Vec<PenaltyRow> = penalties
        .par_iter()
        .map(|&c| {
            let s = base.clone().with_penalty(c)?;
            let r = solve_mpec(&s, mpec)?;
            let d = s.dims();
            let mut y = 0.0;
            for w in 0..d.scenarios {
                for t in 0..d.hours {
                    y += s.prob(w) * r.retailer.abs_imbalance[d.r(t, w)];
                }
            }
            Ok(PenaltyRow {
                penalty_c: c,
                tariff: r.tariff.p.clone(),
                expected_profit: r.expected_profit,
                expected_abs_imbalance: y,
                below_spot: s.penalty_below_spot(),
            })
        })
        .collect::<Result<_>>()?;
    let hours = base.hours();
    let max_tariff_deviation = (0..hours)
        .map(|t| relative_spread(&rows.iter().map(|r| r.tariff[t]).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let warnings = rows
        .iter()
        .filter(|r| r.below_spot)
        .map(|r| format!("penalty {} is below every spot price; dispatch is all imbalance", r.penalty_c))
        .collect();
    Ok(PenaltyTable {
        rows,
        max_tariff_deviation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_case, sample_spot};

    #[test]
    fn spread_definition() {
        assert_eq!(relative_spread(&[2.0]), 0.0);
        assert!((relative_spread(&[2.0, 2.1, 1.9]) - 0.2 / 1.9).abs() < 1e-15);
        assert_eq!(relative_spread(&[3.0, 3.0]), 0.0);
    }

    #[test]
    fn model_names_round_trip() {
        for m in [Model::Mpec, Model::EqMilp, Model::EqNlp] {
            assert_eq!(m.as_str().parse::<Model>().unwrap(), m);
        }
        assert!("milp2".parse::<Model>().is_err());
    }

    #[test]
    fn empty_inputs_rejected() {
        let spot = sample_spot();
        let case = build_case("BM").unwrap();
        assert!(run_case_study(&spot, &[], &StudyConfig::default()).is_err());
        let m = MpecConfig::default();
        assert!(sensitivity_scenarios(&spot, &case, &[], 0, &m).is_err());
        assert!(sensitivity_cv(&spot, &case, &[], 5, 0, &m).is_err());
        assert!(sensitivity_penalty(&spot, &case, &[-1.0], 5, 0, &m).is_err());
    }

    #[test]
    fn hourly_profit_sums_to_expected_profit() {
        let spot = sample_spot();
        let case = build_case("BM").unwrap();
        let s = generate_scenarios(&spot, &case, 2, 3).unwrap();
        let (_, r) = crate::mpec::evaluate_tariff(&s, &crate::Tariff::flat(24, 0.03)).unwrap();
        let h: f64 = hourly_expected_profit(&s, &r).iter().sum();
        assert!((h - r.expected_profit).abs() < 1e-12);
    }
}
