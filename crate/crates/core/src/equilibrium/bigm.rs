//! Bounds standing in for the big-M constants of the pattern formulation.

use serde::{Deserialize, Serialize};

use crate::model::{ConsumerDecision, ConsumerDuals, RetailerDecision, RetailerDuals, ScenarioPrices};
use crate::{Error, Result, ScenarioSet, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigMConfig {
    /// Bound on primal quantities; derived from the instance when `None`.
    pub m_primal: Option<f64>,
    /// Bound on prices and multipliers; derived from the instance when `None`.
    pub m_dual: Option<f64>,
    /// A value within this fraction of its bound fails validation.
    pub validation_margin: f64,
    /// Double offending bounds and re-solve instead of failing.
    pub auto_double: bool,
    pub max_doublings: u32,
}

impl Default for BigMConfig {
    fn default() -> Self {
        BigMConfig {
            m_primal: None,
            m_dual: None,
            validation_margin: 0.05,
            auto_double: true,
            max_doublings: 40,
        }
    }
}

impl BigMConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_primal", self.m_primal), ("m_dual", self.m_dual)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(0.0..1.0).contains(&self.validation_margin) {
            return Err(Error::Config(format!(
                "validation_margin must lie in [0, 1), got {}",
                self.validation_margin
            )));
        }
        Ok(())
    }

    /// `(M_primal, M_dual)` for `s`.
    pub fn resolve(&self, s: &ScenarioSet) -> (f64, f64) {
        let d = s.dims();
        let mut choke = 0.0;
        let mut a_max: f64 = 0.0;
        for j in 0..d.consumers {
            let mut m: f64 = 0.0;
            for w in 0..d.scenarios {
                for t in 0..d.hours {
                    a_max = a_max.max(s.a(j, t, w));
                    m = m.max(s.a(j, t, w).max(0.0) / s.b(j, t, w));
                }
            }
            choke += m + s.delta_max(j);
        }
        let mp = self.m_primal.unwrap_or(10.0 * choke.max(1.0));
        let scale = s.penalty_c().max(s.max_spot()).max(a_max).max(1.0);
        let md = self.m_dual.unwrap_or(10.0 * scale);
        (mp, md)
    }
}

/// A value that came too close to its big-M bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMViolation {
    pub variable: String,
    pub value: f64,
    pub bound: f64,
    /// Whether the bound is the primal one.
    pub primal: bool,
}

impl std::fmt::Display for BigMViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {} reaches the {} bound {}",
            self.variable,
            self.value,
            if self.primal { "primal" } else { "dual" },
            self.bound
        )
    }
}

pub(crate) struct BoundedParts<'a> {
    pub prices: &'a ScenarioPrices,
    pub consumer: &'a ConsumerDecision,
    pub consumer_duals: &'a ConsumerDuals,
    pub retailer: &'a RetailerDecision,
    pub retailer_duals: &'a RetailerDuals,
}

/// Largest value relative to its bound, when any reaches `(1 - margin)` of it.
/// `scenario_offset` shifts reported scenario labels.
pub(crate) fn worst_violation(
    parts: &BoundedParts<'_>,
    m_primal: f64,
    m_dual: f64,
    margin: f64,
    scenario_offset: usize,
) -> Option<BigMViolation> {
    let d = parts.consumer.dims;
    let mut worst: Option<(f64, String, f64, f64, bool)> = None;
    let mut check = |name: &dyn Fn() -> String, v: f64, bound: f64, primal: bool| {
        let r = v.abs() / bound;
        if r >= 1.0 - margin && worst.as_ref().is_none_or(|w| r > w.0) {
            worst = Some((r, name(), v, bound, primal));
        }
    };
    for j in 0..d.consumers {
        for w in 0..d.scenarios {
            let wl = w + scenario_offset;
            check(&|| format!("lambda[j={j},w={wl}]"), parts.consumer_duals.lambda[j * d.scenarios + w], m_dual, false);
            for t in 0..d.hours {
                let k = d.c(j, t, w);
                let q = parts.consumer.q[k];
                check(&|| format!("q[j={j},t={t},w={wl}]"), q, m_primal, true);
                check(
                    &|| format!("consumption[j={j},t={t},w={wl}]"),
                    q + parts.consumer.shift[k],
                    m_primal,
                    true,
                );
                check(&|| format!("epsilon[j={j},t={t},w={wl}]"), parts.consumer_duals.eps[k], m_dual, false);
                check(&|| format!("nu_min[j={j},t={t},w={wl}]"), parts.consumer_duals.nu_min[k], m_dual, false);
                check(&|| format!("nu_max[j={j},t={t},w={wl}]"), parts.consumer_duals.nu_max[k], m_dual, false);
            }
        }
    }
    let rd = parts.retailer_duals;
    let re = parts.retailer;
    for w in 0..d.scenarios {
        let wl = w + scenario_offset;
        for t in 0..d.hours {
            let r = d.r(t, w);
            check(&|| format!("price[t={t},w={wl}]"), parts.prices.p[r], m_dual, false);
            check(&|| format!("q_spot[t={t},w={wl}]"), re.q_spot[r], m_primal, true);
            check(&|| format!("imbalance[t={t},w={wl}]"), re.imbalance[r], m_primal, true);
            check(&|| format!("abs_imbalance[t={t},w={wl}]"), re.abs_imbalance[r], m_primal, true);
            check(&|| format!("mu[t={t},w={wl}]"), rd.mu[r], m_dual, false);
            check(&|| format!("alpha_plus[t={t},w={wl}]"), rd.alpha_plus[r], m_dual, false);
            check(&|| format!("alpha_minus[t={t},w={wl}]"), rd.alpha_minus[r], m_dual, false);
            check(&|| format!("theta[t={t},w={wl}]"), rd.theta[r], m_dual, false);
            check(&|| format!("beta[t={t},w={wl}]"), rd.beta[r], m_dual, false);
        }
    }
    worst.map(|(_, variable, value, bound, primal)| BigMViolation {
        variable,
        value,
        bound,
        primal,
    })
}

/// Checks every bounded value of an equilibrium report against the big-M
/// bounds it was solved with.
pub fn validate_big_m(
    report: &SolveReport,
    m_primal: f64,
    m_dual: f64,
    margin: f64,
) -> std::result::Result<(), BigMViolation> {
    let zeros;
    let rd = match &report.retailer_duals {
        Some(rd) => rd,
        None => {
            zeros = RetailerDuals::zeros(report.dims());
            &zeros
        }
    };
    let parts = BoundedParts {
        prices: &report.prices,
        consumer: &report.consumer,
        consumer_duals: &report.consumer_duals,
        retailer: &report.retailer,
        retailer_duals: rd,
    };
    match worst_violation(&parts, m_primal, m_dual, margin, 0) {
        Some(v) => Err(v),
        None => Ok(()),
    }
}
