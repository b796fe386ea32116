//! Decision and dual types for both players, with the objective, accounting
//! and KKT residual evaluators every solver is checked against.
//!
//! # Sign convention
//!
//! Both problems are written as minimisations with every inequality moved to
//! the form `g(x) ≤ 0` and a nonnegative multiplier. For the retailer, with
//! `σ` the scenario probability and `P` the retail price,
//!
//! ```text
//! L = -σ(Σ_j P q_j - P^S q^S - C y) + μ (q^S + δ - Σ_j q_j)
//!     + α⁺ (δ - y) + α⁻ (-δ - y) - β y - θ q^S
//! ```
//!
//! so `μ` is the multiplier of `q^S + δ - Σ_j q_j = 0` and stationarity reads
//!
//! ```text
//! ∂q_j : σ P + μ = 0
//! ∂q^S : σ P^S + μ - θ = 0
//! ∂δ   : μ + α⁺ - α⁻ = 0
//! ∂y   : σ C - α⁺ - α⁻ - β = 0
//! ```
//!
//! For a consumer with consumption `s = q + Δ`,
//!
//! ```text
//! ∂q : P - A + B s - ε = 0
//! ∂Δ : -A + B s - ν_min + ν_max - λ - ε = 0
//! ```
//!
//! with `ε ⊥ s ≥ 0`, `ν_min ⊥ Δ + Δmax ≥ 0`, `ν_max ⊥ Δmax - Δ ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScenarioSet};

/// Tolerance used when checking primal feasibility of a decision.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub hours: usize,
    pub consumers: usize,
    pub scenarios: usize,
}

impl Dims {
    pub fn new(hours: usize, consumers: usize, scenarios: usize) -> Self {
        Dims {
            hours,
            consumers,
            scenarios,
        }
    }

    /// Flat index of a consumer quantity.
    #[inline]
    pub fn c(&self, j: usize, t: usize, w: usize) -> usize {
        (j * self.scenarios + w) * self.hours + t
    }

    /// Flat index of a retailer quantity.
    #[inline]
    pub fn r(&self, t: usize, w: usize) -> usize {
        w * self.hours + t
    }

    pub fn consumer_len(&self) -> usize {
        self.consumers * self.scenarios * self.hours
    }

    pub fn retailer_len(&self) -> usize {
        self.scenarios * self.hours
    }
}

/// Prices faced by consumers, possibly scenario-dependent.
pub trait PriceView {
    fn hours(&self) -> usize;
    fn price(&self, t: usize, w: usize) -> f64;
}

/// The retailer's first-stage hourly tariff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub p: Vec<f64>,
}

impl Tariff {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Infeasible("tariff entries must be finite and nonnegative".into()));
        }
        Ok(Tariff { p })
    }

    pub fn flat(hours: usize, price: f64) -> Self {
        Tariff {
            p: vec![price; hours],
        }
    }

    pub fn average(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.p.len() as f64
    }
}

impl PriceView for Tariff {
    fn hours(&self) -> usize {
        self.p.len()
    }
    fn price(&self, t: usize, _w: usize) -> f64 {
        self.p[t]
    }
}

/// One clearing price per hour and scenario, stored at `w * T + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPrices {
    pub hours: usize,
    pub scenarios: usize,
    pub p: Vec<f64>,
}

impl ScenarioPrices {
    pub fn zeros(hours: usize, scenarios: usize) -> Self {
        ScenarioPrices {
            hours,
            scenarios,
            p: vec![0.0; hours * scenarios],
        }
    }

    pub fn from_tariff(tariff: &Tariff, scenarios: usize) -> Self {
        let mut p = Vec::with_capacity(tariff.p.len() * scenarios);
        for _ in 0..scenarios {
            p.extend_from_slice(&tariff.p);
        }
        ScenarioPrices {
            hours: tariff.p.len(),
            scenarios,
            p,
        }
    }

    pub fn set(&mut self, t: usize, w: usize, v: f64) {
        self.p[w * self.hours + t] = v;
    }

    /// Probability-weighted hourly price.
    pub fn expected(&self, prob: &[f64]) -> Tariff {
        let p = (0..self.hours)
            .map(|t| {
                (0..self.scenarios)
                    .map(|w| prob[w] * self.p[w * self.hours + t])
                    .sum()
            })
            .collect();
        Tariff { p }
    }

    pub fn is_scenario_invariant(&self) -> bool {
        (1..self.scenarios).all(|w| {
            self.p[w * self.hours..(w + 1) * self.hours] == self.p[..self.hours]
        })
    }
}

impl PriceView for ScenarioPrices {
    fn hours(&self) -> usize {
        self.hours
    }
    fn price(&self, t: usize, w: usize) -> f64 {
        self.p[w * self.hours + t]
    }
}

/// Consumer purchases `q` and shifts, indexed by [`Dims::c`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerDecision {
    pub dims: Dims,
    pub q: Vec<f64>,
    pub shift: Vec<f64>,
}

impl ConsumerDecision {
    pub fn zeros(dims: Dims) -> Self {
        ConsumerDecision {
            dims,
            q: vec![0.0; dims.consumer_len()],
            shift: vec![0.0; dims.consumer_len()],
        }
    }
    pub fn q(&self, j: usize, t: usize, w: usize) -> f64 {
        self.q[self.dims.c(j, t, w)]
    }
    pub fn shift(&self, j: usize, t: usize, w: usize) -> f64 {
        self.shift[self.dims.c(j, t, w)]
    }
    pub fn consumption(&self, j: usize, t: usize, w: usize) -> f64 {
        let k = self.dims.c(j, t, w);
        self.q[k] + self.shift[k]
    }
    /// Σ_j q for one hour and scenario.
    pub fn aggregate(&self, t: usize, w: usize) -> f64 {
        (0..self.dims.consumers).map(|j| self.q(j, t, w)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerDuals {
    pub dims: Dims,
    pub eps: Vec<f64>,
    pub nu_min: Vec<f64>,
    pub nu_max: Vec<f64>,
    /// Indexed `j * Ω + w`.
    pub lambda: Vec<f64>,
}

impl ConsumerDuals {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.consumer_len();
        ConsumerDuals {
            dims,
            eps: vec![0.0; n],
            nu_min: vec![0.0; n],
            nu_max: vec![0.0; n],
            lambda: vec![0.0; dims.consumers * dims.scenarios],
        }
    }
    pub fn lambda(&self, j: usize, w: usize) -> f64 {
        self.lambda[j * self.dims.scenarios + w]
    }
}

/// Spot purchases, signed imbalance and its absolute value, indexed by [`Dims::r`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetailerDecision {
    pub dims: Dims,
    pub q_spot: Vec<f64>,
    pub imbalance: Vec<f64>,
    pub abs_imbalance: Vec<f64>,
}

impl RetailerDecision {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.retailer_len();
        RetailerDecision {
            dims,
            q_spot: vec![0.0; n],
            imbalance: vec![0.0; n],
            abs_imbalance: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetailerDuals {
    pub dims: Dims,
    pub mu: Vec<f64>,
    pub alpha_plus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    /// Multiplier of `P ≥ 0`. Stored only; the price is exogenous to both
    /// players so no stationarity condition involves it.
    pub gamma: Vec<f64>,
}

impl RetailerDuals {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.retailer_len();
        RetailerDuals {
            dims,
            mu: vec![0.0; n],
            alpha_plus: vec![0.0; n],
            alpha_minus: vec![0.0; n],
            theta: vec![0.0; n],
            beta: vec![0.0; n],
            gamma: vec![0.0; dims.hours],
        }
    }
}

/// Maximum absolute violations, grouped by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    /// Equality constraints: shift balance and energy balance.
    pub balance: f64,
    pub primal: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.balance)
            .max(self.primal)
            .max(self.dual_sign)
            .max(self.complementarity)
    }

    pub fn merge(&self, o: &KktResiduals) -> KktResiduals {
        KktResiduals {
            stationarity: self.stationarity.max(o.stationarity),
            balance: self.balance.max(o.balance),
            primal: self.primal.max(o.primal),
            dual_sign: self.dual_sign.max(o.dual_sign),
            complementarity: self.complementarity.max(o.complementarity),
        }
    }
}

fn upd(slot: &mut f64, v: f64) {
    let v = v.abs();
    if v > *slot || v.is_nan() {
        *slot = v;
    }
}

fn check_shape(s: &ScenarioSet, prices: &dyn PriceView, dims: &[Dims]) -> Result<()> {
    let d = s.dims();
    if prices.hours() != d.hours {
        return Err(Error::Shape(format!(
            "price vector has {} hours, scenario set has {}",
            prices.hours(),
            d.hours
        )));
    }
    if let Some(bad) = dims.iter().find(|x| **x != d) {
        return Err(Error::Shape(format!(
            "decision dims {bad:?} differ from scenario dims {d:?}"
        )));
    }
    Ok(())
}

/// Split of the expected retailer profit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown {
    pub revenue: f64,
    pub cost: f64,
    pub profit: f64,
}

/// Σ_ω σ_ω (Σ_{j,t} P q − Σ_t (P^S q^S + C y)).
pub fn retailer_expected_profit(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    rdec: &RetailerDecision,
) -> Result<f64> {
    Ok(retailer_profit_breakdown(s, prices, cdec, rdec)?.profit)
}

pub fn retailer_profit_breakdown(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    rdec: &RetailerDecision,
) -> Result<ProfitBreakdown> {
    check_shape(s, prices, &[cdec.dims, rdec.dims])?;
    let d = s.dims();
    let c = s.penalty_c();
    let (mut revenue, mut cost) = (0.0, 0.0);
    for w in 0..d.scenarios {
        let (mut rev_w, mut cost_w) = (0.0, 0.0);
        for t in 0..d.hours {
            rev_w += prices.price(t, w) * cdec.aggregate(t, w);
            let k = d.r(t, w);
            cost_w += s.spot(t, w) * rdec.q_spot[k] + c * rdec.abs_imbalance[k];
        }
        revenue += s.prob(w) * rev_w;
        cost += s.prob(w) * cost_w;
    }
    Ok(ProfitBreakdown {
        revenue,
        cost,
        profit: revenue - cost,
    })
}

/// Value of a consumer's objective for one scenario, split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumerObjective {
    /// Expenditure minus utility.
    pub objective: f64,
    pub utility: f64,
    pub cost: f64,
}

/// Σ_t (P q − A s + ½ B s²) for consumer `j` in scenario `w`.
pub fn consumer_objective(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    j: usize,
    w: usize,
) -> Result<ConsumerObjective> {
    check_shape(s, prices, &[cdec.dims])?;
    let dmax = s.delta_max(j);
    let mut sum_shift = 0.0;
    let (mut utility, mut cost) = (0.0, 0.0);
    for t in 0..s.hours() {
        let (q, d) = (cdec.q(j, t, w), cdec.shift(j, t, w));
        let x = q + d;
        if x < -FEAS_TOL {
            return Err(Error::Infeasible(format!(
                "consumer {} scenario {} hour {}: q + shift = {x} < 0",
                j + 1,
                w + 1,
                t + 1
            )));
        }
        if d.abs() > dmax + FEAS_TOL {
            return Err(Error::Infeasible(format!(
                "consumer {} scenario {} hour {}: |shift| = {} exceeds {dmax}",
                j + 1,
                w + 1,
                t + 1,
                d.abs()
            )));
        }
        sum_shift += d;
        utility += s.a(j, t, w) * x - 0.5 * s.b(j, t, w) * x * x;
        cost += prices.price(t, w) * q;
    }
    if sum_shift.abs() > FEAS_TOL {
        return Err(Error::Infeasible(format!(
            "consumer {} scenario {}: shifts sum to {sum_shift}",
            j + 1,
            w + 1
        )));
    }
    Ok(ConsumerObjective {
        objective: cost - utility,
        utility,
        cost,
    })
}

/// KKT residuals of consumer `j` in scenario `w`.
pub fn consumer_kkt_residuals(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    cduals: &ConsumerDuals,
    j: usize,
    w: usize,
) -> KktResiduals {
    consumer_kkt_residuals_signed(s, prices, cdec, cduals, j, w, 1.0)
}

/// Same as [`consumer_kkt_residuals`] with the price term of the purchase
/// stationarity multiplied by `price_sign`. Only used for mutation checks.
#[doc(hidden)]
pub fn consumer_kkt_residuals_signed(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    cduals: &ConsumerDuals,
    j: usize,
    w: usize,
    price_sign: f64,
) -> KktResiduals {
    let mut r = KktResiduals::default();
    let d = cdec.dims;
    let dmax = s.delta_max(j);
    let lambda = cduals.lambda(j, w);
    let mut sum_shift = 0.0;
    for t in 0..d.hours {
        let k = d.c(j, t, w);
        let (q, sh) = (cdec.q[k], cdec.shift[k]);
        let x = q + sh;
        let (a, b, p) = (s.a(j, t, w), s.b(j, t, w), prices.price(t, w));
        let (eps, nmin, nmax) = (cduals.eps[k], cduals.nu_min[k], cduals.nu_max[k]);

        upd(&mut r.stationarity, price_sign * p - a + b * x - eps);
        upd(&mut r.stationarity, -a + b * x - nmin + nmax - lambda - eps);
        sum_shift += sh;

        let lo = sh + dmax;
        let hi = dmax - sh;
        upd(&mut r.primal, (-x).max(0.0));
        upd(&mut r.primal, (-lo).max(0.0));
        upd(&mut r.primal, (-hi).max(0.0));
        upd(&mut r.dual_sign, (-eps).max(0.0));
        upd(&mut r.dual_sign, (-nmin).max(0.0));
        upd(&mut r.dual_sign, (-nmax).max(0.0));
        upd(&mut r.complementarity, x * eps);
        upd(&mut r.complementarity, lo * nmin);
        upd(&mut r.complementarity, hi * nmax);
    }
    upd(&mut r.balance, sum_shift);
    r
}

/// KKT residuals of the retailer problem under the convention in the module
/// documentation.
pub fn retailer_kkt_residuals(
    s: &ScenarioSet,
    prices: &dyn PriceView,
    cdec: &ConsumerDecision,
    rdec: &RetailerDecision,
    rduals: &RetailerDuals,
) -> KktResiduals {
    let mut r = KktResiduals::default();
    let d = s.dims();
    let c = s.penalty_c();
    for w in 0..d.scenarios {
        let sigma = s.prob(w);
        for t in 0..d.hours {
            let k = d.r(t, w);
            let p = prices.price(t, w);
            let (qs, del, y) = (rdec.q_spot[k], rdec.imbalance[k], rdec.abs_imbalance[k]);
            let (mu, ap, am) = (rduals.mu[k], rduals.alpha_plus[k], rduals.alpha_minus[k]);
            let (th, be) = (rduals.theta[k], rduals.beta[k]);

            upd(&mut r.stationarity, sigma * p + mu);
            upd(&mut r.stationarity, sigma * s.spot(t, w) + mu - th);
            upd(&mut r.stationarity, mu + ap - am);
            upd(&mut r.stationarity, sigma * c - ap - am - be);
            upd(&mut r.balance, cdec.aggregate(t, w) - qs - del);

            let (gp, gm) = (y - del, y + del);
            for v in [gp, gm, qs, y, p] {
                upd(&mut r.primal, (-v).max(0.0));
            }
            for v in [ap, am, th, be] {
                upd(&mut r.dual_sign, (-v).max(0.0));
            }
            upd(&mut r.complementarity, gp * ap);
            upd(&mut r.complementarity, gm * am);
            upd(&mut r.complementarity, qs * th);
            upd(&mut r.complementarity, y * be);
        }
    }
    for &g in &rduals.gamma {
        upd(&mut r.dual_sign, (-g).max(0.0));
    }
    r
}

/// Primal feasibility of a retailer decision: nonnegative purchases, energy
/// balance and `y ≥ |δ|`.
pub fn retailer_primal_residuals(
    s: &ScenarioSet,
    cdec: &ConsumerDecision,
    rdec: &RetailerDecision,
) -> KktResiduals {
    let mut r = KktResiduals::default();
    let d = s.dims();
    for w in 0..d.scenarios {
        for t in 0..d.hours {
            let k = d.r(t, w);
            let (qs, del, y) = (rdec.q_spot[k], rdec.imbalance[k], rdec.abs_imbalance[k]);
            upd(&mut r.balance, cdec.aggregate(t, w) - qs - del);
            for v in [qs, y - del, y + del, y] {
                upd(&mut r.primal, (-v).max(0.0));
            }
        }
    }
    r
}

/// Diagnostics attached to every report. Wall time is deliberately absent so
/// serialised reports are reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub solver: String,
    pub iterations: u64,
    pub seed: Option<u64>,
    /// Best profit reached from each start, in start order.
    pub start_profits: Vec<f64>,
    pub nodes: u64,
    pub m_primal: Option<f64>,
    pub m_dual: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Reported hourly tariff. For scenario-wise clearing this is the
    /// expected clearing price.
    pub tariff: Tariff,
    /// Prices consumers actually face.
    pub prices: ScenarioPrices,
    pub consumer: ConsumerDecision,
    pub consumer_duals: ConsumerDuals,
    pub retailer: RetailerDecision,
    pub retailer_duals: Option<RetailerDuals>,
    pub expected_profit: f64,
    pub revenue: f64,
    pub cost: f64,
    pub consumer_cost: Vec<f64>,
    pub utility: Vec<f64>,
    pub welfare: Vec<f64>,
    pub consumer_residuals: KktResiduals,
    pub retailer_residuals: KktResiduals,
    pub meta: SolveMeta,
}

impl SolveReport {
    /// Computes all metrics and residuals from the decisions.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        s: &ScenarioSet,
        tariff: Tariff,
        prices: ScenarioPrices,
        consumer: ConsumerDecision,
        consumer_duals: ConsumerDuals,
        retailer: RetailerDecision,
        retailer_duals: Option<RetailerDuals>,
        meta: SolveMeta,
    ) -> Result<SolveReport> {
        let d = s.dims();
        let pb = retailer_profit_breakdown(s, &prices, &consumer, &retailer)?;
        let mut consumer_cost = vec![0.0; d.consumers];
        let mut utility = vec![0.0; d.consumers];
        let mut cres = KktResiduals::default();
        for j in 0..d.consumers {
            for w in 0..d.scenarios {
                let o = consumer_objective(s, &prices, &consumer, j, w)?;
                consumer_cost[j] += s.prob(w) * o.cost;
                utility[j] += s.prob(w) * o.utility;
                cres = cres.merge(&consumer_kkt_residuals(
                    s,
                    &prices,
                    &consumer,
                    &consumer_duals,
                    j,
                    w,
                ));
            }
        }
        let welfare = utility
            .iter()
            .zip(&consumer_cost)
            .map(|(u, c)| u - c)
            .collect();
        let rres = match &retailer_duals {
            Some(rd) => retailer_kkt_residuals(s, &prices, &consumer, &retailer, rd),
            None => retailer_primal_residuals(s, &consumer, &retailer),
        };
        Ok(SolveReport {
            tariff,
            prices,
            consumer,
            consumer_duals,
            retailer,
            retailer_duals,
            expected_profit: pb.profit,
            revenue: pb.revenue,
            cost: pb.cost,
            consumer_cost,
            utility,
            welfare,
            consumer_residuals: cres,
            retailer_residuals: rres,
            meta,
        })
    }

    pub fn dims(&self) -> Dims {
        self.consumer.dims
    }

    pub fn max_residual(&self) -> f64 {
        self.consumer_residuals.max().max(self.retailer_residuals.max())
    }

    pub fn total_welfare(&self) -> f64 {
        self.welfare.iter().sum()
    }

    pub fn average_tariff(&self) -> f64 {
        self.tariff.average()
    }

    /// Largest `|y - |δ||` over all hours and scenarios.
    pub fn abs_imbalance_gap(&self) -> f64 {
        self.retailer
            .abs_imbalance
            .iter()
            .zip(&self.retailer.imbalance)
            .map(|(y, d)| (y - d.abs()).abs())
            .fold(0.0, f64::max)
    }

    /// Expected spot purchase per hour.
    pub fn expected_q_spot(&self, prob: &[f64]) -> Vec<f64> {
        let d = self.dims();
        (0..d.hours)
            .map(|t| (0..d.scenarios).map(|w| prob[w] * self.retailer.q_spot[d.r(t, w)]).sum())
            .collect()
    }

    /// Expected aggregate consumer purchase per hour.
    pub fn expected_purchase(&self, prob: &[f64]) -> Vec<f64> {
        let d = self.dims();
        (0..d.hours)
            .map(|t| (0..d.scenarios).map(|w| prob[w] * self.consumer.aggregate(t, w)).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(ps: f64, a: f64, b: f64, dmax: f64) -> ScenarioSet {
        ScenarioSet::deterministic(&[ps], &[vec![a]], &[vec![b]], vec![dmax], 500.0).unwrap()
    }

    fn single(q: f64, sh: f64) -> ConsumerDecision {
        let mut c = ConsumerDecision::zeros(Dims::new(1, 1, 1));
        c.q[0] = q;
        c.shift[0] = sh;
        c
    }

    fn retail(qs: f64, del: f64, y: f64) -> RetailerDecision {
        let mut r = RetailerDecision::zeros(Dims::new(1, 1, 1));
        r.q_spot[0] = qs;
        r.imbalance[0] = del;
        r.abs_imbalance[0] = y;
        r
    }

    #[test]
    fn empty_market_profit_is_zero() {
        let s = toy(0.02, 0.03, 0.0015, 1.0);
        let d = s.dims();
        let p = retailer_expected_profit(
            &s,
            &Tariff::flat(1, 0.025),
            &ConsumerDecision::zeros(d),
            &RetailerDecision::zeros(d),
        )
        .unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn markup_profit_by_hand() {
        let s = toy(0.02, 0.03, 0.0015, 0.0);
        let tariff = Tariff::flat(1, 0.025);
        let q = 3.333;
        let p = retailer_expected_profit(&s, &tariff, &single(q, 0.0), &retail(q, 0.0, 0.0)).unwrap();
        assert!((p - 0.005 * q).abs() < 1e-15);
        assert!((p - 0.016665).abs() < 1e-12);
        let p = retailer_expected_profit(&s, &tariff, &single(q, 0.0), &retail(0.0, q, q)).unwrap();
        assert!((p - (0.025 * q - 500.0 * q)).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = toy(0.02, 0.03, 0.0015, 0.0);
        let r = retailer_expected_profit(
            &s,
            &Tariff::flat(2, 0.02),
            &single(0.0, 0.0),
            &retail(0.0, 0.0, 0.0),
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn consumer_objective_by_hand() {
        let s = toy(0.02, 0.03, 0.0015, 0.0);
        let tariff = Tariff::flat(1, 0.02);
        let o = consumer_objective(&s, &tariff, &single(0.0, 0.0), 0, 0).unwrap();
        assert_eq!(o.objective, 0.0);
        let q = 6.667;
        let o = consumer_objective(&s, &tariff, &single(q, 0.0), 0, 0).unwrap();
        let hand = 0.02 * q - 0.03 * q + 0.5 * 0.0015 * q * q;
        assert!((o.objective - hand).abs() < 1e-15);
        assert!((o.objective + 0.03334).abs() < 1e-5);
        assert!((o.utility - o.cost + o.objective).abs() < 1e-15);
    }

    #[test]
    fn doubling_b_adds_half_b_s_squared() {
        let s1 = toy(0.02, 0.03, 0.0015, 1.0);
        let s2 = toy(0.02, 0.03, 0.003, 1.0);
        let tariff = Tariff::flat(1, 0.02);
        let c = single(4.0, 0.0);
        let o1 = consumer_objective(&s1, &tariff, &c, 0, 0).unwrap().objective;
        let o2 = consumer_objective(&s2, &tariff, &c, 0, 0).unwrap().objective;
        assert!((o2 - o1 - 0.5 * 0.0015 * 16.0).abs() < 1e-15);
    }

    #[test]
    fn infeasible_consumer_decisions_name_the_constraint() {
        let s = toy(0.02, 0.03, 0.0015, 1.0);
        let tariff = Tariff::flat(1, 0.02);
        let e = consumer_objective(&s, &tariff, &single(-2.0, 1.0), 0, 0).unwrap_err();
        assert!(e.to_string().contains("q + shift"), "{e}");
        let e = consumer_objective(&s, &tariff, &single(3.0, 2.0), 0, 0).unwrap_err();
        assert!(e.to_string().contains("|shift|"), "{e}");
        let e = consumer_objective(&s, &tariff, &single(3.0, 0.5), 0, 0).unwrap_err();
        assert!(e.to_string().contains("sum"), "{e}");
    }

    #[test]
    fn nonzero_eps_at_interior_point_is_flagged() {
        let s = toy(0.02, 0.03, 0.0015, 1.0);
        let tariff = Tariff::flat(1, 0.02);
        let x = 2.0;
        let c = single(x, 0.0);
        let mut du = ConsumerDuals::zeros(c.dims);
        du.eps[0] = 0.02 - 0.03 + 0.0015 * x;
        // make both stationarity rows hold so only the product remains
        du.lambda[0] = -0.02;
        let r = consumer_kkt_residuals(&s, &tariff, &c, &du, 0, 0);
        assert!(r.stationarity < 1e-15);
        assert!(r.complementarity > 0.0);
        assert!((r.complementarity - x * du.eps[0].abs()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_box_products_vanish() {
        let s = toy(0.02, 0.03, 0.0015, 0.0);
        let tariff = Tariff::flat(1, 0.02);
        let x = (0.03 - 0.02) / 0.0015;
        let c = single(x, 0.0);
        let mut du = ConsumerDuals::zeros(c.dims);
        du.nu_min[0] = 0.7;
        du.nu_max[0] = 0.7;
        du.lambda[0] = -0.02;
        let r = consumer_kkt_residuals(&s, &tariff, &c, &du, 0, 0);
        assert!(r.max() < 1e-15, "{r:?}");
    }

    #[test]
    fn competitive_point_satisfies_retailer_kkt() {
        let (ps, a, b) = (0.02, 0.03, 0.0015);
        let s = toy(ps, a, b, 1.0);
        let tariff = Tariff::flat(1, ps);
        let q = (a - ps) / b;
        let c = single(q, 0.0);
        let r = retail(q, 0.0, 0.0);
        let mut du = RetailerDuals::zeros(r.dims);
        du.mu[0] = -ps;
        du.alpha_plus[0] = ps;
        du.beta[0] = 500.0 - ps;
        let res = retailer_kkt_residuals(&s, &tariff, &c, &r, &du);
        assert!(res.max() < 1e-9, "{res:?}");

        let mut bad = du.clone();
        bad.theta[0] = 0.01;
        let res = retailer_kkt_residuals(&s, &tariff, &c, &r, &bad);
        assert!(res.complementarity > 0.01 * q * 0.99);
    }

    #[test]
    fn null_market_with_zero_prices() {
        let s = toy(0.0, 0.03, 0.0015, 1.0);
        let d = s.dims();
        let mut du = RetailerDuals::zeros(d);
        du.beta[0] = 500.0;
        let res = retailer_kkt_residuals(
            &s,
            &Tariff::flat(1, 0.0),
            &ConsumerDecision::zeros(d),
            &RetailerDecision::zeros(d),
            &du,
        );
        assert_eq!(res.max(), 0.0);
    }
}
