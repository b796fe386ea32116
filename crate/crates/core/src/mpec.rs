//! Retailer-led Stackelberg pricing: choose the hourly tariff maximising
//! expected profit given exact consumer best responses and cost-minimal
//! spot procurement.
//!
//! The profit surface is piecewise quadratic with kinks where a consumer's
//! demand hits zero, where net demand changes sign, and where the price order
//! of two hours flips (which moves the shifts). The search combines a
//! multistart pattern search with a start built from that structure: once the
//! shift role of each hour is fixed, profit separates by hour, so the best
//! tariff for a given separating price level is found by a small dynamic
//! program over roles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consumer::{respond_all, shift_pattern};
use crate::model::{
    ConsumerDecision, RetailerDecision, ScenarioPrices, SolveMeta, SolveReport, Tariff,
};
use crate::{Error, Result, ScenarioSet};

/// Largest horizon accepted by [`grid_search_oracle`].
pub const GRID_MAX_HOURS: usize = 2;

/// Separation kept between prices of hours with different shift roles in the
/// structured start; the strict order is what makes consumers shift.
const ROLE_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpecConfig {
    pub multistart_count: usize,
    /// Initial pattern step as a fraction of `p_max`.
    pub initial_step: f64,
    pub shrink: f64,
    pub min_step: f64,
    pub max_evals_per_start: usize,
    /// Upper end of the search box; defaults to twice the largest mean spot price.
    pub p_max: Option<f64>,
    /// Smallest profit gain accepted as an improvement.
    pub tolerance: f64,
    pub seed: u64,
    /// Use the role-decomposition start as start 0.
    pub structured_start: bool,
    /// Extra uniform levels scanned by the structured start.
    pub level_grid: usize,
}

impl Default for MpecConfig {
    fn default() -> Self {
        MpecConfig {
            multistart_count: 8,
            initial_step: 0.05,
            shrink: 0.5,
            min_step: 1e-9,
            max_evals_per_start: 400_000,
            p_max: None,
            tolerance: 1e-13,
            seed: 0,
            structured_start: true,
            level_grid: 512,
        }
    }
}

impl MpecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mpec: {m}")));
        if self.multistart_count == 0 {
            return bad("multistart_count must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return bad("initial_step must lie in (0, 1]");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.min_step > 0.0) {
            return bad("min_step must be positive");
        }
        if let Some(p) = self.p_max {
            if !(p > 0.0 && p.is_finite()) {
                return bad("p_max must be positive");
            }
        }
        Ok(())
    }

    pub fn p_max_for(&self, s: &ScenarioSet) -> f64 {
        self.p_max.unwrap_or_else(|| {
            let m = s.spot_mean().iter().copied().fold(0.0, f64::max);
            if m > 0.0 {
                2.0 * m
            } else {
                // all spot prices zero: fall back to the largest intercept
                (0..s.consumers())
                    .flat_map(|j| (0..s.scenarios()).flat_map(move |w| (0..s.hours()).map(move |t| (j, t, w))))
                    .map(|(j, t, w)| s.a(j, t, w))
                    .fold(1e-6, f64::max)
            }
        })
    }
}

/// Cost-minimal procurement of a net demand `d`: returns `(q_spot, δ, y)`.
pub fn optimal_dispatch(d: f64, spot: f64, penalty_c: f64) -> (f64, f64, f64) {
    if d >= 0.0 {
        if spot <= penalty_c {
            (d, 0.0, 0.0)
        } else {
            (0.0, d, d)
        }
    } else {
        (0.0, d, -d)
    }
}

#[inline]
fn dispatch_cost(d: f64, spot: f64, penalty_c: f64) -> f64 {
    if d >= 0.0 {
        spot.min(penalty_c) * d
    } else {
        -penalty_c * d
    }
}

/// Optimal dispatch for every hour and scenario of a consumer decision.
pub fn dispatch_all(s: &ScenarioSet, cdec: &ConsumerDecision) -> RetailerDecision {
    let d = s.dims();
    let mut r = RetailerDecision::zeros(d);
    for w in 0..d.scenarios {
        for t in 0..d.hours {
            let k = d.r(t, w);
            let (qs, del, y) = optimal_dispatch(cdec.aggregate(t, w), s.spot(t, w), s.penalty_c());
            r.q_spot[k] = qs;
            r.imbalance[k] = del;
            r.abs_imbalance[k] = y;
        }
    }
    r
}

/// Allocation-light expected-profit evaluator for a fixed scenario set.
#[derive(Debug, Clone)]
pub struct ProfitEvaluator {
    hours: usize,
    consumers: usize,
    scenarios: usize,
    prob: Vec<f64>,
    /// `(t, w)` → spot, at `w * T + t`.
    spot: Vec<f64>,
    /// `(t, w, j)` contiguous in `j`, at `(w * T + t) * J + j`.
    a: Vec<f64>,
    inv_b: Vec<f64>,
    delta_total: f64,
    penalty_c: f64,
}

impl ProfitEvaluator {
    pub fn new(s: &ScenarioSet) -> Self {
        let d = s.dims();
        let mut a = vec![0.0; d.hours * d.scenarios * d.consumers];
        let mut inv_b = a.clone();
        for w in 0..d.scenarios {
            for t in 0..d.hours {
                for j in 0..d.consumers {
                    let k = (w * d.hours + t) * d.consumers + j;
                    a[k] = s.a(j, t, w);
                    inv_b[k] = 1.0 / s.b(j, t, w);
                }
            }
        }
        ProfitEvaluator {
            hours: d.hours,
            consumers: d.consumers,
            scenarios: d.scenarios,
            prob: s.probs().to_vec(),
            spot: (0..d.scenarios)
                .flat_map(|w| s.spot_slice(w).to_vec())
                .collect(),
            a,
            inv_b,
            delta_total: s.delta_maxes().iter().sum(),
            penalty_c: s.penalty_c(),
        }
    }

    #[inline]
    fn gross_demand(&self, t: usize, w: usize, p: f64) -> f64 {
        let base = (w * self.hours + t) * self.consumers;
        let mut d = 0.0;
        for j in 0..self.consumers {
            let x = (self.a[base + j] - p) * self.inv_b[base + j];
            if x > 0.0 {
                d += x;
            }
        }
        d
    }

    /// Expected profit contribution of hour `t` priced at `p` with shift role `u`.
    pub fn hour_profit(&self, t: usize, p: f64, u: f64) -> f64 {
        let shift = self.delta_total * u;
        let mut total = 0.0;
        for w in 0..self.scenarios {
            let d = self.gross_demand(t, w, p) - shift;
            total += self.prob[w] * (p * d - dispatch_cost(d, self.spot[w * self.hours + t], self.penalty_c));
        }
        total
    }

    /// Expected retailer profit of a tariff.
    pub fn profit(&self, p: &[f64]) -> f64 {
        let u = shift_pattern(p);
        self.profit_with_roles(p, &u)
    }

    /// Same sum order as [`crate::model::retailer_expected_profit`]: scenario
    /// outer, hour inner.
    fn profit_with_roles(&self, p: &[f64], u: &[f64]) -> f64 {
        let mut total = 0.0;
        for w in 0..self.scenarios {
            let mut acc = 0.0;
            for t in 0..self.hours {
                let d = self.gross_demand(t, w, p[t]) - self.delta_total * u[t];
                acc += p[t] * d - dispatch_cost(d, self.spot[w * self.hours + t], self.penalty_c);
            }
            total += self.prob[w] * acc;
        }
        total
    }
}

/// Tariff evaluation: composes best responses and dispatch into a full report.
pub fn evaluate_tariff(s: &ScenarioSet, p: &Tariff) -> Result<(f64, SolveReport)> {
    if p.p.len() != s.hours() {
        return Err(Error::Shape(format!(
            "tariff has {} hours, scenario set has {}",
            p.p.len(),
            s.hours()
        )));
    }
    if p.p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Infeasible("tariff entries must be finite and nonnegative".into()));
    }
    let prices = ScenarioPrices::from_tariff(p, s.scenarios());
    let (cdec, cduals) = respond_all(s, p);
    let rdec = dispatch_all(s, &cdec);
    let meta = SolveMeta {
        solver: "evaluate".into(),
        ..SolveMeta::default()
    };
    let rep = SolveReport::assemble(s, p.clone(), prices, cdec, cduals, rdec, None, meta)?;
    Ok((rep.expected_profit, rep))
}

struct SearchOutcome {
    p: Vec<f64>,
    profit: f64,
    evals: u64,
}

fn clamp(v: f64, hi: f64) -> f64 {
    v.max(0.0).min(hi)
}

/// Opportunistic coordinate search with rigid moves of near-tied groups.
fn pattern_search(ev: &ProfitEvaluator, start: Vec<f64>, cfg: &MpecConfig, p_max: f64) -> SearchOutcome {
    let n = start.len();
    let mut p: Vec<f64> = start.into_iter().map(|v| clamp(v, p_max)).collect();
    let mut f = ev.profit(&p);
    let mut evals = 1u64;
    let mut h = cfg.initial_step * p_max;
    let max_evals = cfg.max_evals_per_start as u64;
    let mut trial = p.clone();
    while h >= cfg.min_step && evals < max_evals {
        let mut improved = false;
        for t in 0..n {
            for dir in [1.0, -1.0] {
                let v = clamp(p[t] + dir * h, p_max);
                if v == p[t] {
                    continue;
                }
                trial.copy_from_slice(&p);
                trial[t] = v;
                let g = ev.profit(&trial);
                evals += 1;
                if g > f + cfg.tolerance {
                    p[t] = v;
                    f = g;
                    improved = true;
                    break;
                }
            }
        }
        // groups of hours priced within a hair of each other move together
        for group in near_tied_groups(&p, 1e-6) {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&p);
                for &t in &group {
                    trial[t] = clamp(p[t] + dir * h, p_max);
                }
                if trial == p {
                    continue;
                }
                let g = ev.profit(&trial);
                evals += 1;
                if g > f + cfg.tolerance {
                    p.copy_from_slice(&trial);
                    f = g;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= cfg.shrink;
        }
    }
    SearchOutcome { p, profit: f, evals }
}

fn near_tied_groups(p: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&x, &y| p[x].total_cmp(&p[y]).then(x.cmp(&y)));
    let mut groups = Vec::new();
    let mut cur = Vec::new();
    for (k, &t) in idx.iter().enumerate() {
        if k > 0 && p[t] - p[idx[k - 1]] > gap {
            if cur.len() > 1 {
                groups.push(std::mem::take(&mut cur));
            }
            cur.clear();
        }
        cur.push(t);
    }
    if cur.len() > 1 {
        groups.push(cur);
    }
    groups
}

/// Candidate maximisers of one hour's profit for a fixed role, sorted by
/// price, with running maxima for range queries.
struct HourCandidates {
    p: Vec<f64>,
    prefix_best: Vec<(f64, f64)>,
    suffix_best: Vec<(f64, f64)>,
}

impl HourCandidates {
    fn build(ev: &ProfitEvaluator, t: usize, u: f64, p_max: f64) -> Self {
        let mut bp = vec![0.0, p_max];
        for w in 0..ev.scenarios {
            let base = (w * ev.hours + t) * ev.consumers;
            for j in 0..ev.consumers {
                let a = ev.a[base + j];
                if a > 0.0 && a < p_max {
                    bp.push(a);
                }
            }
            // net demand changes sign where gross demand equals the shift
            let shift = ev.delta_total * u;
            if shift > 0.0 && ev.gross_demand(t, w, 0.0) > shift {
                let (mut lo, mut hi) = (0.0, p_max);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if ev.gross_demand(t, w, mid) > shift {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                bp.push(lo);
                bp.push(hi);
            }
        }
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let mut cand = bp.clone();
        for win in bp.windows(2) {
            let (x0, x1) = (win[0], win[1]);
            if x1 - x0 < 1e-15 {
                continue;
            }
            let xm = 0.5 * (x0 + x1);
            let (f0, fm, f1) = (
                ev.hour_profit(t, x0, u),
                ev.hour_profit(t, xm, u),
                ev.hour_profit(t, x1, u),
            );
            let d2 = f0 - 2.0 * fm + f1;
            if d2 < 0.0 {
                let tau = -(f1 - f0) / (2.0 * d2);
                if tau.abs() < 1.0 {
                    cand.push(xm + tau * 0.5 * (x1 - x0));
                }
            }
        }
        cand.sort_by(f64::total_cmp);
        cand.dedup();
        let vals: Vec<f64> = cand.iter().map(|&x| ev.hour_profit(t, x, u)).collect();
        let mut prefix_best = Vec::with_capacity(cand.len());
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (k, &v) in vals.iter().enumerate() {
            if v > best.0 {
                best = (v, cand[k]);
            }
            prefix_best.push(best);
        }
        let mut suffix_best = vec![(f64::NEG_INFINITY, 0.0); cand.len()];
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in (0..cand.len()).rev() {
            if vals[k] >= best.0 {
                best = (vals[k], cand[k]);
            }
            suffix_best[k] = best;
        }
        HourCandidates {
            p: cand,
            prefix_best,
            suffix_best,
        }
    }

    /// Best `(value, price)` over candidates with price ≥ x.
    fn best_at_or_above(&self, x: f64) -> (f64, f64) {
        let k = self.p.partition_point(|&v| v < x);
        self.suffix_best.get(k).copied().unwrap_or((f64::NEG_INFINITY, x))
    }

    /// Best `(value, price)` over candidates with price ≤ x.
    fn best_at_or_below(&self, x: f64) -> (f64, f64) {
        let k = self.p.partition_point(|&v| v <= x);
        if k == 0 {
            (f64::NEG_INFINITY, x)
        } else {
            self.prefix_best[k - 1]
        }
    }
}

struct RolePlanner<'a> {
    ev: &'a ProfitEvaluator,
    p_max: f64,
    up: Vec<HourCandidates>,
    down: Vec<HourCandidates>,
    flat: Vec<HourCandidates>,
}

impl<'a> RolePlanner<'a> {
    fn new(ev: &'a ProfitEvaluator, p_max: f64) -> Self {
        let build = |u: f64| (0..ev.hours).map(|t| HourCandidates::build(ev, t, u, p_max)).collect();
        RolePlanner {
            ev,
            p_max,
            up: build(1.0),
            down: build(-1.0),
            flat: build(0.0),
        }
    }

    fn levels(&self, grid: usize) -> Vec<f64> {
        let mut lv: Vec<f64> = self
            .up
            .iter()
            .chain(&self.down)
            .chain(&self.flat)
            .flat_map(|h| h.p.iter().copied())
            .collect();
        lv.extend((0..=grid).map(|k| self.p_max * k as f64 / grid.max(1) as f64));
        lv.sort_by(f64::total_cmp);
        lv.dedup();
        lv
    }

    /// Best tariff whose shift roles are separated at `level`: value and prices.
    fn plan(&self, level: f64) -> (f64, Vec<f64>) {
        let n = self.ev.hours;
        let hi_x = level + ROLE_GAP;
        let lo_x = level - ROLE_GAP;
        // role options per hour: (delta of #up - #down, value, price)
        let mut opts: Vec<[(i32, f64, f64); 3]> = Vec::with_capacity(n);
        for t in 0..n {
            let up = if hi_x <= self.p_max {
                let (v, x) = self.up[t].best_at_or_above(hi_x);
                let edge = self.ev.hour_profit(t, hi_x, 1.0);
                if edge >= v {
                    (edge, hi_x)
                } else {
                    (v, x)
                }
            } else {
                (f64::NEG_INFINITY, hi_x)
            };
            let down = if lo_x >= 0.0 {
                let (v, x) = self.down[t].best_at_or_below(lo_x);
                let edge = self.ev.hour_profit(t, lo_x, -1.0);
                if edge >= v {
                    (edge, lo_x)
                } else {
                    (v, x)
                }
            } else {
                (f64::NEG_INFINITY, lo_x)
            };
            let flat = (self.ev.hour_profit(t, level, 0.0), level);
            opts.push([(1, up.0, up.1), (-1, down.0, down.1), (0, flat.0, flat.1)]);
        }
        // dynamic program over the running balance of up and down hours
        let width = 2 * n + 1;
        let off = n as i32;
        let mut val = vec![f64::NEG_INFINITY; width];
        val[n] = 0.0;
        let mut back = vec![0u8; n * width];
        for t in 0..n {
            let mut next = vec![f64::NEG_INFINITY; width];
            for (si, &v) in val.iter().enumerate() {
                if v == f64::NEG_INFINITY {
                    continue;
                }
                for (k, &(dlt, ov, _)) in opts[t].iter().enumerate() {
                    if ov == f64::NEG_INFINITY {
                        continue;
                    }
                    let ni = si as i32 + dlt;
                    if ni < 0 || ni >= width as i32 {
                        continue;
                    }
                    let ni = ni as usize;
                    let cand = v + ov;
                    if cand > next[ni] {
                        next[ni] = cand;
                        back[t * width + ni] = k as u8;
                    }
                }
            }
            val = next;
        }
        let best = val[off as usize];
        if best == f64::NEG_INFINITY {
            return (best, vec![level; n]);
        }
        let mut p = vec![0.0; n];
        let mut si = off;
        for t in (0..n).rev() {
            let k = back[t * width + si as usize] as usize;
            let (dlt, _, x) = opts[t][k];
            p[t] = x;
            si -= dlt;
        }
        (best, p)
    }

    fn best_tariff(&self, grid: usize) -> Vec<f64> {
        let levels = self.levels(grid);
        let vals: Vec<f64> = levels.iter().map(|&l| self.plan(l).0).collect();
        let mut order: Vec<usize> = (0..levels.len()).collect();
        order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));
        let mut best = (f64::NEG_INFINITY, vec![0.0; self.ev.hours]);
        for &k in order.iter().take(4) {
            let lo = if k > 0 { levels[k - 1] } else { levels[k] };
            let hi = levels.get(k + 1).copied().unwrap_or(levels[k]);
            let l = golden_max(|x| self.plan(x).0, lo, hi, levels[k], 60);
            for cand in [levels[k], l] {
                let (v, p) = self.plan(cand);
                if v > best.0 {
                    best = (v, p);
                }
            }
        }
        best.1
    }
}

/// Golden-section maximisation on `[lo, hi]`, never returning worse than `seed`.
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, seed: f64, iters: usize) -> f64 {
    if hi - lo <= 0.0 {
        return seed;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = if fc >= fd { c } else { d };
    if f(x) >= f(seed) {
        x
    } else {
        seed
    }
}

fn start_point(i: usize, s: &ScenarioSet, cfg: &MpecConfig, p_max: f64, ev: &ProfitEvaluator) -> Vec<f64> {
    let d = s.dims();
    let k = if cfg.structured_start { i } else { i + 1 };
    match k {
        0 => RolePlanner::new(ev, p_max).best_tariff(cfg.level_grid),
        1 => (0..d.hours)
            .map(|t| {
                let mut am = 0.0;
                for j in 0..d.consumers {
                    for w in 0..d.scenarios {
                        am += s.prob(w) * s.a(j, t, w);
                    }
                }
                am /= d.consumers as f64;
                0.5 * (am + s.spot_mean()[t])
            })
            .collect(),
        2 => s.spot_mean().to_vec(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            (0..d.hours).map(|_| rng.gen_range(0.0..=p_max)).collect()
        }
    }
}

/// Multistart search for the profit-maximising tariff.
pub fn solve_mpec(s: &ScenarioSet, cfg: &MpecConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let p_max = cfg.p_max_for(s);
    let ev = ProfitEvaluator::new(s);
    let outcomes: Vec<SearchOutcome> = (0..cfg.multistart_count)
        .into_par_iter()
        .map(|i| pattern_search(&ev, start_point(i, s, cfg, p_max, &ev), cfg, p_max))
        .collect();
    let mut best = 0usize;
    for (i, o) in outcomes.iter().enumerate() {
        if o.profit > outcomes[best].profit {
            best = i;
        }
    }
    let tariff = Tariff::new(outcomes[best].p.clone())?;
    let (_, mut rep) = evaluate_tariff(s, &tariff)?;
    rep.meta = SolveMeta {
        solver: "mpec-pattern-search".into(),
        iterations: outcomes.iter().map(|o| o.evals).sum(),
        seed: Some(cfg.seed),
        start_profits: outcomes.iter().map(|o| o.profit).collect(),
        nodes: 0,
        m_primal: None,
        m_dual: None,
        notes: if s.penalty_below_spot() {
            vec!["penalty C is below some spot price: short positions are settled as imbalance".into()]
        } else {
            Vec::new()
        },
    };
    Ok(rep)
}

/// Exhaustive grid over `[0, p_max]^T` for `T ≤ 2`; ties go to the first
/// point in row-major order.
pub fn grid_search_oracle(s: &ScenarioSet, grid_step: f64, p_max: f64) -> Result<(Tariff, f64)> {
    let n = s.hours();
    if n > GRID_MAX_HOURS {
        return Err(Error::TooLarge {
            what: "grid-search oracle",
            detail: format!("{n} hours, at most {GRID_MAX_HOURS}"),
        });
    }
    if !(grid_step > 0.0 && p_max >= 0.0) {
        return Err(Error::Config("grid step must be positive and p_max nonnegative".into()));
    }
    let steps = (p_max / grid_step + 1e-9).floor() as usize;
    let at = |k: usize| (k as f64 * grid_step).min(p_max);
    let ev = ProfitEvaluator::new(s);
    let (p, f) = if n == 1 {
        (0..=steps)
            .map(|k| (vec![at(k)], ev.profit(&[at(k)])))
            .fold((vec![0.0], f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    } else {
        let rows: Vec<(usize, f64)> = (0..=steps)
            .into_par_iter()
            .map(|i| {
                let x = at(i);
                let mut best = (0usize, f64::NEG_INFINITY);
                let mut q = [x, 0.0];
                let mut u = [0.0, 0.0];
                for k in 0..=steps {
                    q[1] = at(k);
                    (u[0], u[1]) = if q[0] > q[1] {
                        (1.0, -1.0)
                    } else if q[0] < q[1] {
                        (-1.0, 1.0)
                    } else {
                        (0.0, 0.0)
                    };
                    let v = ev.profit_with_roles(&q, &u);
                    if v > best.1 {
                        best = (k, v);
                    }
                }
                best
            })
            .collect();
        let mut bi = 0;
        for (i, r) in rows.iter().enumerate() {
            if r.1 > rows[bi].1 {
                bi = i;
            }
        }
        (vec![at(bi), at(rows[bi].0)], rows[bi].1)
    };
    Ok((Tariff { p }, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::retailer_expected_profit;

    fn monopoly() -> ScenarioSet {
        ScenarioSet::deterministic(&[0.02], &[vec![0.03]], &[vec![0.0015]], vec![0.0], 500.0).unwrap()
    }

    #[test]
    fn dispatch_branches() {
        assert_eq!(optimal_dispatch(10.0, 0.02, 500.0), (10.0, 0.0, 0.0));
        assert_eq!(optimal_dispatch(-2.0, 0.02, 500.0), (0.0, -2.0, 2.0));
        let (qs, _, y) = optimal_dispatch(10.0, 600.0, 500.0);
        assert_eq!((qs, y), (0.0, 10.0));
        // the chosen branch is the cheaper of the two
        assert!(dispatch_cost(10.0, 600.0, 500.0) < 600.0 * 10.0);
        assert_eq!(dispatch_cost(10.0, 600.0, 500.0), 5000.0);
    }

    #[test]
    fn evaluator_matches_model_profit() {
        let obs = crate::scenario::sample_spot();
        let s = crate::scenario::generate_scenarios(&obs[..6], &crate::scenario::build_case("BM").unwrap(), 4, 9)
            .unwrap();
        let ev = ProfitEvaluator::new(&s);
        let t = Tariff {
            p: vec![0.021, 0.035, 0.02, 0.018, 0.027, 0.024],
        };
        let (pr, rep) = evaluate_tariff(&s, &t).unwrap();
        assert!((ev.profit(&t.p) - pr).abs() < 1e-12);
        let direct = retailer_expected_profit(&s, &t, &rep.consumer, &rep.retailer).unwrap();
        assert_eq!(direct, pr);
    }

    #[test]
    fn zero_tariff_loses_money() {
        let s = monopoly();
        let (pr, _) = evaluate_tariff(&s, &Tariff::flat(1, 0.0)).unwrap();
        assert!(pr < 0.0);
        let (pr, _) = evaluate_tariff(&s, &Tariff::flat(1, 0.03)).unwrap();
        assert_eq!(pr, 0.0);
    }

    #[test]
    fn monopoly_markup() {
        let s = monopoly();
        let rep = solve_mpec(&s, &MpecConfig::default()).unwrap();
        assert!((rep.tariff.p[0] - 0.025).abs() < 1e-6);
        assert!((rep.expected_profit - 0.01 * 0.01 / (4.0 * 0.0015)).abs() < 1e-10);
        let (p, f) = grid_search_oracle(&s, 1e-5, 0.06).unwrap();
        assert!((p.p[0] - 0.025).abs() < 1e-5);
        assert!(f <= rep.expected_profit + 1e-12);
    }

    #[test]
    fn grid_below_cost_is_not_profitable() {
        let s = ScenarioSet::deterministic(
            &[0.02, 0.03],
            &[vec![0.03, 0.04]],
            &[vec![0.0015, 0.0015]],
            vec![0.0],
            500.0,
        )
        .unwrap();
        let (_, f) = grid_search_oracle(&s, 1e-4, 0.019).unwrap();
        assert!(f <= 0.0);
    }

    #[test]
    fn grid_rejects_long_horizons() {
        let s = ScenarioSet::deterministic(&[0.02; 3], &[vec![0.03; 3]], &[vec![0.0015; 3]], vec![0.0], 500.0)
            .unwrap();
        assert!(matches!(grid_search_oracle(&s, 1e-3, 0.06), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn near_tied_grouping() {
        let g = near_tied_groups(&[0.1, 0.2, 0.1 + 1e-9, 0.3, 0.2 + 5e-7], 1e-6);
        assert_eq!(g, vec![vec![0, 2], vec![1, 4]]);
    }

    #[test]
    fn config_validation() {
        let mut c = MpecConfig::default();
        c.multistart_count = 0;
        assert!(c.validate().is_err());
        let mut c = MpecConfig::default();
        c.tolerance = 0.0;
        assert!(c.validate().is_err());
    }
}
