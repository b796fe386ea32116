//! Closed-form competitive clearing of one scenario, used to guide the
//! pattern search.
//!
//! All consumers face the same prices, so they share a shift level `ℓ`
//! (`λ = -ℓ`). Hours dearer than `ℓ` shift out fully, cheaper hours shift in
//! fully, and hours at the level absorb the rest. The retailer buys at spot
//! whenever demand is positive, so prices never exceed spot.

use super::system::Extracted;
use crate::model::{
    ConsumerDecision, ConsumerDuals, Dims, RetailerDecision, RetailerDuals, ScenarioPrices,
};
use crate::ScenarioSet;

const BISECT_ITERS: usize = 200;

/// Aggregate demand of scenario `w` at price `p` in hour `t`.
fn demand(s: &ScenarioSet, t: usize, w: usize, p: f64) -> f64 {
    (0..s.dims().consumers)
        .map(|j| (s.a(j, t, w) - p).max(0.0) / s.b(j, t, w))
        .sum()
}

/// Smallest price with aggregate demand `target`, for `target > 0`.
fn inverse_demand(s: &ScenarioSet, t: usize, w: usize, target: f64) -> f64 {
    let hi0 = (0..s.dims().consumers)
        .map(|j| s.a(j, t, w))
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if demand(s, t, w, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone)]
pub(crate) struct Clearing {
    pub level: f64,
    pub price: Vec<f64>,
    /// Shift as a fraction of each consumer's limit, in `[-1, 1]`.
    pub u: Vec<f64>,
}

/// Clears scenario `w` of `s`.
pub(crate) fn clear_scenario(s: &ScenarioSet, w: usize) -> Clearing {
    let t_n = s.dims().hours;
    let spot: Vec<f64> = (0..t_n).map(|t| s.spot(t, w)).collect();
    let dtot: f64 = s.delta_maxes().iter().sum();
    if dtot <= 0.0 || t_n == 1 {
        let price = (0..t_n)
            .map(|t| {
                if demand(s, t, w, spot[t]) > 0.0 {
                    spot[t]
                } else {
                    (0..s.dims().consumers)
                        .map(|j| s.a(j, t, w))
                        .fold(0.0, f64::max)
                        .min(spot[t])
                }
            })
            .collect::<Vec<_>>();
        return Clearing {
            level: price.iter().sum::<f64>() / t_n.max(1) as f64,
            price,
            u: vec![0.0; t_n],
        };
    }
    let cap = |t: usize, l: f64| (demand(s, t, w, l) / dtot).min(1.0);
    // Σ u at a level strictly between spot prices
    let f = |l: f64| -> f64 {
        (0..t_n)
            .map(|t| if l > spot[t] { -1.0 } else { cap(t, l) })
            .sum()
    };
    let mut levels: Vec<f64> = spot.clone();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut level = None;
    let mut prev: Option<f64> = None;
    for &x in &levels {
        if let Some(x0) = prev {
            // F on (x0, x) ends at the value below
            let f_right: f64 = (0..t_n)
                .map(|t| if spot[t] <= x0 { -1.0 } else { cap(t, x) })
                .sum();
            if f_right < 0.0 {
                let (mut lo, mut hi) = (x0, x);
                for _ in 0..BISECT_ITERS {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if f(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                level = Some(0.5 * (lo + hi));
                break;
            }
        }
        let hi_at: f64 = (0..t_n)
            .map(|t| if spot[t] < x { -1.0 } else { cap(t, x) })
            .sum();
        let lo_at: f64 = (0..t_n)
            .map(|t| if spot[t] <= x { -1.0 } else { cap(t, x) })
            .sum();
        if lo_at <= 0.0 && hi_at >= 0.0 {
            level = Some(x);
            break;
        }
        prev = Some(x);
    }
    let level = level.unwrap_or(*levels.last().unwrap());

    let mut price = vec![0.0; t_n];
    let mut u = vec![0.0; t_n];
    let mut tied = Vec::new();
    for t in 0..t_n {
        if level > spot[t] {
            price[t] = spot[t];
            u[t] = -1.0;
        } else if level < spot[t] {
            let d_spot = demand(s, t, w, spot[t]);
            let d_level = demand(s, t, w, level);
            if d_spot >= dtot {
                price[t] = spot[t];
                u[t] = 1.0;
            } else if d_level > dtot {
                price[t] = inverse_demand(s, t, w, dtot);
                u[t] = 1.0;
            } else {
                price[t] = level;
                u[t] = d_level / dtot;
            }
        } else {
            price[t] = spot[t];
            u[t] = -1.0;
            tied.push(t);
        }
    }
    let mut rest = -u.iter().sum::<f64>();
    for &t in &tied {
        let room = (cap(t, level) + 1.0).max(0.0);
        let step = rest.clamp(0.0, room);
        u[t] += step;
        rest -= step;
    }
    Clearing { level, price, u }
}

/// The full primal-dual point of scenario `w` implied by its clearing, laid
/// out for a one-scenario system.
pub(crate) fn clearing_point(s: &ScenarioSet, w: usize, c: &Clearing) -> Extracted {
    let t_n = s.dims().hours;
    let jn = s.dims().consumers;
    let d = Dims::new(t_n, jn, 1);
    let sigma = s.prob(w);
    let mut prices = ScenarioPrices::zeros(t_n, 1);
    let mut cons = ConsumerDecision::zeros(d);
    let mut cd = ConsumerDuals::zeros(d);
    let mut ret = RetailerDecision::zeros(d);
    let mut rd = RetailerDuals::zeros(d);
    for j in 0..jn {
        let dm = s.delta_max(j);
        // a consumer that cannot shift has no use for its level
        let level = if dm > 0.0 { c.level } else { 0.0 };
        cd.lambda[j] = -level;
        for t in 0..t_n {
            let k = d.c(j, t, 0);
            let p = c.price[t];
            let a = s.a(j, t, w);
            let sv = (a - p).max(0.0) / s.b(j, t, w);
            cons.shift[k] = dm * c.u[t];
            cons.q[k] = sv - cons.shift[k];
            cd.eps[k] = if sv > 0.0 { 0.0 } else { (p - a).max(0.0) };
            cd.nu_max[k] = (p - level).max(0.0);
            cd.nu_min[k] = (level - p).max(0.0);
        }
    }
    for t in 0..t_n {
        let p = c.price[t];
        prices.set(t, 0, p);
        ret.q_spot[t] = cons.aggregate(t, 0).max(0.0);
        rd.mu[t] = -sigma * p;
        rd.theta[t] = sigma * (s.spot(t, w) - p).max(0.0);
        rd.alpha_plus[t] = (-rd.mu[t]).max(0.0);
        rd.alpha_minus[t] = rd.mu[t].max(0.0);
        rd.beta[t] = (sigma * s.penalty_c() - rd.alpha_plus[t] - rd.alpha_minus[t]).max(0.0);
    }
    Extracted {
        prices,
        consumer: cons,
        consumer_duals: cd,
        retailer: ret,
        retailer_duals: rd,
    }
}
