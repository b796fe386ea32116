//! Exact consumer best response to a fixed price path.
//!
//! With `s = q + Δ` the consumer problem separates: consumption follows the
//! linear demand `s = max(0, (a - p) / b)` hour by hour, and the shift solves
//! `max Σ p Δ` over `|Δ| ≤ Δmax`, `Σ Δ = 0`. The shift problem is solved by
//! pairing the dearest hour with the cheapest, the second dearest with the
//! second cheapest, and so on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{ConsumerDecision, ConsumerDuals, PriceView};
use crate::{Error, Result, ScenarioSet};

/// Largest horizon accepted by [`best_response_oracle`].
pub const ORACLE_MAX_HOURS: usize = 6;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub s: Vec<f64>,
    pub shift: Vec<f64>,
    pub q: Vec<f64>,
    pub eps: Vec<f64>,
    pub nu_min: Vec<f64>,
    pub nu_max: Vec<f64>,
    pub lambda: f64,
}

impl BestResponse {
    /// Σ_t (p q − a s + ½ b s²).
    pub fn objective(&self, p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        objective(p, a, b, &self.s, &self.shift)
    }
}

pub fn objective(p: &[f64], a: &[f64], b: &[f64], s: &[f64], shift: &[f64]) -> f64 {
    (0..p.len())
        .map(|t| p[t] * (s[t] - shift[t]) - a[t] * s[t] + 0.5 * b[t] * s[t] * s[t])
        .sum()
}

/// Hour order by descending price, ties to the lower index first.
pub fn price_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&x, &y| p[y].total_cmp(&p[x]).then(x.cmp(&y)));
    idx
}

/// Normalised shift `u_t ∈ {-1, 0, 1}`; the actual shift is `Δmax · u_t`.
///
/// Depends only on the price order, so it is common to every consumer facing
/// the same prices.
pub fn shift_pattern(p: &[f64]) -> Vec<f64> {
    let order = price_order(p);
    let n = p.len();
    let mut u = vec![0.0; n];
    for i in 0..n / 2 {
        let (hi, lo) = (order[i], order[n - 1 - i]);
        if p[hi] > p[lo] {
            u[hi] = 1.0;
            u[lo] = -1.0;
        }
    }
    u
}

/// Demand at price `p` for a linear marginal utility `a - b s`.
#[inline]
pub fn demand(p: f64, a: f64, b: f64) -> f64 {
    ((a - p) / b).max(0.0)
}

/// Closed-form best response of one consumer.
pub fn best_response(p: &[f64], a: &[f64], b: &[f64], delta_max: f64) -> BestResponse {
    let u = shift_pattern(p);
    let s: Vec<f64> = (0..p.len()).map(|t| demand(p[t], a[t], b[t])).collect();
    let shift: Vec<f64> = u.iter().map(|&v| v * delta_max).collect();
    let q: Vec<f64> = s.iter().zip(&shift).map(|(x, d)| x - d).collect();
    let mut br = BestResponse {
        s,
        shift,
        q,
        eps: Vec::new(),
        nu_min: Vec::new(),
        nu_max: Vec::new(),
        lambda: 0.0,
    };
    fill_duals(&mut br, p, a, b, delta_max).expect("closed-form response is optimal");
    br
}

/// Recovers `ε`, `λ`, `ν_min`, `ν_max` for a primal response.
///
/// Fails if the response is infeasible or if no multipliers make it
/// stationary (the shift is not optimal).
pub fn recover_consumer_duals(
    q: &[f64],
    shift: &[f64],
    p: &[f64],
    a: &[f64],
    b: &[f64],
    delta_max: f64,
) -> Result<BestResponse> {
    let n = p.len();
    if [q.len(), shift.len(), a.len(), b.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape("response and price lengths differ".into()));
    }
    for t in 0..n {
        if q[t] + shift[t] < -TOL {
            return Err(Error::Infeasible(format!("hour {}: q + shift < 0", t + 1)));
        }
        if shift[t].abs() > delta_max + TOL {
            return Err(Error::Infeasible(format!("hour {}: |shift| > Δmax", t + 1)));
        }
    }
    let total: f64 = shift.iter().sum();
    if total.abs() > TOL * n.max(1) as f64 {
        return Err(Error::Infeasible(format!("shifts sum to {total}")));
    }
    let mut br = BestResponse {
        s: q.iter().zip(shift).map(|(x, d)| (x + d).max(0.0)).collect(),
        shift: shift.to_vec(),
        q: q.to_vec(),
        eps: Vec::new(),
        nu_min: Vec::new(),
        nu_max: Vec::new(),
        lambda: 0.0,
    };
    fill_duals(&mut br, p, a, b, delta_max)?;
    Ok(br)
}

fn fill_duals(br: &mut BestResponse, p: &[f64], a: &[f64], b: &[f64], delta_max: f64) -> Result<()> {
    let n = p.len();
    br.eps = (0..n)
        .map(|t| {
            if br.s[t] > 0.0 {
                0.0
            } else {
                (p[t] - a[t]).max(0.0)
            }
        })
        .collect();
    // at a positive consumption the demand row must hold exactly
    for t in 0..n {
        if br.s[t] > 0.0 {
            let r = p[t] - a[t] + b[t] * br.s[t];
            if r.abs() > 1e-9 * (1.0 + p[t].abs() + a[t].abs()) {
                return Err(Error::Infeasible(format!(
                    "hour {}: consumption {} is off the demand curve",
                    t + 1,
                    br.s[t]
                )));
            }
        } else if a[t] > p[t] + 1e-12 {
            return Err(Error::Infeasible(format!(
                "hour {}: zero consumption although a > p",
                t + 1
            )));
        }
    }

    let lambda = if delta_max == 0.0 {
        let mut sorted = p.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        -(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        })
    } else {
        let band = TOL.max(1e-9 * delta_max);
        let is_up = |t: usize| br.shift[t] >= delta_max - band;
        let is_down = |t: usize| br.shift[t] <= -delta_max + band;
        let interior: Vec<usize> = (0..n).filter(|&t| !is_up(t) && !is_down(t)).collect();
        let min_up = (0..n).filter(|&t| is_up(t)).map(|t| p[t]).fold(f64::INFINITY, f64::min);
        let max_down = (0..n)
            .filter(|&t| is_down(t))
            .map(|t| p[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let lambda = if let Some(&t0) = interior.first() {
            if let Some(&t1) = interior.iter().find(|&&t| p[t] != p[t0]) {
                return Err(Error::Infeasible(format!(
                    "hours {} and {} both shift partially at different prices",
                    t0 + 1,
                    t1 + 1
                )));
            }
            -p[t0]
        } else {
            -0.5 * (min_up + max_down)
        };
        if -lambda > min_up || -lambda < max_down {
            return Err(Error::Infeasible(
                "shift moves load towards dearer hours".into(),
            ));
        }
        lambda
    };
    br.lambda = lambda;
    br.nu_max = p.iter().map(|&x| (x + lambda).max(0.0)).collect();
    br.nu_min = p.iter().map(|&x| (-(x + lambda)).max(0.0)).collect();
    Ok(())
}

/// Brute-force best response: enumerates every active set of `s ≥ 0` and the
/// shift bounds, solves the equality-constrained quadratic program of each and
/// keeps the feasible stationary point with the least objective.
pub fn best_response_oracle(p: &[f64], a: &[f64], b: &[f64], delta_max: f64) -> Result<BestResponse> {
    let n = p.len();
    if n > ORACLE_MAX_HOURS {
        return Err(Error::TooLarge {
            what: "best-response oracle",
            detail: format!("{n} hours, at most {ORACLE_MAX_HOURS}"),
        });
    }
    // per hour: s free or at zero (2) × shift free, at lower or at upper (3)
    let patterns = 6usize.pow(n as u32);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for code in 0..patterns {
        let mut c = code;
        let mut s_zero = vec![false; n];
        let mut dstate = vec![0u8; n];
        for t in 0..n {
            s_zero[t] = c % 2 == 1;
            c /= 2;
            dstate[t] = (c % 3) as u8;
            c /= 3;
        }
        let Some((s, d)) = solve_pattern(p, a, b, delta_max, &s_zero, &dstate) else {
            continue;
        };
        let feasible = s.iter().all(|&x| x >= -TOL)
            && d.iter().all(|&x| x.abs() <= delta_max + TOL)
            && d.iter().sum::<f64>().abs() <= TOL;
        if !feasible {
            continue;
        }
        let obj = objective(p, a, b, &s, &d);
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o - 1e-15) {
            best = Some((obj, s, d));
        }
    }
    let (_, s, d) = best.ok_or_else(|| Error::Solver("oracle found no feasible pattern".into()))?;
    let s: Vec<f64> = s.into_iter().map(|x| x.max(0.0)).collect();
    let q: Vec<f64> = s.iter().zip(&d).map(|(x, y)| x - y).collect();
    recover_consumer_duals(&q, &d, p, a, b, delta_max)
}

/// Stationary point of the objective in `(s, Δ)` with the constraints of one
/// pattern held as equalities, via the dense KKT system.
fn solve_pattern(
    p: &[f64],
    a: &[f64],
    b: &[f64],
    delta_max: f64,
    s_zero: &[bool],
    dstate: &[u8],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = p.len();
    let nv = 2 * n;
    // equality rows: (coefficients, rhs)
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for t in 0..n {
        if s_zero[t] {
            let mut r = vec![0.0; nv];
            r[t] = 1.0;
            rows.push((r, 0.0));
        }
        if dstate[t] != 0 {
            let mut r = vec![0.0; nv];
            r[n + t] = 1.0;
            rows.push((r, if dstate[t] == 1 { -delta_max } else { delta_max }));
        }
    }
    let any_free_shift = dstate.contains(&0);
    if any_free_shift {
        let mut r = vec![0.0; nv];
        for t in 0..n {
            r[n + t] = 1.0;
        }
        rows.push((r, 0.0));
    }
    let m = rows.len();
    let dim = nv + m;
    let mut k = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for t in 0..n {
        k[t * dim + t] = b[t];
        rhs[t] = a[t] - p[t];
        rhs[n + t] = p[t];
    }
    for (i, (r, v)) in rows.iter().enumerate() {
        for (col, &c) in r.iter().enumerate() {
            k[(nv + i) * dim + col] = c;
            k[col * dim + nv + i] = c;
        }
        rhs[nv + i] = *v;
    }
    let x = crate::linalg::solve(k, rhs, dim)?;
    Some((x[..n].to_vec(), x[n..nv].to_vec()))
}

/// Best responses of every consumer in every scenario.
pub fn respond_all(s: &ScenarioSet, prices: &(dyn PriceView + Sync)) -> (ConsumerDecision, ConsumerDuals) {
    let d = s.dims();
    let blocks: Vec<BestResponse> = (0..d.consumers * d.scenarios)
        .into_par_iter()
        .map(|k| {
            let (j, w) = (k / d.scenarios, k % d.scenarios);
            let p: Vec<f64> = (0..d.hours).map(|t| prices.price(t, w)).collect();
            best_response(&p, s.a_slice(j, w), s.b_slice(j, w), s.delta_max(j))
        })
        .collect();
    let mut dec = ConsumerDecision::zeros(d);
    let mut du = ConsumerDuals::zeros(d);
    for (k, br) in blocks.into_iter().enumerate() {
        let base = k * d.hours;
        dec.q[base..base + d.hours].copy_from_slice(&br.q);
        dec.shift[base..base + d.hours].copy_from_slice(&br.shift);
        du.eps[base..base + d.hours].copy_from_slice(&br.eps);
        du.nu_min[base..base + d.hours].copy_from_slice(&br.nu_min);
        du.nu_max[base..base + d.hours].copy_from_slice(&br.nu_max);
        du.lambda[k] = br.lambda;
    }
    (dec, du)
}
