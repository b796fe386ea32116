//! Complementarity as a penalty: minimise the sum of pair products over the
//! linear part of the KKT system by Frank–Wolfe, then snap to an exact
//! pattern.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::system::{KktSystem, Slack};
use crate::lp::{lp_feasibility, lp_minimize, LpOutcome};
use crate::Result;

#[derive(Debug, Clone)]
pub(crate) struct NlpRun {
    pub x: Option<Vec<f64>>,
    /// Smallest penalty seen over all starts.
    pub best: f64,
    pub iterations: u64,
}

fn gradient(k: &KktSystem, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for p in &k.pairs {
        let (v, sign) = match p.slack {
            Slack::Var(v) | Slack::AboveLower(v, _) => (v, 1.0),
            Slack::BelowUpper(v, _) => (v, -1.0),
        };
        g[v] += sign * x[p.dual];
        g[p.dual] += p.slack_value(x);
    }
    g
}

fn penalty(k: &KktSystem, x: &[f64]) -> f64 {
    k.complementarity_sum(x)
}

/// Snaps `x` to the pattern of its smaller factors and re-solves. Returns a
/// complementary point when that pattern is feasible.
fn polish(k: &KktSystem, x: &[f64], tol: f64, iters: &mut u64) -> Result<Option<Vec<f64>>> {
    let pat: Vec<_> = k.pattern_at(x).into_iter().map(Some).collect();
    let sys = k.with_pattern(&pat);
    match lp_minimize(&sys, &k.price_objective())? {
        LpOutcome::Solved(sol) => {
            *iters += sol.iterations as u64;
            let ok = k.pairs.iter().all(|p| p.product(&sol.x) <= tol);
            Ok(ok.then_some(sol.x))
        }
        LpOutcome::Infeasible(c) => {
            *iters += c.iterations as u64;
            Ok(None)
        }
    }
}

pub(crate) fn frank_wolfe(
    k: &KktSystem,
    starts: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<NlpRun> {
    let mut iterations = 0u64;
    let mut best = f64::INFINITY;
    let n = k.sys.n_vars();
    for i in 0..starts.max(1) {
        let start = if i == 0 {
            lp_feasibility(&k.sys)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            lp_minimize(&k.sys, &c)?
        };
        let mut x = match start {
            LpOutcome::Solved(sol) => {
                iterations += sol.iterations as u64;
                sol.x
            }
            LpOutcome::Infeasible(c) => {
                iterations += c.iterations as u64;
                return Ok(NlpRun {
                    x: None,
                    best,
                    iterations,
                });
            }
        };
        let mut f = penalty(k, &x);
        for it in 0..max_iters {
            if f <= tol || it % 10 == 9 {
                if let Some(p) = polish(k, &x, tol, &mut iterations)? {
                    return Ok(NlpRun {
                        best: best.min(penalty(k, &p)),
                        x: Some(p),
                        iterations,
                    });
                }
            }
            let g = gradient(k, &x);
            let v = match lp_minimize(&k.sys, &g)? {
                LpOutcome::Solved(sol) => {
                    iterations += sol.iterations as u64;
                    sol.x
                }
                LpOutcome::Infeasible(_) => break,
            };
            let d: Vec<f64> = v.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if gd >= -1e-15 {
                break;
            }
            // penalty along x + t d is f + t gd + t² c2
            let c2: f64 = k
                .pairs
                .iter()
                .map(|p| {
                    let ds = match p.slack {
                        Slack::Var(v) | Slack::AboveLower(v, _) => d[v],
                        Slack::BelowUpper(v, _) => -d[v],
                    };
                    ds * d[p.dual]
                })
                .sum();
            let t = if c2 > 0.0 {
                (-gd / (2.0 * c2)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += t * di;
            }
            f = penalty(k, &x);
        }
        best = best.min(f);
        if let Some(p) = polish(k, &x, tol, &mut iterations)? {
            return Ok(NlpRun {
                best: best.min(penalty(k, &p)),
                x: Some(p),
                iterations,
            });
        }
    }
    Ok(NlpRun {
        x: None,
        best,
        iterations,
    })
}
