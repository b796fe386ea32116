//! Depth-first branch and bound over complementarity patterns.

use super::system::{KktSystem, Side};
use crate::lp::{lp_feasibility, lp_minimize, LpOutcome};
use crate::Result;

/// Products at or below this count as complementary when choosing a leaf.
const COMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) enum Search {
    Found { x: Vec<f64>, nodes: u64, iterations: u64 },
    /// The relaxation with no pair decided is already infeasible.
    RootInfeasible { iterations: u64 },
    Exhausted { iterations: u64 },
    Budget,
}

fn complete(k: &KktSystem, pattern: &[Option<Side>], x: &[f64]) -> Vec<Option<Side>> {
    let at = k.pattern_at(x);
    pattern
        .iter()
        .zip(at)
        .map(|(p, a)| Some(p.unwrap_or(a)))
        .collect()
}

/// Lowest-price point of a fully decided pattern, if any.
fn leaf(k: &KktSystem, pattern: &[Option<Side>], iterations: &mut u64) -> Result<Option<Vec<f64>>> {
    let sys = k.with_pattern(pattern);
    match lp_minimize(&sys, &k.price_objective())? {
        LpOutcome::Solved(sol) => {
            *iterations += sol.iterations as u64;
            Ok(Some(sol.x))
        }
        LpOutcome::Infeasible(c) => {
            *iterations += c.iterations as u64;
            Ok(None)
        }
    }
}

/// Searches for a pattern whose linear system is feasible. A complete `hint`
/// is tried first and orders children everywhere else.
pub(crate) fn search(k: &KktSystem, hint: Option<&[Side]>, budget: u64) -> Result<Search> {
    let n = k.pairs.len();
    let mut nodes = 0u64;
    let mut iterations = 0u64;
    if let Some(h) = hint {
        nodes += 1;
        let pat: Vec<Option<Side>> = h.iter().copied().map(Some).collect();
        if let Some(x) = leaf(k, &pat, &mut iterations)? {
            return Ok(Search::Found { x, nodes, iterations });
        }
    }
    let mut stack: Vec<Vec<Option<Side>>> = vec![vec![None; n]];
    let mut root = true;
    while let Some(pat) = stack.pop() {
        if nodes >= budget {
            return Ok(Search::Budget);
        }
        nodes += 1;
        let sys = k.with_pattern(&pat);
        let x = match lp_feasibility(&sys)? {
            LpOutcome::Solved(sol) => {
                iterations += sol.iterations as u64;
                sol.x
            }
            LpOutcome::Infeasible(c) => {
                iterations += c.iterations as u64;
                if root {
                    return Ok(Search::RootInfeasible { iterations });
                }
                continue;
            }
        };
        root = false;
        let mut worst: Option<(usize, f64)> = None;
        for (i, pair) in k.pairs.iter().enumerate() {
            if pat[i].is_some() {
                continue;
            }
            let v = pair.product(&x);
            if worst.is_none_or(|(_, w)| v > w) {
                worst = Some((i, v));
            }
        }
        let Some((i, v)) = worst else {
            // every pair decided: the feasible point is an equilibrium
            if let Some(x) = leaf(k, &pat, &mut iterations)? {
                return Ok(Search::Found { x, nodes, iterations });
            }
            continue;
        };
        if v <= COMP_TOL {
            let full = complete(k, &pat, &x);
            if let Some(x) = leaf(k, &full, &mut iterations)? {
                return Ok(Search::Found { x, nodes, iterations });
            }
        }
        let pair = &k.pairs[i];
        let first = match hint {
            Some(h) => h[i],
            None if pair.slack_value(&x).abs() <= x[pair.dual].abs() => Side::Primal,
            None => Side::Dual,
        };
        let second = match first {
            Side::Primal => Side::Dual,
            Side::Dual => Side::Primal,
        };
        let mut b = pat.clone();
        b[i] = Some(second);
        stack.push(b);
        let mut a = pat;
        a[i] = Some(first);
        stack.push(a);
    }
    Ok(Search::Exhausted { iterations })
}
