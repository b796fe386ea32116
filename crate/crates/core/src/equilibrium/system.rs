//! The joint consumer and retailer KKT conditions as a bounded linear system
//! plus a list of complementarity pairs.

use serde::{Deserialize, Serialize};

use crate::lp::LinearSystem;
use crate::model::{
    ConsumerDecision, ConsumerDuals, Dims, RetailerDecision, RetailerDuals, ScenarioPrices,
};
use crate::ScenarioSet;

/// Which factor of a complementarity pair is forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Primal,
    Dual,
}

/// The primal factor of a pair, as a function of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slack {
    /// `x` itself.
    Var(usize),
    /// `x - bound`.
    AboveLower(usize, f64),
    /// `bound - x`.
    BelowUpper(usize, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Consumption,
    ShiftLower,
    ShiftUpper,
    ImbalanceUp,
    ImbalanceDown,
    SpotPurchase,
    AbsImbalance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pair {
    pub slack: Slack,
    pub dual: usize,
    pub kind: PairKind,
}

impl Pair {
    pub fn slack_value(&self, x: &[f64]) -> f64 {
        match self.slack {
            Slack::Var(v) => x[v],
            Slack::AboveLower(v, b) => x[v] - b,
            Slack::BelowUpper(v, b) => b - x[v],
        }
    }

    pub fn product(&self, x: &[f64]) -> f64 {
        (self.slack_value(x) * x[self.dual]).abs()
    }

    /// Tightens the bounds of `sys` so that the chosen side is zero.
    pub fn apply(&self, sys: &mut LinearSystem, side: Side) {
        match side {
            Side::Dual => {
                let (lo, _) = sys.bounds(self.dual);
                sys.set_bounds(self.dual, lo, 0.0);
            }
            Side::Primal => match self.slack {
                Slack::Var(v) => {
                    let (lo, _) = sys.bounds(v);
                    sys.set_bounds(v, lo, 0.0);
                }
                Slack::AboveLower(v, b) => {
                    let (lo, up) = sys.bounds(v);
                    sys.set_bounds(v, lo, up.min(b));
                }
                Slack::BelowUpper(v, b) => {
                    let (lo, up) = sys.bounds(v);
                    sys.set_bounds(v, lo.max(b), up);
                }
            },
        }
    }
}

/// Index of every unknown of the joint system.
#[derive(Debug, Clone)]
pub(crate) struct VarIndex {
    pub dims: Dims,
    pub q: Vec<usize>,
    pub shift: Vec<usize>,
    pub s: Vec<usize>,
    pub eps: Vec<usize>,
    pub nu_min: Vec<usize>,
    pub nu_max: Vec<usize>,
    pub lambda: Vec<usize>,
    /// Price variable faced in `(t, w)`; shared across `w` when prices are linked.
    pub price: Vec<usize>,
    pub qs: Vec<usize>,
    pub del: Vec<usize>,
    pub y: Vec<usize>,
    pub gp: Vec<usize>,
    pub gm: Vec<usize>,
    pub mu: Vec<usize>,
    pub ap: Vec<usize>,
    pub am: Vec<usize>,
    pub th: Vec<usize>,
    pub be: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct KktSystem {
    pub sys: LinearSystem,
    pub idx: VarIndex,
    pub pairs: Vec<Pair>,
    /// Distinct price variables, in first-use order.
    pub price_vars: Vec<usize>,
}

/// Decisions and multipliers read back from a solution vector.
#[derive(Debug, Clone)]
pub(crate) struct Extracted {
    pub prices: ScenarioPrices,
    pub consumer: ConsumerDecision,
    pub consumer_duals: ConsumerDuals,
    pub retailer: RetailerDecision,
    pub retailer_duals: RetailerDuals,
}

impl KktSystem {
    /// Builds the system for every scenario of `s`. With `linked` one price
    /// per hour is shared by all scenarios; otherwise each scenario clears
    /// its own price.
    pub fn build(s: &ScenarioSet, linked: bool, m_primal: f64, m_dual: f64) -> Self {
        let d = s.dims();
        let mut sys = LinearSystem::new();
        let nc = d.consumer_len();
        let nr = d.retailer_len();
        let add = |n: usize, lo: f64, up: f64, sys: &mut LinearSystem| -> Vec<usize> {
            (0..n).map(|_| sys.add_var(lo, up)).collect()
        };
        let q = add(nc, -m_primal, m_primal, &mut sys);
        let mut shift = Vec::with_capacity(nc);
        for j in 0..d.consumers {
            for _ in 0..d.scenarios * d.hours {
                let dm = s.delta_max(j);
                shift.push(sys.add_var(-dm, dm));
            }
        }
        let sv = add(nc, 0.0, m_primal, &mut sys);
        let eps = add(nc, 0.0, m_dual, &mut sys);
        let nu_min = add(nc, 0.0, m_dual, &mut sys);
        let nu_max = add(nc, 0.0, m_dual, &mut sys);
        let lambda = add(d.consumers * d.scenarios, -m_dual, m_dual, &mut sys);
        for j in 0..d.consumers {
            if s.delta_max(j) == 0.0 {
                // the level is free when nothing can shift; pin it
                for w in 0..d.scenarios {
                    sys.fix(lambda[j * d.scenarios + w], 0.0);
                }
            }
        }
        let (price, price_vars) = if linked {
            let pv = add(d.hours, 0.0, m_dual, &mut sys);
            ((0..nr).map(|k| pv[k % d.hours]).collect(), pv)
        } else {
            let pv = add(nr, 0.0, m_dual, &mut sys);
            (pv.clone(), pv)
        };
        let qs = add(nr, 0.0, m_primal, &mut sys);
        let del = add(nr, -m_primal, m_primal, &mut sys);
        let y = add(nr, 0.0, m_primal, &mut sys);
        let gp = add(nr, 0.0, 2.0 * m_primal, &mut sys);
        let gm = add(nr, 0.0, 2.0 * m_primal, &mut sys);
        let mu = add(nr, -m_dual, m_dual, &mut sys);
        let ap = add(nr, 0.0, m_dual, &mut sys);
        let am = add(nr, 0.0, m_dual, &mut sys);
        let th = add(nr, 0.0, m_dual, &mut sys);
        let be = add(nr, 0.0, m_dual, &mut sys);

        let mut pairs = Vec::new();
        for j in 0..d.consumers {
            let dm = s.delta_max(j);
            for w in 0..d.scenarios {
                let lam = lambda[j * d.scenarios + w];
                let mut balance = Vec::with_capacity(d.hours);
                for t in 0..d.hours {
                    let k = d.c(j, t, w);
                    let p = price[d.r(t, w)];
                    let (a, b) = (s.a(j, t, w), s.b(j, t, w));
                    sys.add_row(&[(sv[k], 1.0), (q[k], -1.0), (shift[k], -1.0)], 0.0);
                    sys.add_row(&[(p, 1.0), (sv[k], b), (eps[k], -1.0)], a);
                    sys.add_row(
                        &[
                            (sv[k], b),
                            (eps[k], -1.0),
                            (nu_min[k], -1.0),
                            (nu_max[k], 1.0),
                            (lam, -1.0),
                        ],
                        a,
                    );
                    balance.push((shift[k], 1.0));
                    pairs.push(Pair {
                        slack: Slack::Var(sv[k]),
                        dual: eps[k],
                        kind: PairKind::Consumption,
                    });
                    pairs.push(Pair {
                        slack: Slack::AboveLower(shift[k], -dm),
                        dual: nu_min[k],
                        kind: PairKind::ShiftLower,
                    });
                    pairs.push(Pair {
                        slack: Slack::BelowUpper(shift[k], dm),
                        dual: nu_max[k],
                        kind: PairKind::ShiftUpper,
                    });
                }
                sys.add_row(&balance, 0.0);
            }
        }
        let c = s.penalty_c();
        for w in 0..d.scenarios {
            let sigma = s.prob(w);
            for t in 0..d.hours {
                let k = d.r(t, w);
                sys.add_row(&[(price[k], sigma), (mu[k], 1.0)], 0.0);
                sys.add_row(&[(mu[k], 1.0), (th[k], -1.0)], -sigma * s.spot(t, w));
                sys.add_row(&[(mu[k], 1.0), (ap[k], 1.0), (am[k], -1.0)], 0.0);
                sys.add_row(&[(ap[k], 1.0), (am[k], 1.0), (be[k], 1.0)], sigma * c);
                let mut bal: Vec<(usize, f64)> =
                    (0..d.consumers).map(|j| (q[d.c(j, t, w)], 1.0)).collect();
                bal.push((qs[k], -1.0));
                bal.push((del[k], -1.0));
                sys.add_row(&bal, 0.0);
                sys.add_row(&[(gp[k], 1.0), (y[k], -1.0), (del[k], 1.0)], 0.0);
                sys.add_row(&[(gm[k], 1.0), (y[k], -1.0), (del[k], -1.0)], 0.0);
                for (slack, dual, kind) in [
                    (gp[k], ap[k], PairKind::ImbalanceUp),
                    (gm[k], am[k], PairKind::ImbalanceDown),
                    (qs[k], th[k], PairKind::SpotPurchase),
                    (y[k], be[k], PairKind::AbsImbalance),
                ] {
                    pairs.push(Pair {
                        slack: Slack::Var(slack),
                        dual,
                        kind,
                    });
                }
            }
        }
        KktSystem {
            sys,
            idx: VarIndex {
                dims: d,
                q,
                shift,
                s: sv,
                eps,
                nu_min,
                nu_max,
                lambda,
                price,
                qs,
                del,
                y,
                gp,
                gm,
                mu,
                ap,
                am,
                th,
                be,
            },
            pairs,
            price_vars,
        }
    }

    /// Objective selecting the lowest total price among solutions.
    pub fn price_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.sys.n_vars()];
        for &v in &self.price_vars {
            c[v] = 1.0;
        }
        c
    }

    pub fn extract(&self, x: &[f64]) -> Extracted {
        let ix = &self.idx;
        let d = ix.dims;
        let pick = |v: &[usize]| -> Vec<f64> { v.iter().map(|&i| x[i]).collect() };
        let mut prices = ScenarioPrices::zeros(d.hours, d.scenarios);
        for w in 0..d.scenarios {
            for t in 0..d.hours {
                prices.set(t, w, x[ix.price[d.r(t, w)]]);
            }
        }
        Extracted {
            prices,
            consumer: ConsumerDecision {
                dims: d,
                q: pick(&ix.q),
                shift: pick(&ix.shift),
            },
            consumer_duals: ConsumerDuals {
                dims: d,
                eps: pick(&ix.eps),
                nu_min: pick(&ix.nu_min),
                nu_max: pick(&ix.nu_max),
                lambda: pick(&ix.lambda),
            },
            retailer: RetailerDecision {
                dims: d,
                q_spot: pick(&ix.qs),
                imbalance: pick(&ix.del),
                abs_imbalance: pick(&ix.y),
            },
            retailer_duals: RetailerDuals {
                dims: d,
                mu: pick(&ix.mu),
                alpha_plus: pick(&ix.ap),
                alpha_minus: pick(&ix.am),
                theta: pick(&ix.th),
                beta: pick(&ix.be),
                gamma: vec![0.0; d.hours],
            },
        }
    }

    /// Pattern that zeroes the smaller factor of every pair at `x`.
    pub fn pattern_at(&self, x: &[f64]) -> Vec<Side> {
        self.pairs
            .iter()
            .map(|p| {
                if p.slack_value(x).abs() <= x[p.dual].abs() {
                    Side::Primal
                } else {
                    Side::Dual
                }
            })
            .collect()
    }

    /// Copy of the system with every decided pair fixed.
    pub fn with_pattern(&self, pattern: &[Option<Side>]) -> LinearSystem {
        let mut sys = self.sys.clone();
        for (pair, side) in self.pairs.iter().zip(pattern) {
            if let Some(side) = side {
                pair.apply(&mut sys, *side);
            }
        }
        sys
    }

    /// Σ of all complementarity products at `x`.
    pub fn complementarity_sum(&self, x: &[f64]) -> f64 {
        self.pairs.iter().map(|p| p.slack_value(x) * x[p.dual]).sum()
    }
}

/// A full solution vector from separate decision and multiplier values, laid
/// out as in `k`.
pub(crate) fn assemble_vector(k: &KktSystem, e: &Extracted) -> Vec<f64> {
    let ix = &k.idx;
    let d = ix.dims;
    let mut x = vec![0.0; k.sys.n_vars()];
    for i in 0..d.consumer_len() {
        x[ix.q[i]] = e.consumer.q[i];
        x[ix.shift[i]] = e.consumer.shift[i];
        x[ix.s[i]] = (e.consumer.q[i] + e.consumer.shift[i]).max(0.0);
        x[ix.eps[i]] = e.consumer_duals.eps[i];
        x[ix.nu_min[i]] = e.consumer_duals.nu_min[i];
        x[ix.nu_max[i]] = e.consumer_duals.nu_max[i];
    }
    for (i, &v) in ix.lambda.iter().enumerate() {
        x[v] = e.consumer_duals.lambda[i];
    }
    for w in 0..d.scenarios {
        for t in 0..d.hours {
            let r = d.r(t, w);
            x[ix.price[r]] = e.prices.p[r];
            x[ix.qs[r]] = e.retailer.q_spot[r];
            x[ix.del[r]] = e.retailer.imbalance[r];
            x[ix.y[r]] = e.retailer.abs_imbalance[r];
            x[ix.gp[r]] = e.retailer.abs_imbalance[r] - e.retailer.imbalance[r];
            x[ix.gm[r]] = e.retailer.abs_imbalance[r] + e.retailer.imbalance[r];
            x[ix.mu[r]] = e.retailer_duals.mu[r];
            x[ix.ap[r]] = e.retailer_duals.alpha_plus[r];
            x[ix.am[r]] = e.retailer_duals.alpha_minus[r];
            x[ix.th[r]] = e.retailer_duals.theta[r];
            x[ix.be[r]] = e.retailer_duals.beta[r];
        }
    }
    x
}
