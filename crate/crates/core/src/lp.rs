//! Bounded-variable revised simplex for `min cᵀx` subject to `A x = b`,
//! `l ≤ x ≤ u`.
//!
//! Dense explicit basis inverse with product-form updates and periodic
//! refactorisation; columns are stored sparse. Phase one uses one signed
//! artificial per row. Dantzig pricing switches to Bland's rule after a run of
//! degenerate pivots.

use serde::{Deserialize, Serialize};

use crate::linalg::invert;
use crate::{Error, Result};

/// Maximum violation accepted for a returned point.
pub const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 40;

/// A linear system `A x = b` with bounds on every variable.
#[derive(Debug, Clone, Default)]
pub struct LinearSystem {
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.cols.push(Vec::new());
        self.lower.push(lower);
        self.upper.push(upper);
        self.cols.len() - 1
    }

    /// Adds `Σ coef · x = rhs`. Repeated variables are summed.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.rhs.len();
        for &(j, v) in coefs {
            if v == 0.0 {
                continue;
            }
            match self.cols[j].iter_mut().find(|(i, _)| *i == r) {
                Some(e) => e.1 += v,
                None => self.cols[j].push((r, v)),
            }
        }
        self.rhs.push(rhs);
        r
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn fix(&mut self, j: usize, value: f64) {
        self.set_bounds(j, value, value);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn n_vars(&self) -> usize {
        self.cols.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_rows()];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                ax[i] += v * x[j];
            }
        }
        let rows = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let bounds = (0..self.n_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
}

/// Evidence that a system has no solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    /// Row multipliers `y` of the phase-one optimum. For every `x` within the
    /// bounds, `yᵀ(b - A x)` is positive, which certifies infeasibility.
    pub farkas: Vec<f64>,
    /// Least total row violation phase one could reach, in row-scaled units.
    pub min_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpOutcome {
    Solved(LpSolution),
    Infeasible(InfeasibilityCertificate),
}

impl LpOutcome {
    pub fn solution(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Solved(s) => Some(s),
            LpOutcome::Infeasible(_) => None,
        }
    }
}

/// A feasible point of the system or a certificate that none exists.
pub fn lp_feasibility(sys: &LinearSystem) -> Result<LpOutcome> {
    Simplex::new(sys)?.run(None)
}

/// Minimises `cᵀx` over the system.
pub fn lp_minimize(sys: &LinearSystem, c: &[f64]) -> Result<LpOutcome> {
    if c.len() != sys.n_vars() {
        return Err(Error::Shape(format!(
            "objective has {} entries, system has {} variables",
            c.len(),
            sys.n_vars()
        )));
    }
    Simplex::new(sys)?.run(Some(c))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rule {
    Dantzig,
    Bland,
}

struct Simplex<'a> {
    sys: &'a LinearSystem,
    m: usize,
    n: usize,
    row_scale: Vec<f64>,
    rhs: Vec<f64>,
    /// Sign of each artificial column.
    art: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Position in the basis, or `usize::MAX`.
    pos: Vec<usize>,
    binv: Vec<f64>,
    cost: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(sys: &'a LinearSystem) -> Result<Self> {
        let m = sys.n_rows();
        let n = sys.n_vars();
        for j in 0..n {
            let (l, u) = (sys.lower[j], sys.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Solver(format!("variable {j} has invalid bounds [{l}, {u}]")));
            }
        }
        let mut row_scale = vec![0.0f64; m];
        for col in &sys.cols {
            for &(i, v) in col {
                row_scale[i] = row_scale[i].max(v.abs());
            }
        }
        for s in row_scale.iter_mut() {
            *s = if *s > 0.0 { 1.0 / *s } else { 1.0 };
        }
        let rhs: Vec<f64> = sys.rhs.iter().zip(&row_scale).map(|(b, s)| b * s).collect();

        let mut lo = sys.lower.clone();
        let mut up = sys.upper.clone();
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                let (l, u) = (lo[j], up[j]);
                if l.is_finite() && (!u.is_finite() || l.abs() <= u.abs()) {
                    l
                } else if u.is_finite() {
                    u
                } else {
                    0.0
                }
            })
            .collect();
        let mut resid = rhs.clone();
        for (j, col) in sys.cols.iter().enumerate() {
            for &(i, v) in col {
                resid[i] -= v * row_scale[i] * x[j];
            }
        }
        let art: Vec<f64> = resid.iter().map(|r| if *r < 0.0 { -1.0 } else { 1.0 }).collect();
        lo.extend(std::iter::repeat_n(0.0, m));
        up.extend(std::iter::repeat_n(f64::INFINITY, m));
        x.extend(resid.iter().map(|r| r.abs()));
        let basis: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![usize::MAX; n + m];
        for (k, &b) in basis.iter().enumerate() {
            pos[b] = k;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = art[i];
        }
        let mut cost = vec![0.0; n + m];
        for c in cost.iter_mut().skip(n) {
            *c = 1.0;
        }
        Ok(Simplex {
            sys,
            m,
            n,
            row_scale,
            rhs,
            art,
            lo,
            up,
            x,
            basis,
            pos,
            binv,
            cost,
            iterations: 0,
            since_refactor: 0,
        })
    }

    fn col(&self, j: usize) -> ColIter<'_> {
        if j < self.n {
            ColIter::Sparse(self.sys.cols[j].iter(), &self.row_scale)
        } else {
            ColIter::Unit(Some((j - self.n, self.art[j - self.n])))
        }
    }

    fn max_iterations(&self) -> usize {
        100 * (self.m + self.n) + 1000
    }

    fn run(mut self, objective: Option<&[f64]>) -> Result<LpOutcome> {
        for j in 0..self.n {
            if self.lo[j] > self.up[j] {
                return Ok(LpOutcome::Infeasible(InfeasibilityCertificate {
                    farkas: vec![0.0; self.m],
                    min_violation: self.lo[j] - self.up[j],
                    iterations: 0,
                }));
            }
        }
        self.optimize()?;
        let infeas: f64 = (self.n..self.n + self.m).map(|j| self.x[j]).sum();
        if infeas > FEAS_TOL {
            let y = self.duals();
            let farkas = y.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect();
            return Ok(LpOutcome::Infeasible(InfeasibilityCertificate {
                farkas,
                min_violation: infeas,
                iterations: self.iterations,
            }));
        }
        for j in self.n..self.n + self.m {
            self.up[j] = 0.0;
            if self.pos[j] == usize::MAX {
                self.x[j] = 0.0;
            }
        }
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        if let Some(c) = objective {
            self.cost[..self.n].copy_from_slice(c);
            self.optimize()?;
        }
        self.refactor()?;
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let max_violation = self.sys.max_violation(&x);
        let scale = 1.0 + self.sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_violation > FEAS_TOL * scale {
            return Err(Error::Solver(format!(
                "numerical breakdown: returned point violates the system by {max_violation:e}"
            )));
        }
        let objective = objective.map_or(0.0, |c| c.iter().zip(&x).map(|(a, b)| a * b).sum());
        Ok(LpOutcome::Solved(LpSolution {
            x,
            objective,
            iterations: self.iterations,
            max_violation,
        }))
    }

    /// Simplex multipliers `y = c_Bᵀ B⁻¹`.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let mut d = self.cost[j];
        for (i, v) in self.col(j) {
            d -= y[i] * v;
        }
        d
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (i, v) in self.col(j) {
            for k in 0..m {
                alpha[k] += self.binv[k * m + i] * v;
            }
        }
        alpha
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.col(j) {
                b[i * m + k] = v;
            }
        }
        self.binv = invert(&b, m)
            .ok_or_else(|| Error::Solver("basis matrix became singular".into()))?;
        let mut r = self.rhs.clone();
        for j in 0..self.n + self.m {
            if self.pos[j] == usize::MAX && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, v) in self.col(j) {
                    r[i] -= v * xj;
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn optimize(&mut self) -> Result<()> {
        let mut rule = Rule::Dantzig;
        let mut degenerate = 0usize;
        loop {
            if self.iterations > self.max_iterations() {
                return Err(Error::Solver(format!(
                    "iteration limit {} reached ({} rows, {} columns)",
                    self.max_iterations(),
                    self.m,
                    self.n
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals();
            // entering variable and direction (+1 increase, -1 decrease)
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + self.m {
                if self.pos[j] != usize::MAX || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = self.reduced_cost(&y, j);
                let at_lo = self.x[j] <= self.lo[j];
                let at_up = self.x[j] >= self.up[j];
                let dir = if d < -OPT_TOL && !at_up {
                    1.0
                } else if d > OPT_TOL && !at_lo {
                    -1.0
                } else {
                    continue;
                };
                match rule {
                    Rule::Bland => {
                        enter = Some((j, dir, d));
                        break;
                    }
                    Rule::Dantzig => {
                        if enter.is_none_or(|(_, _, e)| d.abs() > e.abs()) {
                            enter = Some((j, dir, d));
                        }
                    }
                }
            }
            let Some((q, dir, _)) = enter else {
                return Ok(());
            };
            let alpha = self.ftran(q);

            // ratio test: x_B moves by -dir * t * alpha
            let mut best_t = self.up[q] - self.lo[q];
            let mut leave: Option<usize> = None;
            let mut best_piv = 0.0f64;
            for k in 0..self.m {
                let a = dir * alpha[k];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[k];
                let t = if a > 0.0 {
                    (self.x[b] - self.lo[b]) / a
                } else {
                    (self.up[b] - self.x[b]) / -a
                };
                let t = t.max(0.0);
                if !t.is_finite() {
                    continue;
                }
                let tol = 1e-12 * (1.0 + t);
                let better = if !best_t.is_finite() || t < best_t - tol {
                    true
                } else if t <= best_t + tol {
                    match (leave, rule) {
                        (None, _) => false,
                        (Some(_), Rule::Dantzig) => a.abs() > best_piv,
                        (Some(l), Rule::Bland) => b < self.basis[l],
                    }
                } else {
                    false
                };
                if better {
                    best_t = t;
                    leave = Some(k);
                    best_piv = a.abs();
                }
            }
            if !best_t.is_finite() {
                return Err(Error::Solver("objective is unbounded".into()));
            }
            self.iterations += 1;
            let t = best_t;
            if t <= 1e-14 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    rule = Rule::Bland;
                }
            } else {
                degenerate = 0;
                rule = Rule::Dantzig;
            }
            // move
            self.x[q] += dir * t;
            for k in 0..self.m {
                let b = self.basis[k];
                self.x[b] -= dir * t * alpha[k];
            }
            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    let a = dir * alpha[r];
                    self.x[out] = if a > 0.0 { self.lo[out] } else { self.up[out] };
                    self.pivot(r, &alpha);
                    self.pos[out] = usize::MAX;
                    self.pos[q] = r;
                    self.basis[r] = q;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= ar;
        }
        for (k, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
        }
        for (k, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
        }
        self.since_refactor += 1;
    }
}

enum ColIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>, &'a [f64]),
    Unit(Option<(usize, f64)>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Sparse(it, s) => it.next().map(|&(i, v)| (i, v * s[i])),
            ColIter::Unit(o) => o.take(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn contradictory_bounds() {
        let mut s = LinearSystem::new();
        s.add_var(0.0, -1.0);
        assert!(matches!(lp_feasibility(&s).unwrap(), LpOutcome::Infeasible(_)));
    }

    #[test]
    fn contradictory_rows_have_certificate() {
        let mut s = LinearSystem::new();
        let x = s.add_var(0.0, 10.0);
        s.add_row(&[(x, 1.0)], -1.0);
        match lp_feasibility(&s).unwrap() {
            LpOutcome::Infeasible(c) => {
                assert!(c.min_violation > 0.5);
                // y (b - A x) > 0 on the whole box
                for xv in [0.0, 5.0, 10.0] {
                    assert!(c.farkas[0] * (-1.0 - xv) > 0.0);
                }
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y + s = 4, 3x + y + t = 6
        let mut s = LinearSystem::new();
        let x = s.add_var(0.0, 100.0);
        let y = s.add_var(0.0, 100.0);
        let s1 = s.add_var(0.0, 100.0);
        let s2 = s.add_var(0.0, 100.0);
        s.add_row(&[(x, 1.0), (y, 2.0), (s1, 1.0)], 4.0);
        s.add_row(&[(x, 3.0), (y, 1.0), (s2, 1.0)], 6.0);
        let sol = lp_minimize(&s, &[-1.0, -1.0, 0.0, 0.0]).unwrap().solution().unwrap();
        assert!((sol.x[x] - 1.6).abs() < 1e-12);
        assert!((sol.x[y] - 1.2).abs() < 1e-12);
        assert!((sol.objective + 2.8).abs() < 1e-12);
    }

    #[test]
    fn free_variables_and_bound_flips() {
        let mut s = LinearSystem::new();
        let x = s.add_var(f64::NEG_INFINITY, f64::INFINITY);
        let y = s.add_var(-1.0, 1.0);
        s.add_row(&[(x, 1.0), (y, 1.0)], 0.5);
        let sol = lp_minimize(&s, &[1.0, 0.0]).unwrap().solution().unwrap();
        assert!((sol.x[y] - 1.0).abs() < 1e-12);
        assert!((sol.x[x] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut s = LinearSystem::new();
        let x = s.add_var(0.0, f64::INFINITY);
        let y = s.add_var(0.0, f64::INFINITY);
        s.add_row(&[(x, 1.0), (y, -1.0)], 0.0);
        assert!(lp_minimize(&s, &[-1.0, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_feasible_boxes(
            seed_x in proptest::collection::vec(-3.0f64..3.0, 6),
            coefs in proptest::collection::vec(-2.0f64..2.0, 24),
            widths in proptest::collection::vec(0.0f64..2.0, 6),
            cost in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            // the system is built around a known interior point
            let mut s = LinearSystem::new();
            for j in 0..6 {
                s.add_var(seed_x[j] - widths[j], seed_x[j] + widths[j]);
            }
            for r in 0..4 {
                let row: Vec<(usize, f64)> = (0..6).map(|j| (j, coefs[r * 6 + j])).collect();
                let b: f64 = row.iter().map(|&(j, v)| v * seed_x[j]).sum();
                s.add_row(&row, b);
            }
            let sol = lp_feasibility(&s).unwrap().solution().unwrap();
            prop_assert!(s.max_violation(&sol.x) <= 1e-9);
            let opt = lp_minimize(&s, &cost).unwrap().solution().unwrap();
            prop_assert!(s.max_violation(&opt.x) <= 1e-9);
            let at_seed: f64 = cost.iter().zip(&seed_x).map(|(c, x)| c * x).sum();
            prop_assert!(opt.objective <= at_seed + 1e-9);
        }
    }
}
