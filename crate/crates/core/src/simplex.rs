//! Bounded-variable revised simplex.
//!
//! Solves
//!
//! ```text
//! minimize  c'x   subject to  A x <= b,  l <= x <= u
//! ```
//!
//! with a dense explicit basis inverse updated by elementary row operations.
//! Each row gets a slack; rows whose slack would start negative also get an
//! artificial, and a phase-one objective drives those to zero. Pricing
//! is Dantzig's rule, switching to Bland's lowest-index rule while the method
//! is stalling on degenerate pivots.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Sparse columns of A as `(row, value)`.
    columns: Vec<Vec<(u32, f64)>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    /// A program with the given costs and bounds and no rows yet.
    ///
    /// Every variable needs a finite lower bound or a finite upper bound.
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} costs but {} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for j in 0..n {
            if !objective[j].is_finite()
                || lower[j].is_nan()
                || upper[j].is_nan()
                || lower[j] > upper[j]
                || (lower[j].is_infinite() && upper[j].is_infinite())
            {
                return Err(Error::InvalidParameter(format!(
                    "variable {j}: cost {} bounds [{}, {}]",
                    objective[j], lower[j], upper[j]
                )));
            }
        }
        Ok(LinearProgram {
            objective,
            lower,
            upper,
            columns: vec![Vec::new(); n],
            rhs: Vec::new(),
        })
    }

    /// Appends the row `sum coeffs <= rhs`.
    pub fn add_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Result<()> {
        let row = self.rhs.len() as u32;
        for (j, v) in coeffs {
            if j >= self.columns.len() || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("bad coefficient ({j}, {v})")));
            }
            if v != 0.0 {
                self.columns[j].push((row, v));
            }
        }
        if !rhs.is_finite() {
            return Err(Error::InvalidParameter(format!("row {row}: rhs {rhs}")));
        }
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn from_dense(
        objective: Vec<f64>,
        rows: &[Vec<f64>],
        rhs: &[f64],
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        let mut lp = LinearProgram::new(objective, lower, upper)?;
        for (row, &b) in rows.iter().zip(rhs) {
            if row.len() != lp.num_vars() {
                return Err(Error::DimensionMismatch("row length".into()));
            }
            lp.add_row(row.iter().copied().enumerate(), b)?;
        }
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn column(&self, j: usize) -> &[(u32, f64)] {
        &self.columns[j]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `A x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for (col, &v) in self.columns.iter().zip(x) {
            for &(i, a) in col {
                out[i as usize] += a * v;
            }
        }
        out
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .row_activity(x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| (ax - b).max(0.0))
            .fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Text dump for cross-checking with other solvers. Not a stable format.
    pub fn to_debug_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "MINIMIZE {} VARS {} ROWS", self.num_vars(), self.num_rows());
        let _ = write!(out, "OBJ");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " x{j}:{c}");
            }
        }
        out.push('\n');
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_rows()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                rows[i as usize].push((j, a));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let _ = write!(out, "ROW{i}");
            for (j, a) in row {
                let _ = write!(out, " x{j}:{a}");
            }
            let _ = writeln!(out, " <= {}", self.rhs[i]);
        }
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "BOUND x{j} {} {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    IterationLimit,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    pub max_iters: usize,
    /// Primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Rebuild the basis inverse from scratch after this many pivots.
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iters: 50_000,
            feasibility_tol: 1e-8,
            optimality_tol: 1e-7,
            refactor_every: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Largest optimality-condition violation at termination: wrong-signed
    /// reduced cost or primal infeasibility.
    pub kkt_residual: f64,
}

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    /// Columns beyond the structural ones: slacks (+e_i) then artificials (-e_i).
    extra: Vec<(usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    /// Row position of each basic variable, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    /// Row-major m x m basis inverse.
    binv: Vec<f64>,
    duals: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    stalled: usize,
}

impl<'a> Simplex<'a> {
    fn total_vars(&self) -> usize {
        self.n + self.extra.len()
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.lp.columns[j] {
                f(i as usize, a);
            }
        } else {
            let (i, a) = self.extra[j - self.n];
            f(i, a);
        }
    }

    fn new(lp: &'a LinearProgram, opts: SimplexOptions) -> Self {
        let (m, n) = (lp.num_rows(), lp.num_vars());
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut x: Vec<f64> = (0..n)
            .map(|j| if lower[j].is_finite() { lower[j] } else { upper[j] })
            .collect();
        let mut at_upper: Vec<bool> = (0..n).map(|j| !lower[j].is_finite()).collect();
        let activity = lp.row_activity(&x);
        // Slacks occupy n..n+m; artificials follow for rows whose slack
        // would start negative.
        let mut extra: Vec<(usize, f64)> = (0..m).map(|i| (i, 1.0)).collect();
        let mut basis = Vec::with_capacity(m);
        let mut binv = vec![0.0; m * m];
        let mut artificial_values = Vec::new();
        for i in 0..m {
            let r = lp.rhs[i] - activity[i];
            if r >= 0.0 {
                basis.push(n + i);
                binv[i * m + i] = 1.0;
                x.push(r);
            } else {
                basis.push(n + m + artificial_values.len());
                binv[i * m + i] = -1.0;
                extra.push((i, -1.0));
                artificial_values.push(-r);
                x.push(0.0);
            }
            lower.push(0.0);
            upper.push(f64::INFINITY);
            at_upper.push(false);
        }
        for v in artificial_values {
            x.push(v);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            at_upper.push(false);
        }
        let total = n + extra.len();
        let mut position = vec![usize::MAX; total];
        for (i, &b) in basis.iter().enumerate() {
            position[b] = i;
        }
        Simplex {
            lp,
            opts,
            m,
            n,
            extra,
            lower,
            upper,
            cost: vec![0.0; total],
            x,
            at_upper,
            basis,
            position,
            binv,
            duals: vec![0.0; m],
            iterations: 0,
            since_refactor: 0,
            stalled: 0,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        self.duals.iter_mut().for_each(|d| *d = 0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (d, r) in self.duals.iter_mut().zip(row) {
                    *d += c * r;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        self.for_column(j, |i, a| d -= self.duals[i] * a);
        d
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        self.for_column(j, |k, a| {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + k] * a;
            }
        });
        w
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and recomputes
    /// basic values and duals from it.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (col, &j) in self.basis.iter().enumerate() {
            self.for_column(j, |i, v| a[i * m + col] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()))
                .expect("non-empty range");
            let pivot = a[p * m + c];
            if pivot.abs() < 1e-12 {
                return Err(Error::InvalidParameter("singular simplex basis".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let scale = 1.0 / pivot;
            for k in 0..m {
                a[c * m + k] *= scale;
                inv[c * m + k] *= scale;
            }
            for r in 0..m {
                let f = a[r * m + c];
                if r != c && f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // inv = B^-1 with rows indexed by basis position.
        self.binv = inv;
        self.recompute_basic_values();
        self.recompute_duals();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.lp.rhs.clone();
        for j in 0..self.total_vars() {
            if self.position[j] == usize::MAX && self.x[j] != 0.0 {
                let v = self.x[j];
                self.for_column(j, |i, a| r[i] -= a * v);
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = row.iter().zip(&r).map(|(b, v)| b * v).sum();
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.total_vars() {
            if self.position[j] != usize::MAX || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let improving = if self.at_upper[j] { d > tol } else { d < -tol };
            if !improving {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn step(&mut self, bland: bool) -> Result<Step> {
        let Some((q, dq)) = self.choose_entering(bland) else {
            return Ok(Step::Optimal);
        };
        let sigma = if self.at_upper[q] { -1.0 } else { 1.0 };
        let w = self.ftran(q);

        // Ratio test: basic i moves by -sigma * theta * w[i].
        let mut theta = self.upper[q] - self.lower[q];
        let mut leave: Option<(usize, bool)> = None;
        for i in 0..self.m {
            let s = sigma * w[i];
            if s.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let (limit, to_upper) = if s > 0.0 {
                ((self.x[b] - self.lower[b]) / s, false)
            } else if self.upper[b].is_finite() {
                ((self.upper[b] - self.x[b]) / -s, true)
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let better = match leave {
                None => limit < theta,
                Some((r, _)) => {
                    limit < theta - 1e-12
                        || (limit <= theta + 1e-12
                            && if bland {
                                b < self.basis[r]
                            } else {
                                w[i].abs() > w[r].abs()
                            })
                }
            };
            if better {
                theta = theta.min(limit);
                leave = Some((i, to_upper));
            }
        }
        if theta.is_infinite() {
            return Ok(Step::Unbounded);
        }

        if theta <= 1e-12 {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        for i in 0..self.m {
            if w[i] != 0.0 {
                let b = self.basis[i];
                self.x[b] -= sigma * theta * w[i];
            }
        }
        self.x[q] += sigma * theta;

        match leave {
            None => {
                // Bound flip.
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.upper[q] } else { self.lower[q] };
            }
            Some((r, to_upper)) => {
                let m = self.m;
                let leaving = self.basis[r];
                self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                self.at_upper[leaving] = to_upper;
                self.position[leaving] = usize::MAX;
                self.basis[r] = q;
                self.position[q] = r;
                self.at_upper[q] = false;

                let wr = w[r];
                let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / wr).collect();
                // y += (d_q / w_r) * (row r of the old inverse).
                for (d, p) in self.duals.iter_mut().zip(&pivot_row) {
                    *d += dq * p;
                }
                for i in 0..m {
                    let row = &mut self.binv[i * m..(i + 1) * m];
                    if i == r {
                        row.copy_from_slice(&pivot_row);
                    } else if w[i] != 0.0 {
                        let f = w[i];
                        for (v, p) in row.iter_mut().zip(&pivot_row) {
                            *v -= f * p;
                        }
                    }
                }
                self.since_refactor += 1;
            }
        }
        self.iterations += 1;
        Ok(Step::Moved)
    }

    /// Runs pivots under the current costs until optimal or out of budget.
    fn run(&mut self) -> Result<LpStatus> {
        self.recompute_duals();
        loop {
            if self.iterations >= self.opts.max_iters {
                return Ok(LpStatus::IterationLimit);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let bland = self.stalled >= STALL_LIMIT;
            match self.step(bland)? {
                Step::Moved => {}
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::Optimal => {
                    if self.since_refactor == 0 {
                        return Ok(LpStatus::Optimal);
                    }
                    // Confirm against a fresh factorization before stopping.
                    self.refactor()?;
                    if self.choose_entering(false).is_none() {
                        return Ok(LpStatus::Optimal);
                    }
                }
            }
        }
    }

    fn kkt_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.total_vars() {
            let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
            worst = worst.max(l - v).max(v - u);
            if self.position[j] == usize::MAX && l < u {
                let d = self.reduced_cost(j);
                worst = worst.max(if self.at_upper[j] { d } else { -d });
            }
        }
        worst
    }
}

pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome> {
    let mut s = Simplex::new(lp, *opts);
    let n = lp.num_vars();
    let artificials: Vec<usize> = (n..s.total_vars()).filter(|&j| s.is_artificial(j)).collect();

    let finish = |s: &Simplex, status: LpStatus| {
        let x: Vec<f64> = (0..n)
            .map(|j| s.x[j].clamp(lp.lower[j], lp.upper[j]))
            .collect();
        LpOutcome {
            objective: lp.objective_value(&x),
            x,
            status,
            iterations: s.iterations,
            kkt_residual: s.kkt_residual(),
        }
    };

    if !artificials.is_empty() {
        for &j in &artificials {
            s.cost[j] = 1.0;
        }
        let status = s.run()?;
        if status != LpStatus::Optimal {
            return Ok(finish(&s, status));
        }
        let infeasibility: f64 = artificials.iter().map(|&j| s.x[j]).sum();
        let scale = lp.rhs.iter().map(|b| b.abs()).fold(1.0, f64::max);
        if infeasibility > opts.feasibility_tol * scale {
            return Ok(finish(&s, LpStatus::Infeasible));
        }
        for &j in &artificials {
            s.cost[j] = 0.0;
            s.upper[j] = 0.0;
            if s.position[j] == usize::MAX {
                s.x[j] = 0.0;
                s.at_upper[j] = false;
            }
        }
    }
    s.cost[..n].copy_from_slice(&lp.objective);
    s.stalled = 0;
    let status = s.run()?;
    Ok(finish(&s, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve_default(lp: &LinearProgram) -> LpOutcome {
        solve(lp, &SimplexOptions::default()).unwrap()
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36.
        let lp = LinearProgram::from_dense(
            vec![-3.0, -5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        )
        .unwrap();
        let out = solve_default(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.objective, -36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.x[1], 6.0, epsilon = 1e-9);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y s.t. x + y >= 2, x - y <= 1.
        let lp = LinearProgram::from_dense(
            vec![1.0, 2.0],
            &[vec![-1.0, -1.0], vec![1.0, -1.0]],
            &[-2.0, 1.0],
            vec![0.0, 0.0],
            vec![10.0, 10.0],
        )
        .unwrap();
        let out = solve_default(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        // Cheapest: x = 1.5, y = 0.5 -> 2.5.
        assert_abs_diff_eq!(out.objective, 2.5, epsilon = 1e-9);
        assert!(lp.max_violation(&out.x) < 1e-9);
    }

    #[test]
    fn bound_flips_only() {
        // No rows: each variable goes to the bound its cost prefers.
        let lp = LinearProgram::new(vec![-1.0, 2.0, -0.5], vec![0.0, -1.0, 1.0], vec![1.0, 3.0, 4.0]).unwrap();
        let out = solve_default(&lp);
        assert_eq!(out.x, vec![1.0, -1.0, 4.0]);
        assert_abs_diff_eq!(out.objective, -1.0 - 2.0 - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let lp = LinearProgram::from_dense(
            vec![1.0],
            &[vec![1.0], vec![-1.0]],
            &[1.0, -2.0],
            vec![0.0],
            vec![f64::INFINITY],
        )
        .unwrap();
        assert_eq!(solve_default(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram::from_dense(
            vec![-1.0, 0.0],
            &[vec![1.0, -1.0]],
            &[1.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        )
        .unwrap();
        assert_eq!(solve_default(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn iteration_limit_is_a_status() {
        let lp = LinearProgram::from_dense(
            vec![-3.0, -5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        )
        .unwrap();
        let opts = SimplexOptions {
            max_iters: 1,
            ..SimplexOptions::default()
        };
        assert_eq!(solve(&lp, &opts).unwrap().status, LpStatus::IterationLimit);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance (as a minimisation).
        let lp = LinearProgram::from_dense(
            vec![-0.75, 150.0, -0.02, 6.0],
            &[
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            &[0.0, 0.0, 1.0],
            vec![0.0; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let out = solve_default(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.objective, -0.05, epsilon = 1e-9);
    }

    #[test]
    fn refactoring_preserves_answer() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..8).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0).collect())
            .collect();
        let b: Vec<f64> = (0..6).map(|i| 1.0 + i as f64 * 0.5).collect();
        let c: Vec<f64> = (0..8).map(|j| (j as f64 - 3.5) * 0.3).collect();
        let lp = LinearProgram::from_dense(c, &rows, &b, vec![0.0; 8], vec![2.0; 8]).unwrap();
        let a = solve_default(&lp);
        let b = solve(&lp, &SimplexOptions { refactor_every: 1, ..SimplexOptions::default() }).unwrap();
        assert_eq!(a.status, LpStatus::Optimal);
        assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-9);
        assert!(a.kkt_residual < 1e-7 && b.kkt_residual < 1e-7);
    }

    #[test]
    fn rejects_free_variables_and_bad_bounds() {
        assert!(LinearProgram::new(vec![1.0], vec![f64::NEG_INFINITY], vec![f64::INFINITY]).is_err());
        assert!(LinearProgram::new(vec![1.0], vec![2.0], vec![1.0]).is_err());
        assert!(LinearProgram::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn debug_dump_lists_everything() {
        let lp = LinearProgram::from_dense(vec![1.0, 0.0], &[vec![1.0, -1.0]], &[3.0], vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap();
        let text = lp.to_debug_string();
        assert!(text.contains("OBJ x0:1\n"));
        assert!(text.contains("ROW0 x0:1 x1:-1 <= 3"));
        assert!(text.contains("BOUND x1 0 1"));
    }
}
