//! Bounded-variable revised primal simplex.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` carrying the row's
//! bounds, so the working system is `A x - r = 0` with all variables boxed
//! (possibly by infinite bounds). Phase 1 adds artificial columns only for
//! rows whose logical starts out of bounds.

use crate::lu::{Csc, LuFactor};
use crate::model::{Model, Sense};
use crate::solution::{dual_objective, DualCertificate, Solution, SolveStats, Status, FEAS_TOL};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
    Numerical,
}

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    cols: Csc,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: Option<LuFactor>,
    etas: Vec<Eta>,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
    buf_row: Vec<f64>,
}

/// Scale factors applied before solving; powers of two so they are exact.
struct Scaling {
    row: Vec<f64>,
    col: Vec<f64>,
    obj: f64,
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round().clamp(-60.0, 60.0) as i32)
}

fn compute_scaling(model: &Model) -> Scaling {
    let m = model.num_constraints();
    let n = model.num_vars();
    let mut row = vec![1.0; m];
    let mut col = vec![1.0; n];
    for _ in 0..4 {
        for (i, c) in model.constraints.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(v, a) in &c.terms {
                let s = (a * col[v.0]).abs();
                lo = lo.min(s);
                hi = hi.max(s);
            }
            if hi > 0.0 {
                row[i] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, c) in model.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                let s = (a * row[i]).abs();
                lo[v.0] = lo[v.0].min(s);
                hi[v.0] = hi[v.0].max(s);
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                col[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
            }
        }
    }
    let cmax = model
        .vars
        .iter()
        .zip(&col)
        .map(|(v, s)| (v.cost * s).abs())
        .fold(0.0, f64::max);
    let obj = if cmax > 0.0 { pow2(1.0 / cmax) } else { 1.0 };
    Scaling { row, col, obj }
}

impl Simplex {
    fn col_of_logical(&self, i: usize) -> usize {
        self.n_struct + i
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn refactor(&mut self) -> bool {
        self.etas.clear();
        for _ in 0..4 {
            match LuFactor::factorize(self.m, &self.cols, &self.basis) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.recompute_basics();
                    return true;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.basis[pos];
                        let new = self.col_of_logical(row);
                        if self.pos_of[new] != usize::MAX {
                            return false;
                        }
                        self.pos_of[old] = usize::MAX;
                        self.x[old] = self.nearest_bound(old, self.x[old]);
                        self.basis[pos] = new;
                        self.pos_of[new] = pos;
                    }
                }
            }
        }
        false
    }

    fn nearest_bound(&self, j: usize, v: f64) -> f64 {
        let (l, u) = (self.lower[j], self.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (v - l).abs() <= (u - v).abs() {
                    l
                } else {
                    u
                }
            }
            (true, false) => l,
            (false, true) => u,
            (false, false) => 0.0,
        }
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = std::mem::take(&mut self.buf_row);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.cols.ncols() {
            if self.pos_of[j] != usize::MAX {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                let (idx, val) = self.cols.col(j);
                for (&i, &a) in idx.iter().zip(val) {
                    rhs[i] -= a * xj;
                }
            }
        }
        let mut out = vec![0.0; m];
        self.lu.as_ref().unwrap().ftran(&mut rhs, &mut out);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = out[p];
        }
        self.buf_row = rhs;
    }

    fn ftran_col(&mut self, j: usize, out: &mut [f64]) {
        let mut rhs = std::mem::take(&mut self.buf_row);
        let (idx, val) = self.cols.col(j);
        for (&i, &a) in idx.iter().zip(val) {
            rhs[i] = a;
        }
        self.lu.as_ref().unwrap().ftran(&mut rhs, out);
        for e in &self.etas {
            let wp = out[e.pos] / e.pivot;
            out[e.pos] = wp;
            if wp != 0.0 {
                for (&i, &v) in e.idx.iter().zip(&e.val) {
                    out[i] -= v * wp;
                }
            }
        }
        self.buf_row = rhs;
    }

    fn btran(&mut self, cb: &mut [f64], y: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = cb[e.pos];
            for (&i, &v) in e.idx.iter().zip(&e.val) {
                s -= v * cb[i];
            }
            cb[e.pos] = s / e.pivot;
        }
        self.lu.as_ref().unwrap().btran(cb, y);
    }

    fn duals(&mut self, cost: &[f64]) -> Vec<f64> {
        let mut cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        let mut y = vec![0.0; self.m];
        self.btran(&mut cb, &mut y);
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        let (idx, val) = self.cols.col(j);
        let mut d = cost[j];
        for (&i, &a) in idx.iter().zip(val) {
            d -= a * y[i];
        }
        d
    }

    /// Direction in which nonbasic `j` should move to improve, if any.
    fn improving_dir(&self, j: usize, d: f64) -> Option<f64> {
        let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
        if l == u {
            return None;
        }
        let at_lower = l.is_finite() && v <= l;
        let at_upper = u.is_finite() && v >= u;
        if d < -DUAL_TOL && !at_upper {
            Some(1.0)
        } else if d > DUAL_TOL && !at_lower {
            Some(-1.0)
        } else {
            None
        }
    }

    fn run(&mut self, cost: &[f64], phase_one: bool) -> Outcome {
        let ncols = self.cols.ncols();
        let mut w = vec![0.0; self.m];
        let mut phase_iters = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::IterationLimit;
            }
            if self.etas.len() >= REFACTOR_EVERY && !self.refactor() {
                return Outcome::Numerical;
            }
            let y = self.duals(cost);
            let bland = phase_iters >= self.bland_after;

            let mut entering = usize::MAX;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..ncols {
                if self.pos_of[j] != usize::MAX || self.is_fixed(j) {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                if let Some(s) = self.improving_dir(j, d) {
                    if bland {
                        entering = j;
                        dir = s;
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        entering = j;
                        dir = s;
                    }
                }
            }
            if entering == usize::MAX {
                return Outcome::Optimal;
            }
            let q = entering;
            self.ftran_col(q, &mut w);

            // Basic x_b moves at rate -dir * w[p] per unit step.
            let mut theta_max = f64::INFINITY;
            if !bland {
                for p in 0..self.m {
                    let alpha = dir * w[p];
                    if alpha.abs() < PIVOT_TOL {
                        continue;
                    }
                    let b = self.basis[p];
                    let t = if alpha > 0.0 {
                        if self.lower[b].is_finite() {
                            (self.x[b] - self.lower[b] + PRIMAL_TOL) / alpha
                        } else {
                            continue;
                        }
                    } else if self.upper[b].is_finite() {
                        (self.upper[b] - self.x[b] + PRIMAL_TOL) / -alpha
                    } else {
                        continue;
                    };
                    theta_max = theta_max.min(t);
                }
            }
            let mut leave = usize::MAX;
            let mut leave_ratio = f64::INFINITY;
            let mut leave_alpha = 0.0f64;
            for p in 0..self.m {
                let alpha = dir * w[p];
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let b = self.basis[p];
                let ratio = if alpha > 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    ((self.x[b] - self.lower[b]) / alpha).max(0.0)
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    ((self.upper[b] - self.x[b]) / -alpha).max(0.0)
                };
                if bland {
                    let better = ratio < leave_ratio - 1e-12
                        || (ratio <= leave_ratio + 1e-12
                            && leave != usize::MAX
                            && b < self.basis[leave]);
                    if leave == usize::MAX || better {
                        leave = p;
                        leave_ratio = ratio;
                        leave_alpha = alpha;
                    }
                } else if ratio <= theta_max && alpha.abs() > leave_alpha.abs() {
                    leave = p;
                    leave_ratio = ratio;
                    leave_alpha = alpha;
                }
            }
            let flip = self.upper[q] - self.lower[q];
            if leave == usize::MAX && !flip.is_finite() {
                return Outcome::Unbounded;
            }
            self.iterations += 1;
            phase_iters += 1;

            if leave == usize::MAX || flip <= leave_ratio {
                // Bound flip: entering jumps to its other bound.
                let t = flip;
                for p in 0..self.m {
                    if w[p] != 0.0 {
                        let b = self.basis[p];
                        self.x[b] -= dir * t * w[p];
                    }
                }
                self.x[q] = if dir > 0.0 {
                    self.upper[q]
                } else {
                    self.lower[q]
                };
                continue;
            }

            let t = leave_ratio;
            for p in 0..self.m {
                if w[p] != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= dir * t * w[p];
                }
            }
            self.x[q] += dir * t;
            let b = self.basis[leave];
            self.x[b] = if leave_alpha > 0.0 {
                self.lower[b]
            } else {
                self.upper[b]
            };
            if phase_one && b >= self.n_struct + self.m {
                // Artificial left the basis: pin it at zero for good.
                self.upper[b] = 0.0;
                self.x[b] = 0.0;
            }
            self.pos_of[b] = usize::MAX;
            self.basis[leave] = q;
            self.pos_of[q] = leave;

            let pivot = w[leave];
            let mut eta = Eta {
                pos: leave,
                pivot,
                idx: Vec::new(),
                val: Vec::new(),
            };
            for (p, &v) in w.iter().enumerate() {
                if p != leave && v != 0.0 {
                    eta.idx.push(p);
                    eta.val.push(v);
                }
            }
            self.etas.push(eta);
            w.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Solves the LP relaxation of `model` (binaries treated as continuous in
/// their bounds). Optimal solutions carry a dual certificate.
pub fn solve_lp(model: &Model) -> Solution {
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    solve_with_bounds(model, &lower, &upper, true)
}

/// Solves the LP with variable bounds overridden by `lower`/`upper`.
pub(crate) fn solve_with_bounds(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
    want_duals: bool,
) -> Solution {
    let n = model.num_vars();
    let m = model.num_constraints();
    let mut stats = SolveStats::default();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Solution::without_point(Status::Infeasible, stats);
    }
    let sc = compute_scaling(model);

    // Column-major copy of the scaled matrix plus logical columns.
    let mut counts = vec![0usize; n];
    for c in &model.constraints {
        for &(v, _) in &c.terms {
            counts[v.0] += 1;
        }
    }
    let mut starts = vec![0usize; n + 1];
    for j in 0..n {
        starts[j + 1] = starts[j] + counts[j];
    }
    let nnz = starts[n];
    let mut idx = vec![0usize; nnz];
    let mut val = vec![0.0; nnz];
    let mut fill = starts.clone();
    for (i, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            let k = fill[v.0];
            idx[k] = i;
            val[k] = a * sc.row[i] * sc.col[v.0];
            fill[v.0] += 1;
        }
    }
    let mut cols = Csc::with_capacity(n + 2 * m, nnz + 2 * m);
    for j in 0..n {
        cols.push_col((starts[j]..starts[j + 1]).map(|k| (idx[k], val[k])));
    }
    for i in 0..m {
        cols.push_col([(i, -1.0)]);
    }

    let mut lo = Vec::with_capacity(n + 2 * m);
    let mut up = Vec::with_capacity(n + 2 * m);
    let mut cost = Vec::with_capacity(n + 2 * m);
    for j in 0..n {
        lo.push(lower[j] / sc.col[j]);
        up.push(upper[j] / sc.col[j]);
        cost.push(model.vars[j].cost * sc.col[j] * sc.obj);
    }
    for (i, c) in model.constraints.iter().enumerate() {
        let b = c.rhs * sc.row[i];
        let (l, u) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, b),
            Sense::Ge => (b, f64::INFINITY),
            Sense::Eq => (b, b),
        };
        lo.push(l);
        up.push(u);
        cost.push(0.0);
    }

    let mut x = vec![0.0; n + m];
    for j in 0..n {
        x[j] = if lo[j].is_finite() {
            lo[j]
        } else if up[j].is_finite() {
            up[j]
        } else {
            0.0
        };
    }
    let mut activity = vec![0.0; m];
    for j in 0..n {
        if x[j] != 0.0 {
            let (ci, cv) = cols.col(j);
            for (&i, &a) in ci.iter().zip(cv) {
                activity[i] += a * x[j];
            }
        }
    }

    let mut basis = Vec::with_capacity(m);
    let mut art_rows = Vec::new();
    for i in 0..m {
        let r = activity[i];
        let j = n + i;
        if r < lo[j] - PRIMAL_TOL || r > up[j] + PRIMAL_TOL {
            // Logical sits at its violated bound; an artificial absorbs the gap.
            let bound = if r < lo[j] { lo[j] } else { up[j] };
            x[j] = bound;
            let gap = r - bound;
            art_rows.push((i, gap));
        } else {
            x[j] = r;
            basis.push((i, j));
        }
    }
    let n_total = n + m + art_rows.len();
    let mut basis_by_row = vec![usize::MAX; m];
    for &(i, j) in &basis {
        basis_by_row[i] = j;
    }
    for (k, &(i, gap)) in art_rows.iter().enumerate() {
        // Column s*e_i with value a >= 0 satisfies a_i x - r_i + s*a = 0.
        let s = if gap > 0.0 { -1.0 } else { 1.0 };
        cols.push_col([(i, s)]);
        lo.push(0.0);
        up.push(f64::INFINITY);
        cost.push(0.0);
        x.push(gap.abs());
        basis_by_row[i] = n + m + k;
    }
    let mut pos_of = vec![usize::MAX; n_total];
    for (p, &j) in basis_by_row.iter().enumerate() {
        pos_of[j] = p;
    }

    let mut sx = Simplex {
        m,
        n_struct: n,
        cols,
        lower: lo,
        upper: up,
        x,
        basis: basis_by_row,
        pos_of,
        lu: None,
        etas: Vec::new(),
        iterations: 0,
        bland_after: 10 * (m + n),
        max_iterations: 200 * (m + n) + 10_000,
        buf_row: vec![0.0; m],
    };
    if !sx.refactor() {
        return Solution::without_point(Status::NumericalFailure, stats);
    }

    if !art_rows.is_empty() {
        let mut c1 = vec![0.0; n_total];
        for k in 0..art_rows.len() {
            c1[n + m + k] = 1.0;
        }
        let out = sx.run(&c1, true);
        stats.simplex_iterations = sx.iterations;
        match out {
            Outcome::Optimal => {}
            Outcome::Unbounded | Outcome::Numerical => {
                return Solution::without_point(Status::NumericalFailure, stats)
            }
            Outcome::IterationLimit => {
                return Solution::without_point(Status::NumericalFailure, stats)
            }
        }
        if !sx.refactor() {
            return Solution::without_point(Status::NumericalFailure, stats);
        }
        let infeas: f64 = (n + m..n_total).map(|j| sx.x[j].abs()).sum();
        if infeas > 1e-7 {
            return Solution::without_point(Status::Infeasible, stats);
        }
        for j in n + m..n_total {
            sx.upper[j] = 0.0;
            if sx.pos_of[j] == usize::MAX {
                sx.x[j] = 0.0;
            }
        }
    }

    let out = sx.run(&cost, false);
    stats.simplex_iterations = sx.iterations;
    match out {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Solution::without_point(Status::Unbounded, stats),
        Outcome::IterationLimit | Outcome::Numerical => {
            return Solution::without_point(Status::NumericalFailure, stats)
        }
    }
    if !sx.refactor() {
        return Solution::without_point(Status::NumericalFailure, stats);
    }
    let mut values: Vec<f64> = (0..n).map(|j| sx.x[j] * sc.col[j]).collect();
    for j in 0..n {
        values[j] = values[j].clamp(lower[j], upper[j]);
    }
    let max_viol = model
        .constraints
        .iter()
        .map(|c| c.violation(&values))
        .fold(0.0, f64::max);
    if max_viol > FEAS_TOL {
        return Solution::without_point(Status::NumericalFailure, stats);
    }
    let objective = model.objective_value(&values);
    let duals = want_duals.then(|| {
        let ys = sx.duals(&cost);
        let row_duals: Vec<f64> = model
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let y = ys[i] * sc.row[i] / sc.obj;
                // Wrong-signed multipliers are pricing noise below tolerance.
                match c.sense {
                    Sense::Le if y > 0.0 => 0.0,
                    Sense::Ge if y < 0.0 => 0.0,
                    _ => y,
                }
            })
            .collect();
        let (dual_obj, reduced) = dual_objective(model, lower, upper, &row_duals, 1e-6);
        DualCertificate {
            row_duals,
            reduced_costs: reduced,
            objective: dual_obj,
        }
    });
    Solution {
        status: Status::Optimal,
        values,
        objective,
        bound: objective,
        gap_abs: 0.0,
        gap_rel: 0.0,
        stats,
        duals,
    }
}
