//! Random instance generators and brute-force oracles shared by the solver
//! test suites.

#![allow(dead_code)]

use netslice_milp::{Model, Sense, Solution, VarKind};
use rand::Rng;

/// Binomial coefficient, saturating.
pub fn choose(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Random feasible, bounded LP with at most 15 variables and 15 rows.
///
/// Every variable is nonnegative; boundedness comes from a covering row
/// `sum x <= B` or explicit upper bounds. Sizes are redrawn until brute-force
/// vertex enumeration stays below `budget` candidate bases.
pub fn random_lp<R: Rng>(rng: &mut R, budget: u128) -> Model {
    loop {
        let n = rng.gen_range(1..=15);
        let m = rng.gen_range(1..=15);
        let with_ub: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let n_eq = if m > 1 && rng.gen_bool(0.3) {
            rng.gen_range(1..=m.min(n).min(3))
        } else {
            0
        };
        let candidates = (m - n_eq) + n + with_ub.iter().filter(|b| **b).count();
        if n_eq > n || choose(candidates, n - n_eq) > budget {
            continue;
        }
        let mut model = Model::new("random-lp");
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let vars: Vec<_> = (0..n)
            .map(|j| {
                let ub = if with_ub[j] {
                    x0[j] + rng.gen_range(0.0..4.0)
                } else {
                    f64::INFINITY
                };
                let c = rng.gen_range(-5.0..5.0f64);
                model.add_continuous(format!("x{j}"), 0.0, ub, (c * 4.0).round() / 4.0)
            })
            .collect();
        // Row 0 bounds the feasible region.
        let total: f64 = x0.iter().sum();
        model.add_constraint(
            "cover",
            vars.iter().map(|&v| (v, 1.0)),
            Sense::Le,
            total + rng.gen_range(0.5..5.0),
        );
        for i in 1..m {
            let mut terms = Vec::new();
            for (j, &v) in vars.iter().enumerate() {
                if i <= n_eq && j + 1 < i {
                    // Equality rows are triangular in their leading columns,
                    // hence linearly independent.
                    continue;
                }
                if i <= n_eq && j + 1 == i {
                    terms.push((v, [-2.0, -1.0, 1.0, 3.0][rng.gen_range(0..4)]));
                } else if rng.gen_bool(0.6) {
                    terms.push((v, rng.gen_range(-4i32..=4) as f64));
                }
            }
            let act: f64 = terms.iter().map(|&(v, a)| a * x0[v.0]).sum();
            let (sense, rhs) = if i <= n_eq {
                (Sense::Eq, act)
            } else if rng.gen_bool(0.5) {
                (Sense::Le, act + rng.gen_range(0.0..3.0))
            } else {
                (Sense::Ge, act - rng.gen_range(0.0..3.0))
            };
            model.add_constraint(format!("r{i}"), terms, sense, rhs);
        }
        return model;
    }
}

/// Solves a dense square system by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is (numerically) singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let (top, rest) = a.split_at_mut(r);
                for (x, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Minimum objective over all vertices of a bounded LP, found by making
/// every combination of `n` constraints/bounds active. `None` if no vertex is
/// feasible.
pub fn vertex_enumeration(model: &Model) -> Option<f64> {
    let n = model.num_vars();
    // Candidate hyperplanes: (coefficients, rhs). Equalities are always active.
    let mut forced: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut optional: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &model.constraints {
        let mut row = vec![0.0; n];
        for &(v, a) in &c.terms {
            row[v.0] += a;
        }
        if c.sense == Sense::Eq {
            forced.push((row, c.rhs));
        } else {
            optional.push((row, c.rhs));
        }
    }
    for (j, v) in model.vars.iter().enumerate() {
        for b in [v.lower, v.upper] {
            if b.is_finite() {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                optional.push((row, b));
            }
        }
    }
    if forced.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for_each_subset(optional.len(), n - forced.len(), &mut |sel| {
        let mut a: Vec<Vec<f64>> = forced.iter().map(|r| r.0.clone()).collect();
        let mut b: Vec<f64> = forced.iter().map(|r| r.1).collect();
        for &i in sel {
            a.push(optional[i].0.clone());
            b.push(optional[i].1);
        }
        if let Some(x) = gauss_solve(a, b) {
            if model.max_violation(&x) <= 1e-7 {
                let obj = model.objective_value(&x);
                if best.is_none_or(|o| obj < o) {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

/// Random mixed-binary model: up to 12 binaries, 10 continuous variables
/// and 15 rows. Feasibility is not guaranteed.
pub fn random_milp<R: Rng>(rng: &mut R) -> Model {
    let nb = rng.gen_range(1..=12);
    let nc = rng.gen_range(0..=10);
    let m = rng.gen_range(1..=15);
    let mut model = Model::new("random-milp");
    let mut vars = Vec::new();
    for j in 0..nb {
        let c = (rng.gen_range(-10.0..10.0f64) * 8.0).round() / 8.0;
        vars.push(model.add_binary(format!("b{j}"), c));
    }
    for j in 0..nc {
        let c = (rng.gen_range(-5.0..5.0f64) * 8.0).round() / 8.0;
        let ub = rng.gen_range(1.0..6.0f64).round();
        vars.push(model.add_continuous(format!("y{j}"), 0.0, ub, c));
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.5) {
                terms.push((v, rng.gen_range(-5i32..=5) as f64));
            }
        }
        let rhs = rng.gen_range(-3i32..=8) as f64;
        let sense = match rng.gen_range(0..10) {
            0 => Sense::Eq,
            1..=6 => Sense::Le,
            _ => Sense::Ge,
        };
        model.add_constraint(format!("r{i}"), terms, sense, rhs);
    }
    model
}

/// Exhaustive oracle: fix every binary assignment and solve the remaining LP
/// with `leaf_lp`. Returns the best objective, or `None` if all leaves are
/// infeasible.
pub fn exhaustive_milp(model: &Model, leaf_lp: impl Fn(&Model) -> Option<f64>) -> Option<f64> {
    let bins: Vec<usize> = (0..model.num_vars())
        .filter(|&j| model.vars[j].kind == VarKind::Binary)
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut leaf = model.clone();
        for (bit, &j) in bins.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            leaf.vars[j].lower = v;
            leaf.vars[j].upper = v;
            leaf.vars[j].kind = VarKind::Continuous;
        }
        if let Some(obj) = leaf_lp(&leaf) {
            if best.is_none_or(|b| obj < b) {
                best = Some(obj);
            }
        }
    }
    best
}

/// Recomputes the dual bound from `sol.duals` without trusting the solver's
/// own figure: sign conditions on row multipliers, then the bound term each
/// reduced cost selects. Returns `(dual objective, worst sign violation)`.
pub fn independent_dual_bound(model: &Model, sol: &Solution) -> Option<(f64, f64)> {
    let cert = sol.duals.as_ref()?;
    let y = &cert.row_duals;
    let mut worst_sign: f64 = 0.0;
    let mut d: Vec<f64> = model.vars.iter().map(|v| v.cost).collect();
    let mut obj = 0.0;
    for (c, &yi) in model.constraints.iter().zip(y) {
        match c.sense {
            Sense::Le => worst_sign = worst_sign.max(yi),
            Sense::Ge => worst_sign = worst_sign.max(-yi),
            Sense::Eq => {}
        }
        obj += yi * c.rhs;
        for &(v, a) in &c.terms {
            d[v.0] -= a * yi;
        }
    }
    for (j, v) in model.vars.iter().enumerate() {
        if d[j] > 0.0 {
            if v.lower.is_finite() {
                obj += d[j] * v.lower;
            } else {
                worst_sign = worst_sign.max(d[j]);
            }
        } else if d[j] < 0.0 {
            if v.upper.is_finite() {
                obj += d[j] * v.upper;
            } else {
                worst_sign = worst_sign.max(-d[j]);
            }
        }
    }
    Some((obj, worst_sign))
}
