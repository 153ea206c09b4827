//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::model::{Model, VarKind};
use crate::simplex::solve_with_bounds;
use crate::solution::{Solution, SolveStats, Status, INT_TOL};

#[derive(Debug, Clone)]
pub struct MilpLimits {
    pub max_nodes: usize,
    /// Wall-clock cap. Leave unset when reproducibility matters.
    pub time_limit: Option<Duration>,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

impl Default for MilpLimits {
    fn default() -> Self {
        MilpLimits {
            max_nodes: 200_000,
            time_limit: None,
            abs_gap: 1e-6,
            rel_gap: 1e-4,
        }
    }
}

impl MilpLimits {
    fn closes(&self, incumbent: f64, bound: f64) -> bool {
        let gap = incumbent - bound;
        gap <= self.abs_gap || gap <= self.rel_gap * incumbent.abs()
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // lowest bound, then the most recently created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.id.cmp(&other.id))
    }
}

/// Most fractional binary, ties broken by lowest index.
fn branching_var(model: &Model, values: &[f64]) -> Option<usize> {
    let mut best = None;
    let mut best_frac = INT_TOL;
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let x = values[j];
        let frac = (x - x.floor()).min(x.ceil() - x);
        if frac > best_frac + 1e-12 {
            best_frac = frac;
            best = Some(j);
        }
    }
    best
}

/// Solves `model` to optimality within `limits` by best-first
/// branch-and-bound on LP relaxations.
pub fn solve_milp(model: &Model, limits: &MilpLimits) -> Solution {
    let start = Instant::now();
    let base_lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let mut lower = base_lower.clone();
    let mut upper = base_upper.clone();

    let mut stats = SolveStats::default();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        fixes: Vec::new(),
    });
    next_id += 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut limit_hit = false;
    let mut numerical_trouble = false;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if limits.closes(*inc, node.bound) {
                heap.push(node);
                break;
            }
        }
        let out_of_time = limits.time_limit.is_some_and(|t| start.elapsed() >= t);
        if stats.nodes >= limits.max_nodes || out_of_time {
            heap.push(node);
            limit_hit = true;
            break;
        }

        lower.copy_from_slice(&base_lower);
        upper.copy_from_slice(&base_upper);
        for &(j, v) in &node.fixes {
            lower[j] = v;
            upper[j] = v;
        }
        let lp = solve_with_bounds(model, &lower, &upper, false);
        stats.nodes += 1;
        stats.simplex_iterations += lp.stats.simplex_iterations;

        match lp.status {
            Status::Optimal => {}
            Status::Infeasible => {
                record(&mut stats, &heap, &incumbent);
                continue;
            }
            Status::Unbounded => {
                return Solution::without_point(Status::Unbounded, stats);
            }
            _ => {
                if node.fixes.is_empty() {
                    return Solution::without_point(Status::NumericalFailure, stats);
                }
                numerical_trouble = true;
                record(&mut stats, &heap, &incumbent);
                continue;
            }
        }

        let pruned = incumbent
            .as_ref()
            .is_some_and(|(inc, _)| limits.closes(*inc, lp.objective));
        if !pruned {
            match branching_var(model, &lp.values) {
                None => {
                    let (obj, vals) = polish(model, &lower, &upper, lp.objective, lp.values);
                    if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                        incumbent = Some((obj, vals));
                    }
                }
                Some(j) => {
                    let key = lp.objective.max(node.bound);
                    for v in [0.0, 1.0] {
                        let mut fixes = node.fixes.clone();
                        fixes.push((j, v));
                        heap.push(Node {
                            bound: key,
                            id: next_id,
                            fixes,
                        });
                        next_id += 1;
                    }
                }
            }
        }
        record(&mut stats, &heap, &incumbent);
    }

    let lb = heap
        .peek()
        .map(|n| n.bound)
        .or(incumbent.as_ref().map(|(o, _)| *o))
        .unwrap_or(f64::INFINITY);
    match incumbent {
        None => {
            let status = if limit_hit {
                Status::GapLimit
            } else if numerical_trouble {
                Status::NumericalFailure
            } else {
                Status::Infeasible
            };
            let mut s = Solution::without_point(status, stats);
            s.bound = lb;
            s
        }
        Some((obj, values)) => {
            let lb = lb.min(obj);
            let gap_abs = (obj - lb).max(0.0);
            Solution {
                status: if limit_hit {
                    Status::GapLimit
                } else {
                    Status::Optimal
                },
                values,
                objective: obj,
                bound: lb,
                gap_abs,
                gap_rel: gap_abs / obj.abs().max(1e-10),
                stats,
                duals: None,
            }
        }
    }
}

fn record(stats: &mut SolveStats, heap: &BinaryHeap<Node>, incumbent: &Option<(f64, Vec<f64>)>) {
    let inc = incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o);
    let lb = heap.peek().map_or(inc, |n| n.bound.min(inc));
    stats.bound_trace.push((lb, inc));
}

/// Rounds binaries of an integral LP point and re-solves with them fixed, so
/// reported binaries are exactly 0 or 1.
fn polish(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
    objective: f64,
    values: Vec<f64>,
) -> (f64, Vec<f64>) {
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let r = values[j].round();
            lo[j] = r;
            up[j] = r;
        }
    }
    let lp = solve_with_bounds(model, &lo, &up, false);
    if lp.status == Status::Optimal {
        (lp.objective, lp.values)
    } else {
        (objective, values)
    }
}
