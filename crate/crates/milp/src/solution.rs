use crate::model::Model;

/// Feasibility tolerance used for reported solutions.
pub const FEAS_TOL: f64 = 1e-6;
/// Integrality tolerance on binaries.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// A node or time limit stopped branch-and-bound; `values` holds the
    /// incumbent if one was found.
    GapLimit,
    /// The basis could not be refactorized into a usable state.
    NumericalFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::GapLimit => "gap-limit",
            Status::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub simplex_iterations: usize,
    pub nodes: usize,
    /// Global lower bound and incumbent after each processed node.
    pub bound_trace: Vec<(f64, f64)>,
}

/// Dual information for an LP optimum.
///
/// `row_duals[i]` prices constraint `i`; `reduced_costs[j] = c_j - A_j^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Lower bound proven by the solver (equals `objective` for LP optima).
    pub bound: f64,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub stats: SolveStats,
    pub duals: Option<DualCertificate>,
}

impl Solution {
    pub(crate) fn without_point(status: Status, stats: SolveStats) -> Self {
        Solution {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            bound: f64::NAN,
            gap_abs: f64::INFINITY,
            gap_rel: f64::INFINITY,
            stats,
            duals: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }
}

/// Evaluates the dual objective of `model` for the given row duals, using the
/// bound each multiplier's sign selects. Multipliers that would need an
/// infinite bound are treated as zero if below `tol`, otherwise the result is
/// `-inf`.
pub fn dual_objective(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
    row_duals: &[f64],
    tol: f64,
) -> (f64, Vec<f64>) {
    use crate::model::Sense;
    let mut reduced: Vec<f64> = model.vars.iter().map(|v| v.cost).collect();
    let mut obj = 0.0;
    for (c, &y) in model.constraints.iter().zip(row_duals) {
        for &(v, a) in &c.terms {
            reduced[v.0] -= a * y;
        }
        let allowed = match c.sense {
            Sense::Eq => true,
            Sense::Ge => y >= -tol,
            Sense::Le => y <= tol,
        };
        if !allowed {
            return (f64::NEG_INFINITY, reduced);
        }
        obj += y * c.rhs;
    }
    for (j, &d) in reduced.iter().enumerate() {
        if d > 0.0 {
            if lower[j].is_finite() {
                obj += d * lower[j];
            } else if d > tol {
                return (f64::NEG_INFINITY, reduced);
            }
        } else if d < 0.0 {
            if upper[j].is_finite() {
                obj += d * upper[j];
            } else if d < -tol {
                return (f64::NEG_INFINITY, reduced);
            }
        }
    }
    (obj, reduced)
}
