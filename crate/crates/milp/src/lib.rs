//! A small mixed-binary linear programming toolkit: model building, a sparse
//! revised simplex, best-first branch-and-bound and LP-format I/O.

#![allow(clippy::needless_range_loop)]

pub mod branch;
pub mod lp_format;
mod lu;
pub mod model;
pub mod simplex;
pub mod solution;

pub use branch::{solve_milp, MilpLimits};
pub use lp_format::{parse_lp, write_lp, LpParseError};
pub use model::{ConstrId, Constraint, Model, ModelError, Sense, VarId, VarKind, Variable};
pub use simplex::solve_lp;
pub use solution::{
    dual_objective, DualCertificate, Solution, SolveStats, Status, FEAS_TOL, INT_TOL,
};
