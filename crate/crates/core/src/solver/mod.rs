//! Continuous and integer solvers for the allocation problem.
//!
//! [`continuous`] solves the relaxation `x >= 0` by a log-barrier
//! interior-point method; [`integer`] wraps it in branch-and-bound with
//! valid lower bounds and provides the greedy rounding heuristic.

pub mod continuous;
pub mod integer;

mod engine;
mod subproblem;
