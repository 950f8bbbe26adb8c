//! Serializable report shapes shared by the CLI and the test suites.
//!
//! Reports are wrapped in an [`Envelope`] whose `metadata` carries the
//! wall-clock fields (timestamp, elapsed time). Everything under `report`
//! is a pure function of the inputs and the seed, so two runs with the
//! same configuration serialize byte-identically once `metadata` is
//! stripped.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kkt::{self, DualityGapEstimate, KktReport, Multipliers};
use crate::model::{AllocationProblem, ConstraintResiduals, ObjectiveBreakdown};
use crate::solver::continuous::{ContinuousSolution, IterationCounts, SolveMode};
use crate::solver::integer::{IntegerSolution, SolveMethod};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_unix_ms: u64,
    pub elapsed_ms: u64,
    pub tool_version: String,
}

impl Metadata {
    pub fn now(elapsed_ms: u64) -> Self {
        let generated_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Metadata {
            generated_unix_ms,
            elapsed_ms,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Wall-clock metadata plus a deterministic payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub metadata: Metadata,
    pub report: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(report: T, elapsed_ms: u64) -> Self {
        Envelope {
            metadata: Metadata::now(elapsed_ms),
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Summary of a continuous solve embedded in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationSummary {
    pub objective_total: f64,
    pub converged: bool,
    pub mode: SolveMode,
    pub iterations: IterationCounts,
    pub barrier_gap: f64,
    pub multipliers: Multipliers,
    pub x_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl RelaxationSummary {
    pub fn from_solution(sol: &ContinuousSolution, include_trace: bool) -> Self {
        RelaxationSummary {
            objective_total: sol.breakdown.total,
            converged: sol.converged,
            mode: sol.mode,
            iterations: sol.iterations,
            barrier_gap: sol.barrier_gap,
            multipliers: sol.multipliers.clone(),
            x_star: sol.x_star.counts.clone(),
            trace: include_trace.then(|| sol.trace.clone()),
        }
    }
}

/// Full solve report: integer allocation, objective breakdown, KKT
/// diagnostics of the relaxation, and search statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Vec<f64>,
    pub method: SolveMethod,
    pub breakdown: ObjectiveBreakdown,
    pub residuals: ConstraintResiduals,
    pub bound_gap: Option<f64>,
    pub nodes_explored: u64,
    pub relaxation: RelaxationSummary,
    pub kkt: KktReport,
    pub duality_gap: DualityGapEstimate,
}

pub fn build_solve_report(
    problem: &AllocationProblem,
    continuous: &ContinuousSolution,
    integer: &IntegerSolution,
    include_trace: bool,
) -> Result<SolveReport> {
    let kkt_report = kkt::kkt_report(problem, &continuous.x_star, &continuous.multipliers)?;
    let duality_gap =
        kkt::duality_gap_estimate(problem, &continuous.x_star, &continuous.multipliers)?;
    Ok(SolveReport {
        allocation: integer.x_hat.counts.clone(),
        method: integer.method,
        breakdown: integer.breakdown,
        residuals: integer.residuals.clone(),
        bound_gap: integer.bound_gap,
        nodes_explored: integer.nodes_explored,
        relaxation: RelaxationSummary::from_solution(continuous, include_trace),
        kkt: kkt_report,
        duality_gap,
    })
}

/// Machine-readable error object for the CLI's stderr stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
}

impl ErrorObject {
    pub fn from_error(err: &crate::error::Error) -> Self {
        let kind = match err {
            crate::error::Error::Parse { .. } => "parse",
            crate::error::Error::Validation(_) => "validation",
            crate::error::Error::Dimension(_) => "dimension",
            crate::error::Error::Infeasible(_) => "infeasible",
            crate::error::Error::UncoverableResource { .. } => "uncoverable_resource",
            crate::error::Error::BudgetExhausted(_) => "budget_exhausted",
            crate::error::Error::Io(_) => "io",
            crate::error::Error::Json(_) => "json",
            crate::error::Error::Csv(_) => "csv",
        };
        ErrorObject {
            kind: kind.to_string(),
            message: err.to_string(),
        }
    }
}
