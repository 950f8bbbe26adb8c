//! Heterogeneous cloud resource allocation.
//!
//! This crate selects a mix of cloud instance types that covers a resource
//! demand vector at minimum cost, trading off provider consolidation,
//! volume discounts, and demand shortfall through a penalized cost
//! objective. It ships three cooperating engines:
//!
//! * a log-barrier interior-point solver for the continuous relaxation
//!   ([`solver::continuous`]), with multi-start search for the nonconvex
//!   consolidation regime,
//! * a branch-and-bound integer solver with secant-relaxation lower bounds
//!   and a greedy rounding heuristic ([`solver::integer`]),
//! * a simulation of the Kubernetes Cluster Autoscaler's homogeneous
//!   node-pool scaling ([`autoscaler`]) used as the comparison baseline.
//!
//! Supporting modules ingest instance catalogs ([`catalog`]), define the
//! allocation problem and its derivatives ([`model`]), verify KKT
//! optimality conditions ([`kkt`]), compute evaluation metrics
//! ([`metrics`]), and drive the bundled benchmark scenarios
//! ([`scenarios`]).

pub mod autoscaler;
pub mod catalog;
pub mod error;
pub mod kkt;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod report;
pub mod scenarios;
pub mod solver;

pub use catalog::{InstanceCatalog, InstanceType, ResourceSchema};
pub use error::{Error, Result};
pub use model::{Allocation, AllocationProblem, ObjectiveBreakdown, PenaltyParams};
pub use solver::continuous::{BarrierSettings, ContinuousSolution};
pub use solver::integer::{IntegerSolution, SearchBudget};
