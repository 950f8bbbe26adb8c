//! Log-barrier interior-point solver for the continuous relaxation, plus
//! the multi-start wrapper for the nonconvex (`alpha > 0`) regime.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, InfeasibilityReport, Result};
use crate::kkt::Multipliers;
use crate::model::{self, Allocation, AllocationProblem, ObjectiveBreakdown};

use super::engine::{phase_one_search, PhaseOneResult, RowKind};
use super::subproblem::{prepare, PreparedSub, SubBuild, SubMode, SubProblem, SubSolution};

/// Barrier schedule and line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSettings {
    pub t_initial: f64,
    pub t_growth: f64,
    /// Gradient-norm stop for each centering.
    pub inner_tolerance: f64,
    /// Barrier-gap target `rows / t_final`.
    pub outer_tolerance: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            t_initial: 1.0,
            t_growth: 10.0,
            inner_tolerance: 1e-8,
            outer_tolerance: 1e-6,
            max_inner_iters: 200,
            max_outer_iters: 12,
            armijo_c: 0.01,
            backtrack_factor: 0.5,
        }
    }
}

impl BarrierSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_initial > 0.0)
            || !(self.t_growth > 1.0)
            || !(self.inner_tolerance > 0.0)
            || !(self.outer_tolerance > 0.0)
            || !(self.armijo_c > 0.0 && self.armijo_c < 1.0)
            || !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0)
        {
            return Err(Error::validation("barrier settings out of range"));
        }
        Ok(())
    }
}

/// Whether the hard waste constraints were kept or softened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Barrier,
    Penalty,
}

impl From<SubMode> for SolveMode {
    fn from(m: SubMode) -> Self {
        match m {
            SubMode::Barrier => SolveMode::Barrier,
            SubMode::Penalty | SubMode::PenaltyBoth => SolveMode::Penalty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IterationCounts {
    pub phase_one: usize,
    pub outer: usize,
    pub inner: usize,
}

/// Output of the continuous solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub x_star: Allocation,
    pub breakdown: ObjectiveBreakdown,
    /// Slack-derived multiplier estimates: `lambda_r = 1/(t * slack_lower_r)`,
    /// `nu_r = 1/(t * slack_upper_r)`, `omega_i = 1/(t * x_i)`.
    pub multipliers: Multipliers,
    pub iterations: IterationCounts,
    pub converged: bool,
    pub mode: SolveMode,
    /// Barrier gap `rows / t_final` at termination.
    pub barrier_gap: f64,
    /// Objective value after each accepted line-search step.
    pub trace: Vec<f64>,
}

fn base_box(problem: &AllocationProblem) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; problem.n()], problem.upper_bounds().to_vec())
}

fn check_coverable(problem: &AllocationProblem) -> Result<()> {
    match model::uncoverable_resource(problem) {
        Some(r) => Err(Error::UncoverableResource {
            resource: problem.catalog().schema.names[r].clone(),
        }),
        None => Ok(()),
    }
}

/// Solves the continuous relaxation from an optional strictly feasible
/// start (ignored and replaced by the phase-one point otherwise).
pub fn solve_relaxed(
    problem: &AllocationProblem,
    settings: &BarrierSettings,
    x0: Option<&Allocation>,
) -> Result<ContinuousSolution> {
    settings.validate()?;
    check_coverable(problem)?;
    let (lo, hi) = base_box(problem);
    match SubProblem::build(problem, &lo, &hi, false) {
        SubBuild::Infeasible(report) => Err(Error::Infeasible(report)),
        SubBuild::Point(x) => point_solution(problem, x),
        SubBuild::Sub(sub) => {
            let prepared = prepare(&sub, settings)?;
            let sol = x0
                .map(|a| project_to_free(&sub, &a.counts))
                .and_then(|xf| prepared.solve_from(&xf, settings, true))
                .unwrap_or_else(|| prepared.solve(settings, true));
            Ok(finish_solution(problem, &sub, sol))
        }
    }
}

/// Finds a strictly feasible allocation, or reports why none exists. The
/// method minimizes the maximum constraint violation with the same barrier
/// machinery on an auxiliary-slack problem.
pub fn phase_one(problem: &AllocationProblem) -> Result<Allocation> {
    let settings = BarrierSettings::default();
    check_coverable(problem)?;
    let (lo, hi) = base_box(problem);
    match SubProblem::build(problem, &lo, &hi, false) {
        SubBuild::Infeasible(report) => Err(Error::Infeasible(report)),
        SubBuild::Point(x) => {
            let alloc = Allocation::continuous(x);
            let residuals = model::constraint_residuals(problem, &alloc)?;
            if residuals.feasible(1e-9) {
                Ok(alloc)
            } else {
                Err(Error::Infeasible(InfeasibilityReport {
                    most_violated: "degenerate box point violates demand bounds".into(),
                    min_violation: -residuals
                        .lower
                        .iter()
                        .chain(&residuals.upper)
                        .fold(f64::INFINITY, |m, v| m.min(*v)),
                    empty_interior: false,
                }))
            }
        }
        SubBuild::Sub(sub) => {
            let plain = sub.plain_rows_for_phase_one();
            let (kept, relaxed) = plain;
            let y0 = sub.box_midpoint();
            match phase_one_search(&relaxed, &kept, &y0, &settings) {
                PhaseOneResult::Feasible { y, .. } => Ok(Allocation::continuous(sub.compose(&y))),
                PhaseOneResult::EmptyInterior {
                    min_violation,
                    worst_row,
                    ..
                } => Err(Error::Infeasible(InfeasibilityReport {
                    most_violated: sub.describe_row(relaxed.kinds[worst_row]),
                    min_violation,
                    empty_interior: true,
                })),
                PhaseOneResult::Infeasible {
                    min_violation,
                    worst_row,
                    ..
                } => Err(Error::Infeasible(InfeasibilityReport {
                    most_violated: sub.describe_row(relaxed.kinds[worst_row]),
                    min_violation,
                    empty_interior: false,
                })),
            }
        }
    }
}

/// Runs `solve_relaxed` from `starts` seeded initial points (the phase-one
/// point plus multiplicative jitters kept inside the strict interior) and
/// returns the best converged solution; deterministic for a fixed seed.
pub fn multi_start(
    problem: &AllocationProblem,
    settings: &BarrierSettings,
    starts: usize,
    seed: u64,
) -> Result<ContinuousSolution> {
    settings.validate()?;
    if starts == 0 {
        return Err(Error::validation("multi_start requires starts >= 1"));
    }
    check_coverable(problem)?;
    let (lo, hi) = base_box(problem);
    match SubProblem::build(problem, &lo, &hi, false) {
        SubBuild::Infeasible(report) => Err(Error::Infeasible(report)),
        SubBuild::Point(x) => point_solution(problem, x),
        SubBuild::Sub(sub) => {
            let prepared = prepare(&sub, settings)?;
            let base = prepared.canonical_x_free();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best: Option<(usize, ContinuousSolution)> = None;
            for k in 0..starts {
                let xk = if k == 0 {
                    base.clone()
                } else {
                    jitter_inside(&base, &prepared, &mut rng)
                };
                let sol = prepared
                    .solve_from(&xk, settings, true)
                    .unwrap_or_else(|| prepared.solve(settings, true));
                let candidate = finish_solution(problem, &sub, sol);
                best = Some(match best.take() {
                    None => (k, candidate),
                    Some((bi, b)) => {
                        if better_than(&candidate, &b) {
                            (k, candidate)
                        } else {
                            (bi, b)
                        }
                    }
                });
            }
            Ok(best.expect("starts >= 1").1)
        }
    }
}

/// Strict preference: converged beats unconverged, then lower objective;
/// ties keep the earlier start.
fn better_than(candidate: &ContinuousSolution, incumbent: &ContinuousSolution) -> bool {
    match (candidate.converged, incumbent.converged) {
        (true, false) => true,
        (false, true) => false,
        _ => candidate.breakdown.total < incumbent.breakdown.total,
    }
}

fn jitter_inside(base: &[f64], prepared: &PreparedSub<'_, '_>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let u: Vec<f64> = base.iter().map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut theta = 1.0f64;
    for _ in 0..30 {
        let x: Vec<f64> = base
            .iter()
            .zip(&u)
            .map(|(b, ui)| b * (1.0 + 0.5 * theta * ui))
            .collect();
        if prepared.strictly_feasible_x(&x) {
            return x;
        }
        theta *= 0.5;
    }
    base.to_vec()
}

fn project_to_free(sub: &SubProblem<'_>, x_full: &[f64]) -> Vec<f64> {
    sub.free.iter().map(|&i| x_full[i]).collect()
}

fn point_solution(problem: &AllocationProblem, x: Vec<f64>) -> Result<ContinuousSolution> {
    let alloc = Allocation::continuous(x);
    let residuals = model::constraint_residuals(problem, &alloc)?;
    if !residuals.feasible(1e-9) {
        return Err(Error::Infeasible(InfeasibilityReport {
            most_violated: "demand bounds at the unique box point".into(),
            min_violation: -residuals
                .lower
                .iter()
                .chain(&residuals.upper)
                .chain(residuals.deviation.iter())
                .fold(f64::INFINITY, |m, v| m.min(*v)),
            empty_interior: false,
        }));
    }
    let breakdown = model::objective(problem, &alloc)?;
    Ok(ContinuousSolution {
        x_star: alloc,
        breakdown,
        multipliers: Multipliers::zeros(problem.m(), problem.n()),
        iterations: IterationCounts::default(),
        converged: true,
        mode: SolveMode::Barrier,
        barrier_gap: 0.0,
        trace: Vec::new(),
    })
}

fn finish_solution(
    problem: &AllocationProblem,
    sub: &SubProblem<'_>,
    sol: SubSolution,
) -> ContinuousSolution {
    let x_full = sub.compose(&sol.x_free);
    let alloc = Allocation::continuous(x_full);
    let breakdown = model::objective(problem, &alloc).expect("dimensions match");
    let mut mult = Multipliers::zeros(problem.m(), problem.n());
    for (kind, value) in &sol.row_multipliers {
        match kind {
            RowKind::DemandLower(r) => mult.lambda[*r] = *value,
            RowKind::WasteUpper(r) => mult.nu[*r] = *value,
            RowKind::VarLower(c) => mult.omega[sub.free[*c]] = *value,
            _ => {}
        }
    }
    ContinuousSolution {
        x_star: alloc,
        breakdown,
        multipliers: mult,
        iterations: IterationCounts {
            phase_one: sol.phase_one_iterations,
            outer: sol.outer_iterations,
            inner: sol.inner_iterations,
        },
        converged: sol.converged,
        mode: sol.mode.into(),
        barrier_gap: sol.num_rows as f64 / sol.t_final,
        trace: sol.trace,
    }
}
