//! Integer allocations: best-first branch-and-bound with valid lower
//! bounds, and the greedy rounding heuristic.
//!
//! Node lower bounds come from the barrier solve of a convex underestimator
//! on the node box: the concave consolidation term is replaced by its
//! per-provider secant, which lies below it, while the remaining terms are
//! already convex. Computed bounds are further debited by the barrier's
//! certified suboptimality so pruning never discards the true optimum.
//! Branching picks the most fractional relaxed component; when the
//! relaxation lands on an integral point while the secant is still loose,
//! the widest variable of the loosest provider is split instead so the
//! chord tightens.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, InfeasibilityReport, Result};
use crate::model::{self, Allocation, AllocationProblem, ConstraintResiduals, ObjectiveBreakdown};

use super::continuous::BarrierSettings;
use super::subproblem::{prepare, SubBuild, SubProblem};

/// Search limits. The node budget keeps runs deterministic; the optional
/// wall-clock limit is for interactive use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_nodes: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_limit: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_nodes: 100_000,
            time_limit: None,
        }
    }
}

impl SearchBudget {
    pub fn nodes(max_nodes: u64) -> Self {
        SearchBudget {
            max_nodes,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    BranchAndBound,
    Rounding,
}

/// An integral allocation with objective breakdown and search diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegerSolution {
    pub x_hat: Allocation,
    pub breakdown: ObjectiveBreakdown,
    /// Feasibility slacks at `x_hat`; rounding may violate the waste upper
    /// bound, which shows up here rather than being silently dropped.
    pub residuals: ConstraintResiduals,
    /// `incumbent - best remaining lower bound`; 0 when the tree was
    /// exhausted, `None` for heuristic (rounding) results.
    pub bound_gap: Option<f64>,
    pub nodes_explored: u64,
    pub method: SolveMethod,
}

/// Validates that the incremental-adoption constraint is ready to be
/// enforced: both solvers honor `current`/`max_deviation` whenever present,
/// realizing the l1 ball through the standard `x - x_current = u - v`
/// split with `u, v >= 0` and a single budget row.
pub fn apply_incremental(problem: &AllocationProblem) -> Result<AllocationProblem> {
    match (problem.current(), problem.max_deviation()) {
        (Some(cur), Some(dmax)) => {
            if dmax < 0.0 {
                return Err(Error::validation("max_deviation must be >= 0"));
            }
            if cur.len() != problem.n() {
                return Err(Error::dimension("current allocation length != n"));
            }
            Ok(problem.clone())
        }
        _ => Err(Error::validation(
            "incremental adoption requires both current and max_deviation",
        )),
    }
}

const INT_TOL: f64 = 1e-6;
const PRUNE_MARGIN: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Relaxed solution in full-length coordinates.
    relax_x: Vec<f64>,
    depth: u32,
}

enum NodeEval {
    Pruned(Option<InfeasibilityReport>),
    /// Fully fixed box; a feasible integral point becomes a candidate.
    Leaf {
        candidate: Option<Vec<f64>>,
    },
    Expanded {
        bound: f64,
        relax_x: Vec<f64>,
        candidates: Vec<Vec<f64>>,
    },
}

/// Best-first branch-and-bound over the integer lattice in
/// `[0, upper_bounds]`, honoring the demand/waste bands and, when set,
/// the l1 deviation bound.
pub fn solve_integer(
    problem: &AllocationProblem,
    settings: &BarrierSettings,
    budget: &SearchBudget,
) -> Result<IntegerSolution> {
    settings.validate()?;
    if let Some(r) = model::uncoverable_resource(problem) {
        return Err(Error::UncoverableResource {
            resource: problem.catalog().schema.names[r].clone(),
        });
    }
    let start_time = Instant::now();
    let n = problem.n();
    let root_lo = vec![0.0; n];
    let root_hi: Vec<f64> = problem.upper_bounds().iter().map(|v| v.floor()).collect();

    let mut nodes_explored = 0u64;
    let mut order_counter = 0u64;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut heap: BinaryHeap<Reverse<(OrdF64, u64)>> = BinaryHeap::new();
    let mut store: Vec<Node> = Vec::new();

    let mut root_relax: Option<Vec<f64>> = None;

    match evaluate_node(problem, settings, &root_lo, &root_hi, &mut nodes_explored) {
        NodeEval::Pruned(report) => {
            return Err(Error::Infeasible(report.unwrap_or(InfeasibilityReport {
                most_violated: "integer feasible set is empty".into(),
                min_violation: 0.0,
                empty_interior: false,
            })));
        }
        NodeEval::Leaf { candidate } => {
            if let Some(x) = candidate {
                let f = model::objective(problem, &Allocation::continuous(x.clone()))?.total;
                incumbent = Some((x, f));
            }
        }
        NodeEval::Expanded {
            bound,
            relax_x,
            candidates,
        } => {
            root_relax = Some(relax_x.clone());
            for cand in candidates {
                consider_candidate(problem, cand, &mut incumbent);
            }
            store.push(Node {
                lo: root_lo,
                hi: root_hi,
                relax_x,
                depth: 0,
            });
            heap.push(Reverse((OrdF64(bound), order_counter)));
            order_counter += 1;
        }
    }

    let mut budget_stop = false;
    let mut open_bound_at_stop: Option<f64> = None;
    let mut closed = heap.is_empty();

    while let Some(Reverse((OrdF64(bound), order))) = heap.pop() {
        if let Some((_, inc_f)) = &incumbent {
            if bound >= inc_f - PRUNE_MARGIN {
                // Best-first: every remaining node is prunable.
                closed = true;
                break;
            }
        }
        if nodes_explored >= budget.max_nodes
            || budget
                .time_limit
                .is_some_and(|lim| start_time.elapsed() >= lim)
        {
            budget_stop = true;
            open_bound_at_stop = Some(bound);
            break;
        }

        let node = &store[order as usize];
        let (var, split) = match pick_branch(problem, node) {
            Some(choice) => choice,
            None => {
                // Relaxation integral and the secant tight: node is solved
                // exactly; its candidates were already considered.
                closed = heap.is_empty();
                continue;
            }
        };

        let (lo, hi, depth) = (node.lo.clone(), node.hi.clone(), node.depth);
        for (child_lo_v, child_hi_v) in [(None, Some(split)), (Some(split + 1.0), None)] {
            let mut clo = lo.clone();
            let mut chi = hi.clone();
            if let Some(v) = child_lo_v {
                clo[var] = v;
            }
            if let Some(v) = child_hi_v {
                chi[var] = v;
            }
            match evaluate_node(problem, settings, &clo, &chi, &mut nodes_explored) {
                NodeEval::Pruned(_) => {}
                NodeEval::Leaf { candidate } => {
                    if let Some(x) = candidate {
                        consider_candidate(problem, x, &mut incumbent);
                    }
                }
                NodeEval::Expanded {
                    bound,
                    relax_x,
                    candidates,
                } => {
                    for cand in candidates {
                        consider_candidate(problem, cand, &mut incumbent);
                    }
                    let prunable = incumbent
                        .as_ref()
                        .is_some_and(|(_, f)| bound >= f - PRUNE_MARGIN);
                    if !prunable {
                        store.push(Node {
                            lo: clo,
                            hi: chi,
                            relax_x,
                            depth: depth + 1,
                        });
                        heap.push(Reverse((OrdF64(bound), order_counter)));
                        order_counter += 1;
                    }
                }
            }
        }
        closed = heap.is_empty();
    }

    match incumbent {
        Some((x, _)) => {
            let x_hat = Allocation::integral(x)?;
            let breakdown = model::objective(problem, &x_hat)?;
            let residuals = model::constraint_residuals(problem, &x_hat)?;
            let bound_gap = if closed && !budget_stop {
                Some(0.0)
            } else {
                let open = open_bound_at_stop
                    .into_iter()
                    .chain(heap.peek().map(|Reverse((OrdF64(b), _))| *b))
                    .fold(f64::INFINITY, f64::min);
                if open.is_finite() {
                    Some((breakdown.total - open).max(0.0))
                } else {
                    Some(0.0)
                }
            };
            Ok(IntegerSolution {
                x_hat,
                breakdown,
                residuals,
                bound_gap,
                nodes_explored,
                method: SolveMethod::BranchAndBound,
            })
        }
        None if budget_stop => {
            // No incumbent within budget: fall back to rounding the root
            // relaxation, mirroring the CLI default.
            let relax = root_relax.ok_or_else(|| {
                Error::BudgetExhausted("no relaxation available for rounding".into())
            })?;
            let rounded = greedy_round(problem, &Allocation::continuous(relax))?;
            if problem.max_deviation().is_some() && !rounded.residuals.feasible(FEAS_TOL) {
                return Err(Error::BudgetExhausted(
                    "budget exhausted before any incumbent satisfied the deviation bound".into(),
                ));
            }
            Ok(IntegerSolution {
                nodes_explored,
                ..rounded
            })
        }
        None => Err(Error::Infeasible(InfeasibilityReport {
            most_violated: "no feasible integer allocation in the search box".into(),
            min_violation: 0.0,
            empty_interior: false,
        })),
    }
}

fn consider_candidate(
    problem: &AllocationProblem,
    x: Vec<f64>,
    incumbent: &mut Option<(Vec<f64>, f64)>,
) {
    let alloc = Allocation::continuous(x);
    let Ok(residuals) = model::constraint_residuals(problem, &alloc) else {
        return;
    };
    if !residuals.feasible(FEAS_TOL) {
        return;
    }
    let Ok(breakdown) = model::objective(problem, &alloc) else {
        return;
    };
    let f = breakdown.total;
    match incumbent {
        Some((_, best)) if f >= *best - 1e-12 => {}
        _ => *incumbent = Some((alloc.counts, f)),
    }
}

/// Tightens the node box with the implied bounds of `Kx <= d + g` (given
/// the committed lower bounds) and the global l1 deviation radius.
fn tighten_box(problem: &AllocationProblem, lo: &mut [f64], hi: &mut [f64]) -> bool {
    let n = problem.n();
    let m = problem.m();
    let k = problem.k();
    if let (Some(cur), Some(dmax)) = (problem.current(), problem.max_deviation()) {
        for i in 0..n {
            hi[i] = hi[i].min((cur.counts[i] + dmax + 1e-9).floor());
            lo[i] = lo[i].max((cur.counts[i] - dmax - 1e-9).ceil());
        }
    }
    for _pass in 0..4 {
        let mut changed = false;
        let mut k_lo = vec![0.0; m];
        for r in 0..m {
            for i in 0..n {
                k_lo[r] += k.get(r, i) * lo[i];
            }
        }
        for r in 0..m {
            let slack = problem.demand()[r] + problem.waste()[r] - k_lo[r];
            if slack < -1e-9 {
                return false;
            }
            for i in 0..n {
                let cap = k.get(r, i);
                if cap > 0.0 {
                    let implied = lo[i] + ((slack + 1e-9) / cap).floor();
                    if implied < hi[i] {
                        hi[i] = implied;
                        changed = true;
                    }
                }
            }
        }
        for i in 0..n {
            if lo[i] > hi[i] {
                return false;
            }
        }
        if !changed {
            break;
        }
    }
    true
}

fn evaluate_node(
    problem: &AllocationProblem,
    settings: &BarrierSettings,
    lo: &[f64],
    hi: &[f64],
    nodes_explored: &mut u64,
) -> NodeEval {
    *nodes_explored += 1;
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    if !tighten_box(problem, &mut lo, &mut hi) {
        return NodeEval::Pruned(None);
    }
    match SubProblem::build(problem, &lo, &hi, true) {
        SubBuild::Infeasible(report) => NodeEval::Pruned(Some(report)),
        SubBuild::Point(x) => {
            let integral = x.iter().all(|v| (v - v.round()).abs() <= INT_TOL);
            if !integral {
                return NodeEval::Pruned(None);
            }
            let x: Vec<f64> = x.iter().map(|v| v.round()).collect();
            let alloc = Allocation::continuous(x.clone());
            let feasible = model::constraint_residuals(problem, &alloc)
                .map(|r| r.feasible(FEAS_TOL))
                .unwrap_or(false);
            NodeEval::Leaf {
                candidate: feasible.then_some(x),
            }
        }
        SubBuild::Sub(sub) => {
            let prepared = match prepare(&sub, settings) {
                Ok(p) => p,
                Err(Error::Infeasible(report)) => return NodeEval::Pruned(Some(report)),
                Err(_) => return NodeEval::Pruned(None),
            };
            let sol = prepared.solve(settings, false);
            // Debit the certified barrier suboptimality so the bound stays
            // below the true relaxation minimum.
            let bound = if sol.converged {
                sol.value - (2.0 * settings.outer_tolerance + 1e-9)
            } else {
                f64::NEG_INFINITY
            };
            let relax_x = sub.compose(&sol.x_free);
            let ub = problem.upper_bounds();
            let clamp = |v: f64, i: usize| v.max(0.0).min(ub[i]);
            let mut candidates = Vec::with_capacity(3);
            for mode in 0..3 {
                let cand: Vec<f64> = relax_x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let r = match mode {
                            0 => v.round(),
                            1 => v.floor(),
                            _ => v.ceil(),
                        };
                        clamp(r, i)
                    })
                    .collect();
                if !candidates.contains(&cand) {
                    candidates.push(cand);
                }
            }
            NodeEval::Expanded {
                bound,
                relax_x,
                candidates,
            }
        }
    }
}

/// Chooses the branching variable and split point, or `None` when the node
/// is solved exactly (integral relaxation with a tight secant).
fn pick_branch(problem: &AllocationProblem, node: &Node) -> Option<(usize, f64)> {
    let n = problem.n();
    let mut best_frac = INT_TOL;
    let mut var: Option<usize> = None;
    for i in 0..n {
        if node.hi[i] - node.lo[i] < 1.0 {
            continue;
        }
        let x = node.relax_x[i];
        let dist = (x - x.round()).abs();
        if dist > best_frac {
            best_frac = dist;
            var = Some(i);
        }
    }
    if let Some(i) = var {
        let split = node.relax_x[i].floor().clamp(node.lo[i], node.hi[i] - 1.0);
        return Some((i, split));
    }

    // Integral relaxation: branch only if the secant is still loose.
    let params = problem.params();
    if params.alpha == 0.0 {
        return None;
    }
    let e = problem.e();
    let z = e.mul_vec(&node.relax_x);
    let z_lo = e.mul_vec(&node.lo);
    let z_hi = e.mul_vec(&node.hi);
    let h = |v: f64| params.alpha * (1.0 - (-params.beta1 * v).exp());
    let mut worst_gap = 1e-9;
    let mut worst_provider: Option<usize> = None;
    for j in 0..problem.p() {
        let (a, b) = (z_lo[j], z_hi[j]);
        let chord = if b - a > 1e-12 {
            h(a) + (h(b) - h(a)) / (b - a) * (z[j] - a)
        } else {
            h(a)
        };
        let gap = h(z[j]) - chord;
        if gap > worst_gap {
            worst_gap = gap;
            worst_provider = Some(j);
        }
    }
    let j = worst_provider?;
    let mut best_width = 0.0;
    let mut var = None;
    for i in 0..n {
        if e.get(j, i) > 0.0 {
            let width = node.hi[i] - node.lo[i];
            if width >= 1.0 && width > best_width {
                best_width = width;
                var = Some(i);
            }
        }
    }
    let i = var?;
    let split = ((node.lo[i] + node.hi[i]) / 2.0)
        .floor()
        .clamp(node.lo[i], node.hi[i] - 1.0);
    Some((i, split))
}

/// Floors the relaxed solution, then repeatedly buys the instance type with
/// the best deficit-coverage-per-dollar ratio until demand is met.
///
/// Terminates because every increment strictly reduces the total positive
/// deficit by at least the smallest positive capacity among chosen columns;
/// a deficit no instance can cover raises `UncoverableResource` instead of
/// looping.
pub fn greedy_round(
    problem: &AllocationProblem,
    x_relaxed: &Allocation,
) -> Result<IntegerSolution> {
    if x_relaxed.len() != problem.n() {
        return Err(Error::dimension("relaxed allocation length != n"));
    }
    let n = problem.n();
    let m = problem.m();
    let k = problem.k();
    let c = problem.cost();
    let d = problem.demand();

    let mut x: Vec<f64> = x_relaxed
        .counts
        .iter()
        .map(|v| v.max(0.0).floor())
        .collect();
    loop {
        let kx = k.mul_vec(&x);
        let deficit: Vec<f64> = d.iter().zip(&kx).map(|(dv, kv)| dv - kv).collect();
        if !deficit.iter().any(|v| *v > 0.0) {
            break;
        }
        // (covers a deficit at zero cost, ratio, index); zero-cost columns
        // that cover something win outright, lowest index first.
        let mut best: Option<(bool, f64, usize)> = None;
        for i in 0..n {
            let mut cover = 0.0;
            for r in 0..m {
                if deficit[r] > 0.0 {
                    cover += k.get(r, i) * deficit[r];
                }
            }
            if cover <= 0.0 {
                continue;
            }
            let cand = if c[i] > 0.0 {
                (false, cover / c[i], i)
            } else {
                (true, f64::INFINITY, i)
            };
            best = Some(match best.take() {
                None => cand,
                Some(cur) => {
                    let wins = (cand.0 && !cur.0) || (cand.0 == cur.0 && cand.1 > cur.1);
                    if wins {
                        cand
                    } else {
                        cur
                    }
                }
            });
        }
        match best {
            Some((_, _, i)) => x[i] += 1.0,
            None => {
                let r = (0..m)
                    .find(|&r| deficit[r] > 0.0 && (0..n).all(|i| k.get(r, i) == 0.0))
                    .expect("no candidate implies an uncoverable resource");
                return Err(Error::UncoverableResource {
                    resource: problem.catalog().schema.names[r].clone(),
                });
            }
        }
    }

    let x_hat = Allocation::integral(x)?;
    let breakdown = model::objective(problem, &x_hat)?;
    let residuals = model::constraint_residuals(problem, &x_hat)?;
    Ok(IntegerSolution {
        x_hat,
        breakdown,
        residuals,
        bound_gap: None,
        nodes_explored: 0,
        method: SolveMethod::Rounding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{InstanceCatalog, InstanceType, ResourceSchema};
    use crate::model::PenaltyParams;

    fn ab_catalog() -> InstanceCatalog {
        let schema = ResourceSchema::new(
            vec!["cpu_cores".into(), "memory_gb".into()],
            vec!["cores".into(), "GB".into()],
        )
        .unwrap();
        InstanceCatalog::new(
            schema,
            vec![
                InstanceType {
                    provider_id: "azure".into(),
                    sku: "A".into(),
                    capacities: vec![2.0, 4.0],
                    hourly_cost: 0.10,
                },
                InstanceType {
                    provider_id: "azure".into(),
                    sku: "B".into(),
                    capacities: vec![4.0, 16.0],
                    hourly_cost: 0.25,
                },
            ],
        )
        .unwrap()
    }

    fn ab_problem() -> AllocationProblem {
        AllocationProblem::new(ab_catalog(), vec![8.0, 16.0])
            .unwrap()
            .with_waste(vec![8.0, 32.0])
            .unwrap()
            .with_params(PenaltyParams {
                alpha: 0.0,
                beta1: 1.0,
                beta2: 0.1,
                beta3: 10.0,
                gamma: 0.0,
            })
            .unwrap()
    }

    #[test]
    fn two_type_fixture_solves_to_four_small() {
        // Beats (0, 2) at 0.50 and (2, 1) at 0.45 (exhaustive check in the
        // oracle suite).
        let problem = ab_problem();
        let sol = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(sol.x_hat.counts, vec![4.0, 0.0]);
        assert!((sol.breakdown.base_cost - 0.40).abs() < 1e-9);
        assert_eq!(sol.bound_gap, Some(0.0));
        assert_eq!(sol.method, SolveMethod::BranchAndBound);
    }

    #[test]
    fn zero_demand_is_solved_at_origin() {
        let problem = AllocationProblem::new(ab_catalog(), vec![0.0, 0.0]).unwrap();
        let sol = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(sol.x_hat.counts, vec![0.0, 0.0]);
        assert_eq!(sol.breakdown.total, 0.0);
    }

    #[test]
    fn greedy_round_reproduces_the_hand_trace() {
        // floor(3.6, 0.2) = (3, 0); deficit (2, 4); ratio A = 200, B = 288;
        // increment B once; Kx = (10, 28) covers (8, 16); cost 0.55.
        let problem = ab_problem();
        let sol = greedy_round(&problem, &Allocation::continuous(vec![3.6, 0.2])).unwrap();
        assert_eq!(sol.x_hat.counts, vec![3.0, 1.0]);
        assert!((sol.breakdown.base_cost - 0.55).abs() < 1e-12);
        assert_eq!(sol.method, SolveMethod::Rounding);
        assert_eq!(sol.bound_gap, None);
    }

    #[test]
    fn greedy_round_keeps_feasible_integral_input() {
        let problem = ab_problem();
        let sol = greedy_round(&problem, &Allocation::continuous(vec![4.0, 0.0])).unwrap();
        assert_eq!(sol.x_hat.counts, vec![4.0, 0.0]);
    }

    #[test]
    fn greedy_round_from_zero_terminates_with_coverage() {
        let problem = ab_problem();
        let sol = greedy_round(&problem, &Allocation::continuous(vec![0.0, 0.0])).unwrap();
        let residuals = &sol.residuals;
        assert!(residuals.lower.iter().all(|v| *v >= 0.0), "{residuals:?}");
    }

    #[test]
    fn uncoverable_resource_is_an_error() {
        let schema = ResourceSchema::new(
            vec!["cpu_cores".into(), "gpu_cards".into()],
            vec!["cores".into(), "cards".into()],
        )
        .unwrap();
        let catalog = InstanceCatalog::new(
            schema,
            vec![InstanceType {
                provider_id: "azure".into(),
                sku: "A".into(),
                capacities: vec![2.0, 0.0],
                hourly_cost: 0.10,
            }],
        )
        .unwrap();
        let problem = AllocationProblem::new(catalog, vec![4.0, 1.0]).unwrap();
        let err = greedy_round(&problem, &Allocation::continuous(vec![0.0])).unwrap_err();
        match err {
            Error::UncoverableResource { resource } => assert_eq!(resource, "gpu_cards"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_cost_column_that_covers_wins_first() {
        let schema = ResourceSchema::new(vec!["cpu_cores".into()], vec!["cores".into()]).unwrap();
        let catalog = InstanceCatalog::new(
            schema,
            vec![
                InstanceType {
                    provider_id: "p".into(),
                    sku: "paid".into(),
                    capacities: vec![4.0],
                    hourly_cost: 0.10,
                },
                InstanceType {
                    provider_id: "p".into(),
                    sku: "free".into(),
                    capacities: vec![1.0],
                    hourly_cost: 0.0,
                },
            ],
        )
        .unwrap();
        let problem = AllocationProblem::new(catalog, vec![3.0]).unwrap();
        let sol = greedy_round(&problem, &Allocation::continuous(vec![0.0, 0.0])).unwrap();
        assert_eq!(sol.x_hat.counts, vec![0.0, 3.0]);
    }

    #[test]
    fn deviation_zero_returns_current_allocation() {
        let problem = ab_problem()
            .with_current(Allocation::continuous(vec![4.0, 0.0]), Some(0.0))
            .unwrap();
        let problem = apply_incremental(&problem).unwrap();
        let sol = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(sol.x_hat.counts, vec![4.0, 0.0]);
    }

    #[test]
    fn deviation_zero_with_infeasible_current_is_certified() {
        let problem = ab_problem()
            .with_current(Allocation::continuous(vec![1.0, 0.0]), Some(0.0))
            .unwrap();
        let err = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap_err();
        assert!(err.is_infeasible(), "{err}");
    }

    #[test]
    fn deviation_bound_is_respected() {
        let problem = ab_problem()
            .with_current(Allocation::continuous(vec![4.0, 0.0]), Some(1.0))
            .unwrap();
        let sol = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        let l1: f64 = sol
            .x_hat
            .counts
            .iter()
            .zip(&[4.0, 0.0])
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 <= 1.0 + 1e-9, "moved {l1}");
        // (4, 1) is feasible under the bound while (3, 1) is not.
        assert!(sol.residuals.feasible(1e-9));
    }

    #[test]
    fn apply_incremental_requires_both_fields() {
        let problem = ab_problem();
        assert!(apply_incremental(&problem).is_err());
    }

    #[test]
    fn search_is_deterministic() {
        let problem = ab_problem();
        let a = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        let b = solve_integer(
            &problem,
            &BarrierSettings::default(),
            &SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(a.x_hat.counts, b.x_hat.counts);
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.bound_gap, b.bound_gap);
    }
}
