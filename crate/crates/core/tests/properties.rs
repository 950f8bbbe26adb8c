//! Property tests for the model, catalog, metrics, rounding, and baseline
//! simulation invariants.

use proptest::prelude::*;

use fleetmix_core::autoscaler::{self, ClusterState, Expander, NodePool};
use fleetmix_core::catalog::{
    self, composition_matrix, selector_matrix, synth_catalog, InstanceCatalog, InstanceType,
    ResourceSchema, SynthRanges,
};
use fleetmix_core::metrics;
use fleetmix_core::model::{self, Allocation, AllocationProblem, PenaltyParams};
use fleetmix_core::solver::integer::greedy_round;

fn small_catalog(n: usize, caps: &[Vec<f64>], costs: &[f64]) -> InstanceCatalog {
    let m = caps[0].len();
    let schema = ResourceSchema::new(
        (0..m).map(|r| format!("res{r}")).collect(),
        (0..m).map(|_| "unit".to_string()).collect(),
    )
    .unwrap();
    let instances = (0..n)
        .map(|i| InstanceType {
            provider_id: if i % 2 == 0 { "p0".into() } else { "p1".into() },
            sku: format!("t{i}"),
            capacities: caps[i].clone(),
            hourly_cost: costs[i],
        })
        .collect();
    InstanceCatalog::new(schema, instances).unwrap()
}

fn arb_problem() -> impl Strategy<Value = (AllocationProblem, Vec<f64>)> {
    let n = 3usize;
    let m = 2usize;
    (
        proptest::collection::vec(1.0..8.0f64, n * m),
        proptest::collection::vec(0.01..1.0f64, n),
        proptest::collection::vec(0.0..30.0f64, m),
        proptest::collection::vec(0.0..6.0f64, n),
        (
            0.0..0.3f64,
            0.2..2.0f64,
            0.01..0.5f64,
            0.0..15.0f64,
            0.0..0.1f64,
        ),
    )
        .prop_map(
            move |(flat, costs, demand, x, (alpha, beta1, beta2, beta3, gamma))| {
                let caps: Vec<Vec<f64>> = flat.chunks(m).map(|c| c.to_vec()).collect();
                let catalog = small_catalog(n, &caps, &costs);
                let problem = AllocationProblem::new(catalog, demand)
                    .unwrap()
                    .with_params(PenaltyParams {
                        alpha,
                        beta1,
                        beta2,
                        beta3,
                        gamma,
                    })
                    .unwrap();
                (problem, x)
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn breakdown_sums_and_term_bounds((problem, x) in arb_problem()) {
        let alloc = Allocation::continuous(x);
        let b = model::objective(&problem, &alloc).unwrap();
        let sum = b.base_cost + b.consolidation_penalty + b.volume_discount + b.shortage_penalty;
        prop_assert!((b.total - sum).abs() <= 1e-12 * b.total.abs().max(1.0));
        prop_assert!(b.consolidation_penalty >= 0.0);
        prop_assert!(b.consolidation_penalty <= problem.params().alpha * problem.p() as f64 + 1e-12);
        prop_assert!(b.volume_discount <= 0.0);
        prop_assert!(b.shortage_penalty >= 0.0);
    }

    #[test]
    fn consolidation_is_nondecreasing_in_each_count((problem, x) in arb_problem(), bump in 0.01..2.0f64, idx in 0usize..3) {
        let base = model::objective(&problem, &Allocation::continuous(x.clone())).unwrap();
        let mut more = x;
        more[idx] += bump;
        let bumped = model::objective(&problem, &Allocation::continuous(more)).unwrap();
        prop_assert!(bumped.consolidation_penalty >= base.consolidation_penalty - 1e-12);
    }

    #[test]
    fn shortage_vanishes_exactly_when_covered((problem, x) in arb_problem()) {
        let alloc = Allocation::continuous(x);
        let b = model::objective(&problem, &alloc).unwrap();
        let kx = problem.k().mul_vec(&alloc.counts);
        let covered = kx.iter().zip(problem.demand()).all(|(v, d)| v >= d);
        prop_assert_eq!(b.shortage_penalty == 0.0, covered);
    }

    #[test]
    fn instance_permutation_equivariance((problem, x) in arb_problem()) {
        // Reverse instance order in both the catalog and the counts.
        let catalog = problem.catalog();
        let mut instances = catalog.instances.clone();
        instances.reverse();
        let permuted_catalog = InstanceCatalog::new(catalog.schema.clone(), instances).unwrap();
        let permuted = AllocationProblem::new(permuted_catalog, problem.demand().to_vec())
            .unwrap()
            .with_params(*problem.params())
            .unwrap();
        let mut x_rev = x.clone();
        x_rev.reverse();
        let a = model::objective(&problem, &Allocation::continuous(x)).unwrap();
        let b = model::objective(&permuted, &Allocation::continuous(x_rev)).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-9 * a.total.abs().max(1.0));
        prop_assert!((a.base_cost - b.base_cost).abs() <= 1e-12);
        prop_assert!((a.shortage_penalty - b.shortage_penalty).abs() <= 1e-9);
    }

    #[test]
    fn synth_catalog_matrices_are_well_formed(seed in 0u64..500, n in 1usize..12, extra in 0usize..3) {
        let p = (extra % n.max(1)) + 1;
        let schema = ResourceSchema::standard();
        let ranges = SynthRanges::default_for(&schema);
        let cat = synth_catalog(seed, n, p.min(n), &schema, &ranges).unwrap();
        let k = composition_matrix(&cat);
        let e = selector_matrix(&cat);
        prop_assert_eq!((k.rows(), k.cols()), (4, n));
        prop_assert_eq!((e.rows(), e.cols()), (cat.num_providers(), n));
        for i in 0..n {
            let col: f64 = (0..e.rows()).map(|j| e.get(j, i)).sum();
            prop_assert_eq!(col, 1.0);
            for r in 0..k.rows() {
                prop_assert!(k.get(r, i) >= 0.0);
            }
        }
        // Serialization round trip is the identity.
        let text = catalog::catalog_to_string(&cat, catalog::CatalogFormat::Json).unwrap();
        prop_assert_eq!(catalog::parse_catalog_json(&text).unwrap(), cat);
    }

    #[test]
    fn greedy_round_always_covers_demand((problem, x) in arb_problem()) {
        // Skip uncoverable constructions (a demanded resource no instance
        // provides); the operation reports those as errors.
        match greedy_round(&problem, &Allocation::continuous(x)) {
            Ok(sol) => {
                let kx = problem.k().mul_vec(&sol.x_hat.counts);
                for (v, d) in kx.iter().zip(problem.demand()) {
                    prop_assert!(v >= d, "coverage {v} < demand {d}");
                }
                prop_assert!(sol.x_hat.integral);
            }
            Err(e) => prop_assert!(e.is_infeasible(), "{e}"),
        }
    }

    #[test]
    fn metrics_are_scale_consistent((problem, x) in arb_problem(), factor in 1.0..4.0f64) {
        let alloc = Allocation::continuous(x.clone());
        let base = metrics::evaluate(&problem, &alloc).unwrap();
        let scaled_problem = AllocationProblem::new(
            problem.catalog().clone(),
            problem.demand().iter().map(|d| d * factor).collect(),
        )
        .unwrap();
        let scaled_alloc = Allocation::continuous(x.iter().map(|v| v * factor).collect());
        let scaled = metrics::evaluate(&scaled_problem, &scaled_alloc).unwrap();
        prop_assert!((scaled.total_cost - factor * base.total_cost).abs() <= 1e-9 * (1.0 + base.total_cost));
        prop_assert!((scaled.mean_utilization - base.mean_utilization).abs() <= 1e-9);
        prop_assert!((scaled.mean_overprovision_pct - base.mean_overprovision_pct).abs() <= 1e-6);
    }

    #[test]
    fn single_pool_scale_up_is_the_capacity_ceiling(
        caps in proptest::collection::vec(1.0..16.0f64, 2),
        demand in proptest::collection::vec(0.5..50.0f64, 2),
        max_nodes in 60u32..100,
    ) {
        let catalog = small_catalog(1, &[caps.clone()], &[0.1]);
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, max_nodes, 0).unwrap()],
            demand.clone(),
        )
        .unwrap();
        let result = autoscaler::simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        let expected = demand
            .iter()
            .zip(&caps)
            .map(|(d, c)| (d / c).ceil())
            .fold(0.0f64, f64::max) as u32;
        if expected <= max_nodes {
            prop_assert!(result.satisfied);
            prop_assert_eq!(result.final_pools[0].current_nodes, expected);
        } else {
            prop_assert!(!result.satisfied);
        }
    }

    #[test]
    fn scale_up_coverage_and_homogeneity(
        flat in proptest::collection::vec(1.0..10.0f64, 4),
        demand in proptest::collection::vec(0.0..40.0f64, 2),
    ) {
        let caps: Vec<Vec<f64>> = flat.chunks(2).map(|c| c.to_vec()).collect();
        let catalog = small_catalog(2, &caps, &[0.1, 0.2]);
        let pools = vec![
            NodePool::new(0, 0, 100, 0).unwrap(),
            NodePool::new(1, 0, 100, 0).unwrap(),
        ];
        let state = ClusterState::new(&catalog, pools, demand.clone()).unwrap();
        let result = autoscaler::simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        for (idx, delta) in &result.scale_events {
            prop_assert!(*idx < 2);
            prop_assert_eq!(*delta, 1);
        }
        if result.satisfied {
            let k = composition_matrix(&catalog);
            let provided = k.mul_vec(&result.allocation.counts);
            for (have, need) in provided.iter().zip(&demand) {
                prop_assert!(have >= need);
            }
        }
        // Determinism.
        let again = autoscaler::simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        prop_assert_eq!(result.scale_events, again.scale_events);
    }

    #[test]
    fn scale_down_is_safe(
        caps in proptest::collection::vec(1.0..8.0f64, 2),
        demand in proptest::collection::vec(0.0..30.0f64, 2),
        start in 5u32..40,
        min_nodes in 0u32..4,
    ) {
        let catalog = small_catalog(1, &[caps.clone()], &[0.1]);
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, min_nodes, 100, start.max(min_nodes)).unwrap()],
            demand.clone(),
        )
        .unwrap();
        let before_covered = caps
            .iter()
            .zip(&demand)
            .all(|(c, d)| c * state.pools[0].current_nodes as f64 >= *d);
        let result = autoscaler::simulate_scale_down(&catalog, &state, 1.0).unwrap();
        prop_assert!(result.final_pools[0].current_nodes >= min_nodes);
        if before_covered {
            // Scale-down never breaks coverage that held before.
            let after = result.final_pools[0].current_nodes as f64;
            for (c, d) in caps.iter().zip(&demand) {
                prop_assert!(c * after >= *d);
            }
        }
    }
}

#[test]
fn compare_identical_metrics_is_all_zero() {
    let catalog = small_catalog(2, &[vec![2.0, 4.0], vec![4.0, 16.0]], &[0.10, 0.25]);
    let problem = AllocationProblem::new(catalog, vec![8.0, 16.0]).unwrap();
    let m = metrics::evaluate(&problem, &Allocation::continuous(vec![4.0, 0.0])).unwrap();
    let row = metrics::compare(&m, &m);
    assert_eq!(row.cost_delta, 0.0);
    assert_eq!(row.cost_savings_pct, Some(0.0));
    assert_eq!(row.mean_utilization_delta, 0.0);
    assert_eq!(row.instance_diversity_delta, 0);
    assert_eq!(row.provider_fragmentation_delta, 0);
    assert_eq!(row.mean_overprovision_delta_pct, 0.0);
}
