//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with its measured numbers. Run with
//! `cargo test -p fleetmix-cli --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fleetmix_core::catalog::{
    bundled_catalog, composition_matrix, synth_catalog, InstanceCatalog, InstanceType,
    ResourceSchema, SynthRanges,
};
use fleetmix_core::kkt;
use fleetmix_core::model::{self, Allocation, AllocationProblem, PenaltyParams};
use fleetmix_core::scenarios::{builtin_scenarios, run_comparison, scaling_sweep, PipelineConfig};
use fleetmix_core::solver::continuous::{self, BarrierSettings};
use fleetmix_core::solver::integer::{self, SearchBudget};

/// Scalar objective oracle, independent of the model implementation.
fn oracle_objective(
    catalog: &InstanceCatalog,
    params: &PenaltyParams,
    demand: &[f64],
    x: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (inst, xi) in catalog.instances.iter().zip(x) {
        total += inst.hourly_cost * xi;
    }
    for provider in &catalog.providers {
        let mut z = 0.0;
        for (inst, xi) in catalog.instances.iter().zip(x) {
            if &inst.provider_id == provider {
                z += xi;
            }
        }
        total += params.alpha * (1.0 - (-params.beta1 * z).exp());
        total -= params.gamma * (1.0 + params.beta2 * z).ln();
    }
    for (r, d) in demand.iter().enumerate() {
        let mut provided = 0.0;
        for (inst, xi) in catalog.instances.iter().zip(x) {
            provided += inst.capacities[r] * xi;
        }
        let gap = d - provided;
        if gap > 0.0 {
            total += params.beta3 * gap * gap;
        }
    }
    total
}

#[test]
fn criterion_01_gradient_fidelity() {
    let started = Instant::now();
    let schema = ResourceSchema::standard();
    let ranges = SynthRanges::default_for(&schema);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=10);
        let p = rng.random_range(1..=2.min(n));
        let catalog = synth_catalog(seed.wrapping_mul(31), n, p, &schema, &ranges).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let kx = composition_matrix(&catalog).mul_vec(&x);
        // Demand at least 0.01 away from coverage on every axis: the hinge
        // indicator cannot flip inside the finite-difference stencil.
        let demand: Vec<f64> = kx
            .iter()
            .map(|v| {
                let offset = rng.random_range(0.01..0.5) * (1.0 + v.abs());
                if rng.random_range(0.0..1.0) < 0.5 {
                    (v - offset).max(0.0)
                } else {
                    v + offset
                }
            })
            .collect();
        let params = PenaltyParams {
            alpha: rng.random_range(0.0..0.5),
            beta1: rng.random_range(0.2..2.0),
            beta2: rng.random_range(0.05..0.5),
            beta3: rng.random_range(0.5..20.0),
            gamma: rng.random_range(0.0..0.1),
        };
        let problem = AllocationProblem::new(catalog.clone(), demand.clone())
            .unwrap()
            .with_params(params)
            .unwrap();
        let analytic = model::gradient(&problem, &Allocation::continuous(x.clone())).unwrap();
        let h = 1e-6;
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let mut plus = x.clone();
                plus[i] += h;
                let mut minus = x.clone();
                minus[i] -= h;
                (oracle_objective(&catalog, &params, &demand, &plus)
                    - oracle_objective(&catalog, &params, &demand, &minus))
                    / (2.0 * h)
            })
            .collect();
        let norm = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = analytic
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rel = diff / norm.max(1.0);
        worst = worst.max(rel);
        assert!(rel < 1e-5, "seed {seed}: relative error {rel:.3e}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "overran budget: {elapsed:?}");
    println!(
        "PASS criterion 1: gradient fidelity, 100 seeded pairs, worst rel err {worst:.2e}, {} ms",
        elapsed.as_millis()
    );
}

#[test]
fn criterion_02_small_instance_exactness() {
    let started = Instant::now();
    let settings = BarrierSettings::default();
    let mut worst_diff = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(2..=3usize);
        let schema = ResourceSchema::new(
            (0..m).map(|r| format!("res{r}")).collect(),
            (0..m).map(|_| "unit".to_string()).collect(),
        )
        .unwrap();
        let instances: Vec<InstanceType> = (0..n)
            .map(|i| InstanceType {
                provider_id: if i % 2 == 0 { "p0".into() } else { "p1".into() },
                sku: format!("t{i}"),
                capacities: (0..m).map(|_| rng.random_range(1..=8) as f64).collect(),
                hourly_cost: (rng.random_range(5..=100) as f64) / 100.0,
            })
            .collect();
        let catalog = InstanceCatalog::new(schema, instances).unwrap();
        let x_true: Vec<f64> = (0..n).map(|_| rng.random_range(0..=3) as f64).collect();
        let demand = composition_matrix(&catalog).mul_vec(&x_true);
        let waste: Vec<f64> = demand.iter().map(|d| 0.6 * d + 2.0).collect();
        let params = PenaltyParams {
            alpha: if seed % 2 == 0 { 0.3 } else { 0.0 },
            beta1: 0.8,
            beta2: 0.1,
            beta3: 10.0,
            gamma: 0.02,
        };
        let problem = AllocationProblem::new(catalog.clone(), demand.clone())
            .unwrap()
            .with_waste(waste)
            .unwrap()
            .with_params(params)
            .unwrap()
            .with_upper_bounds(vec![6.0; n])
            .unwrap();

        // Enumeration oracle over at most 7^4 lattice points.
        let mut best: Option<f64> = None;
        let mut counts = vec![0u32; n];
        'enumerate: loop {
            let x: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
            let kx = composition_matrix(&catalog).mul_vec(&x);
            let feasible = kx
                .iter()
                .zip(&demand)
                .zip(problem.waste())
                .all(|((have, d), g)| *have >= d - 1e-9 && *have <= d + g + 1e-9);
            if feasible {
                let v = oracle_objective(&catalog, &params, &demand, &x);
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
            let mut i = 0;
            loop {
                if i == n {
                    break 'enumerate;
                }
                if counts[i] < 6 {
                    counts[i] += 1;
                    break;
                }
                counts[i] = 0;
                i += 1;
            }
        }
        let oracle = best.expect("x_true is feasible");
        let sol = integer::solve_integer(&problem, &settings, &SearchBudget::default()).unwrap();
        let diff = (sol.breakdown.total - oracle).abs();
        worst_diff = worst_diff.max(diff);
        assert!(
            diff <= 1e-6,
            "seed {seed}: bnb {} vs enumeration {oracle}",
            sol.breakdown.total
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "overran budget: {elapsed:?}");
    println!(
        "PASS criterion 2: branch-and-bound equals enumeration on 50 problems (incl. alpha > 0), worst diff {worst_diff:.2e}, {} ms",
        elapsed.as_millis()
    );
}

#[test]
fn criterion_03_kkt_certification() {
    let started = Instant::now();
    let schema = ResourceSchema::standard();
    let ranges = SynthRanges::default_for(&schema);
    let settings = BarrierSettings::default();
    let mut worst_stat = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let n = rng.random_range(3..=10);
        let catalog = synth_catalog(seed.wrapping_mul(97), n, 2.min(n), &schema, &ranges).unwrap();
        let x_ref: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let demand = composition_matrix(&catalog).mul_vec(&x_ref);
        let waste: Vec<f64> = demand.iter().map(|d| 0.5 * d).collect();
        let problem = AllocationProblem::new(catalog, demand)
            .unwrap()
            .with_waste(waste)
            .unwrap()
            .with_params(PenaltyParams {
                alpha: 0.0,
                beta1: 1.0,
                beta2: 0.1,
                beta3: 10.0,
                gamma: 0.01,
            })
            .unwrap();
        let sol = continuous::solve_relaxed(&problem, &settings, None).unwrap();
        assert!(sol.converged, "seed {seed} did not converge");
        let report = kkt::kkt_report(&problem, &sol.x_star, &sol.multipliers).unwrap();
        let scale = kkt::scale_factor(&problem);
        let stat = report.stationarity_norm / scale;
        worst_stat = worst_stat.max(stat);
        assert!(stat <= 1e-4, "seed {seed}: stationarity {stat:.3e}");
        assert!(
            report.primal_violation / scale <= 1e-8,
            "seed {seed}: primal {:.3e}",
            report.primal_violation / scale
        );
        assert!(
            report.comp_slack_max / scale <= 1e-4,
            "seed {seed}: comp slack {:.3e}",
            report.comp_slack_max / scale
        );
        assert_eq!(report.dual_violation, 0.0, "seed {seed}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "overran budget: {elapsed:?}");
    println!(
        "PASS criterion 3: 20 convex fixtures certified (worst scaled stationarity {worst_stat:.2e}), {} ms",
        elapsed.as_millis()
    );
}

#[test]
fn criterion_04_rounding_contract() {
    let schema = ResourceSchema::standard();
    let ranges = SynthRanges::default_for(&schema);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n = rng.random_range(2..=10);
        let catalog = synth_catalog(seed.wrapping_mul(13), n, 2.min(n), &schema, &ranges).unwrap();
        let demand: Vec<f64> = (0..4)
            .map(|r| rng.random_range(0.0..40.0) * [1.0, 2.0, 0.25, 10.0][r])
            .collect();
        let problem = AllocationProblem::new(catalog.clone(), demand.clone()).unwrap();
        let x_relaxed: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
        let sol = integer::greedy_round(&problem, &Allocation::continuous(x_relaxed)).unwrap();
        let kx = composition_matrix(&catalog).mul_vec(&sol.x_hat.counts);
        for (have, need) in kx.iter().zip(&demand) {
            assert!(have >= need, "seed {seed}: {have} < {need}");
        }
    }

    // The hand-traced example: floor(3.6, 0.2) = (3, 0); ratios 200 vs 288;
    // one type-B increment covers the deficit.
    let schema = ResourceSchema::new(
        vec!["cpu_cores".into(), "memory_gb".into()],
        vec!["cores".into(), "GB".into()],
    )
    .unwrap();
    let catalog = InstanceCatalog::new(
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
    .unwrap();
    let problem = AllocationProblem::new(catalog, vec![8.0, 16.0])
        .unwrap()
        .with_waste(vec![8.0, 32.0])
        .unwrap();
    let sol = integer::greedy_round(&problem, &Allocation::continuous(vec![3.6, 0.2])).unwrap();
    assert_eq!(sol.x_hat.counts, vec![3.0, 1.0]);
    assert!((sol.breakdown.base_cost - 0.55).abs() < 1e-12);
    println!(
        "PASS criterion 4: greedy rounding covered demand on 100 seeded inputs and reproduced the (3,0)->(3,1) trace"
    );
}

#[test]
fn criterion_05_objective_trivia() {
    // f(0) = beta3 * sum d_r^2 exactly.
    let catalog = bundled_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(4444);
    let mut checked = 0;
    for scenario in builtin_scenarios(&catalog).unwrap() {
        for beta3 in [1.0, 10.0] {
            let problem = AllocationProblem::new(catalog.clone(), scenario.demand.clone())
                .unwrap()
                .with_params(PenaltyParams {
                    beta3,
                    ..PenaltyParams::default()
                })
                .unwrap();
            let b = model::objective(&problem, &Allocation::zeros(problem.n())).unwrap();
            let expected: f64 = beta3 * scenario.demand.iter().map(|d| d * d).sum::<f64>();
            assert_eq!(b.total, expected, "{}", scenario.name);
            assert_eq!(b.consolidation_penalty, 0.0);
            assert_eq!(b.volume_discount, 0.0);
            assert_eq!(b.base_cost, 0.0);
            checked += 1;
        }
    }
    // Breakdown sums to total at 1e-12 relative on random fixtures.
    for _ in 0..200 {
        let demand: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..200.0)).collect();
        let problem = AllocationProblem::new(catalog.clone(), demand).unwrap();
        let x: Vec<f64> = (0..problem.n())
            .map(|_| rng.random_range(0.0..6.0))
            .collect();
        let b = model::objective(&problem, &Allocation::continuous(x)).unwrap();
        let sum = b.base_cost + b.consolidation_penalty + b.volume_discount + b.shortage_penalty;
        assert!((b.total - sum).abs() <= 1e-12 * b.total.abs().max(1.0));
        checked += 1;
    }
    println!("PASS criterion 5: f(0) = beta3*sum(d^2) exactly and breakdown sums held on {checked} fixtures");
}

#[test]
fn criterion_06_baseline_dominance() {
    let started = Instant::now();
    let catalog = bundled_catalog();
    let config = PipelineConfig::default();
    let scenarios = builtin_scenarios(&catalog).unwrap();
    let mut lines = Vec::new();
    for (idx, scenario) in scenarios.iter().enumerate() {
        let report = run_comparison(scenario, &catalog, &config).unwrap();
        let ca = report.baseline.metrics.total_cost;
        let opt = report.optimized.metrics.total_cost;
        assert!(
            report.baseline.satisfied,
            "{} baseline unsatisfied",
            scenario.name
        );
        assert!(
            opt <= ca + 1e-9,
            "{}: optimizer {opt} exceeds baseline {ca}",
            scenario.name
        );
        if idx >= 2 {
            // Scenario 3/4/5 analogs require strict improvement.
            assert!(
                opt < ca - 1e-9,
                "{}: expected strict improvement, got {opt} vs {ca}",
                scenario.name
            );
        }
        if idx == 3 {
            assert!(
                report.optimized.metrics.mean_overprovision_pct
                    < report.baseline.metrics.mean_overprovision_pct,
                "memory scenario over-provisioning not improved"
            );
        }
        lines.push(format!(
            "{}: ca ${ca:.3} vs opt ${opt:.3} ({:.1}% saved)",
            scenario.name,
            report.comparison.cost_savings_pct.unwrap_or(0.0)
        ));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "overran budget: {elapsed:?}");
    println!(
        "PASS criterion 6: optimizer dominates the baseline on all five scenarios [{}], {} ms",
        lines.join("; "),
        elapsed.as_millis()
    );
}

#[test]
fn criterion_07_scaling_gap_trend() {
    let started = Instant::now();
    let catalog = bundled_catalog();
    let config = PipelineConfig::default();
    let points = scaling_sweep(&catalog, &config, &[1.0, 2.0, 4.0, 8.0]).unwrap();
    for pair in points.windows(2) {
        assert!(
            pair[1].gap >= pair[0].gap - 1e-9,
            "gap shrank from {} to {} (factor {} -> {})",
            pair[0].gap,
            pair[1].gap,
            pair[0].factor,
            pair[1].factor
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "overran budget: {elapsed:?}");
    let gaps: Vec<String> = points.iter().map(|p| format!("{:.3}", p.gap)).collect();
    println!(
        "PASS criterion 7: baseline-optimizer gap nondecreasing over factors 1,2,4,8: [{}], {} ms",
        gaps.join(", "),
        elapsed.as_millis()
    );
}

#[test]
fn criterion_08_incremental_adoption() {
    let schema = ResourceSchema::new(
        vec!["cpu_cores".into(), "memory_gb".into()],
        vec!["cores".into(), "GB".into()],
    )
    .unwrap();
    let catalog = InstanceCatalog::new(
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
    .unwrap();
    let settings = BarrierSettings::default();
    let current = vec![4.0, 0.0];
    for dmax in [0.0, 1.0, 4.0] {
        let problem = AllocationProblem::new(catalog.clone(), vec![8.0, 16.0])
            .unwrap()
            .with_waste(vec![8.0, 32.0])
            .unwrap()
            .with_current(Allocation::continuous(current.clone()), Some(dmax))
            .unwrap();
        let problem = integer::apply_incremental(&problem).unwrap();
        let sol = integer::solve_integer(&problem, &settings, &SearchBudget::default()).unwrap();
        let l1: f64 = sol
            .x_hat
            .counts
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 <= dmax, "dmax {dmax}: moved {l1}");
        if dmax == 0.0 {
            assert_eq!(sol.x_hat.counts, current);
        }
    }
    // dmax = 0 certifies infeasibility when the current point violates the
    // demand bounds.
    let infeasible = AllocationProblem::new(catalog, vec![8.0, 16.0])
        .unwrap()
        .with_waste(vec![8.0, 32.0])
        .unwrap()
        .with_current(Allocation::continuous(vec![1.0, 0.0]), Some(0.0))
        .unwrap();
    let err = integer::solve_integer(&infeasible, &settings, &SearchBudget::default()).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
    println!(
        "PASS criterion 8: l1 deviation bounds held exactly for dmax in {{0, 1, 4}}; dmax = 0 returns x_current or certifies infeasibility"
    );
}

#[test]
fn criterion_09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let status = Command::new(env!("CARGO_BIN_EXE_fleetmix"))
            .args(["scenarios", "--seed", "42", "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success(), "scenarios run failed");
    }
    let mut compared = 0;
    for name in [
        "basic-web",
        "scale-existing",
        "enterprise-pools",
        "memory-intensive",
        "small-only",
    ] {
        let a: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out1.join(format!("{name}.json"))).unwrap(),
        )
        .unwrap();
        let b: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out2.join(format!("{name}.json"))).unwrap(),
        )
        .unwrap();
        // Byte-identical outside the metadata timestamp block.
        assert_eq!(
            serde_json::to_string(&a["report"]).unwrap(),
            serde_json::to_string(&b["report"]).unwrap(),
            "{name} differs between runs"
        );
        compared += 1;
    }
    for csv in ["summary.csv", "radar.csv"] {
        assert_eq!(
            std::fs::read(out1.join(csv)).unwrap(),
            std::fs::read(out2.join(csv)).unwrap(),
            "{csv} differs between runs"
        );
    }
    println!(
        "PASS criterion 9: two seed-42 scenario runs produced byte-identical reports ({compared} scenarios + 2 CSVs)"
    );
}

#[test]
fn criterion_10_ca_closed_form() {
    use fleetmix_core::autoscaler::{simulate_scale_up, ClusterState, Expander, NodePool};
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for case in 0..50 {
        let m = rng.random_range(2..=4usize);
        let schema = ResourceSchema::new(
            (0..m).map(|r| format!("res{r}")).collect(),
            (0..m).map(|_| "unit".to_string()).collect(),
        )
        .unwrap();
        let caps: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..16.0)).collect();
        let catalog = InstanceCatalog::new(
            schema,
            vec![InstanceType {
                provider_id: "p0".into(),
                sku: "t0".into(),
                capacities: caps.clone(),
                hourly_cost: 0.1,
            }],
        )
        .unwrap();
        let demand: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..60.0)).collect();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 1000, 0).unwrap()],
            demand.clone(),
        )
        .unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        let expected = demand
            .iter()
            .zip(&caps)
            .map(|(d, c)| (d / c).ceil())
            .fold(0.0f64, f64::max) as u32;
        assert!(result.satisfied, "case {case}");
        assert_eq!(
            result.final_pools[0].current_nodes, expected,
            "case {case}: demand {demand:?} caps {caps:?}"
        );
    }
    println!("PASS criterion 10: single-pool scale-up hit ceil(max_r d_r / K_r) on 50 randomized fixtures");
}
