//! Evaluation metrics and strategy comparison.
//!
//! Utilization divides demand by provided capacity per resource and takes
//! the mean over the defined dimensions; over-provisioning uses the demand
//! denominator, `((Kx)_r - d_r) / d_r * 100`, so values above 100% are
//! possible and expected for wasteful baselines.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::dot;
use crate::model::{Allocation, AllocationProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub total_cost: f64,
    /// Mean over resources with defined utilization (capped at 1 under
    /// shortage; `None` per resource when nothing is provisioned for a
    /// demanded resource).
    pub mean_utilization: f64,
    pub per_resource_utilization: Vec<Option<f64>>,
    /// Number of distinct instance types deployed.
    pub instance_diversity: usize,
    /// Number of providers with at least one instance.
    pub provider_fragmentation: usize,
    pub mean_overprovision_pct: f64,
    /// `None` where demand is zero (undefined percentage).
    pub per_resource_overprovision_pct: Vec<Option<f64>>,
    /// Set when some demanded resource is not fully covered.
    pub shortage: bool,
    pub demand: Vec<f64>,
    pub provided: Vec<f64>,
}

/// Computes all metrics for one allocation under one problem instance.
pub fn evaluate(problem: &AllocationProblem, x: &Allocation) -> Result<EvaluationMetrics> {
    if x.len() != problem.n() {
        return Err(crate::error::Error::dimension(
            "allocation length != catalog size",
        ));
    }
    let provided = problem.k().mul_vec(&x.counts);
    let demand = problem.demand().to_vec();
    let total_cost = dot(problem.cost(), &x.counts);

    let mut shortage = false;
    let mut utilization = Vec::with_capacity(demand.len());
    let mut overprovision = Vec::with_capacity(demand.len());
    for (d, have) in demand.iter().zip(&provided) {
        if *have > 0.0 {
            if d > have {
                shortage = true;
            }
            utilization.push(Some((d / have).min(1.0)));
        } else if *d > 0.0 {
            shortage = true;
            utilization.push(None);
        } else {
            utilization.push(Some(0.0));
        }
        if *d > 0.0 {
            overprovision.push(Some((have - d) / d * 100.0));
        } else {
            overprovision.push(None);
        }
    }
    let mean_utilization = mean_defined(&utilization);
    let mean_overprovision_pct = mean_defined(&overprovision);

    let instance_diversity = x.counts.iter().filter(|c| **c > 0.0).count();
    let ex = problem.e().mul_vec(&x.counts);
    let provider_fragmentation = ex.iter().filter(|v| **v > 0.0).count();

    Ok(EvaluationMetrics {
        total_cost,
        mean_utilization,
        per_resource_utilization: utilization,
        instance_diversity,
        provider_fragmentation,
        mean_overprovision_pct,
        per_resource_overprovision_pct: overprovision,
        shortage,
        demand,
        provided,
    })
}

fn mean_defined(values: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// Side-by-side deltas between a baseline and an optimized allocation on
/// the same problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `(baseline - optimized) / baseline * 100`; `None` when the baseline
    /// cost is zero.
    pub cost_savings_pct: Option<f64>,
    pub cost_delta: f64,
    pub mean_utilization_delta: f64,
    pub instance_diversity_delta: i64,
    pub provider_fragmentation_delta: i64,
    pub mean_overprovision_delta_pct: f64,
}

pub fn compare(baseline: &EvaluationMetrics, optimized: &EvaluationMetrics) -> ComparisonRow {
    let cost_savings_pct = if baseline.total_cost > 0.0 {
        Some((baseline.total_cost - optimized.total_cost) / baseline.total_cost * 100.0)
    } else {
        None
    };
    ComparisonRow {
        cost_savings_pct,
        cost_delta: optimized.total_cost - baseline.total_cost,
        mean_utilization_delta: optimized.mean_utilization - baseline.mean_utilization,
        instance_diversity_delta: optimized.instance_diversity as i64
            - baseline.instance_diversity as i64,
        provider_fragmentation_delta: optimized.provider_fragmentation as i64
            - baseline.provider_fragmentation as i64,
        mean_overprovision_delta_pct: optimized.mean_overprovision_pct
            - baseline.mean_overprovision_pct,
    }
}

/// One radar-plot spoke: demand-normalized provision and utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub resource: String,
    /// Always 1.0 (demand normalizes itself).
    pub demand_norm: f64,
    pub provided_norm: f64,
    pub utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub points: Vec<RadarPoint>,
    /// Resources omitted because their demand is zero.
    pub omitted: Vec<String>,
}

/// Per-resource series normalized by demand for radar plotting.
pub fn radar_data(resource_names: &[String], metrics: &EvaluationMetrics) -> RadarSeries {
    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for (r, name) in resource_names.iter().enumerate() {
        let d = metrics.demand[r];
        if d <= 0.0 {
            omitted.push(name.clone());
            continue;
        }
        points.push(RadarPoint {
            resource: name.clone(),
            demand_norm: 1.0,
            provided_norm: metrics.provided[r] / d,
            utilization: metrics.per_resource_utilization[r],
        });
    }
    RadarSeries { points, omitted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{InstanceCatalog, InstanceType, ResourceSchema};

    fn ab_problem(demand: Vec<f64>) -> AllocationProblem {
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
                    provider_id: "linode".into(),
                    sku: "B".into(),
                    capacities: vec![4.0, 16.0],
                    hourly_cost: 0.25,
                },
            ],
        )
        .unwrap();
        AllocationProblem::new(catalog, demand).unwrap()
    }

    #[test]
    fn utilization_and_overprovision_arithmetic() {
        // Kx = (10, 28) against d = (8, 16): utilization (0.8, 4/7),
        // overprovision (25%, 75%).
        let problem = ab_problem(vec![8.0, 16.0]);
        let x = Allocation::continuous(vec![3.0, 1.0]);
        let m = evaluate(&problem, &x).unwrap();
        assert_eq!(m.provided, vec![10.0, 28.0]);
        assert!((m.per_resource_utilization[0].unwrap() - 0.8).abs() < 1e-12);
        assert!((m.per_resource_utilization[1].unwrap() - 16.0 / 28.0).abs() < 1e-12);
        assert!((m.mean_utilization - (0.8 + 16.0 / 28.0) / 2.0).abs() < 1e-12);
        assert_eq!(m.per_resource_overprovision_pct[0], Some(25.0));
        assert_eq!(m.per_resource_overprovision_pct[1], Some(75.0));
        assert!((m.mean_overprovision_pct - 50.0).abs() < 1e-12);
        assert!(!m.shortage);
    }

    #[test]
    fn empty_allocation_on_empty_demand() {
        let problem = ab_problem(vec![0.0, 0.0]);
        let m = evaluate(&problem, &Allocation::zeros(2)).unwrap();
        assert_eq!(m.total_cost, 0.0);
        assert_eq!(m.instance_diversity, 0);
        assert_eq!(m.provider_fragmentation, 0);
        assert!(!m.shortage);
    }

    #[test]
    fn mixed_providers_count_as_fragmentation_two() {
        let problem = ab_problem(vec![8.0, 16.0]);
        let m = evaluate(&problem, &Allocation::continuous(vec![1.0, 1.0])).unwrap();
        assert_eq!(m.provider_fragmentation, 2);
        assert_eq!(m.instance_diversity, 2);
    }

    #[test]
    fn shortage_flagged_when_uncovered() {
        let problem = ab_problem(vec![8.0, 16.0]);
        let m = evaluate(&problem, &Allocation::continuous(vec![1.0, 0.0])).unwrap();
        assert!(m.shortage);
        // Capped at 1.
        assert_eq!(m.per_resource_utilization[0], Some(1.0));
    }

    #[test]
    fn reported_savings_percentages() {
        // 0.12 vs 0.07 -> 41.666..%; 1.08 vs 0.14 -> 87.037..%.
        let problem = ab_problem(vec![8.0, 16.0]);
        let mut base = evaluate(&problem, &Allocation::continuous(vec![1.0, 0.0])).unwrap();
        let mut opt = base.clone();
        base.total_cost = 0.12;
        opt.total_cost = 0.07;
        let row = compare(&base, &opt);
        assert!((row.cost_savings_pct.unwrap() - 41.666666666666664).abs() < 1e-9);
        base.total_cost = 1.08;
        opt.total_cost = 0.14;
        let row = compare(&base, &opt);
        assert!((row.cost_savings_pct.unwrap() - 87.03703703703704).abs() < 1e-9);
    }

    #[test]
    fn equal_costs_compare_to_zero() {
        let problem = ab_problem(vec![8.0, 16.0]);
        let m = evaluate(&problem, &Allocation::continuous(vec![4.0, 0.0])).unwrap();
        let row = compare(&m, &m);
        assert_eq!(row.cost_savings_pct, Some(0.0));
        assert_eq!(row.cost_delta, 0.0);
        assert_eq!(row.mean_utilization_delta, 0.0);
        assert_eq!(row.instance_diversity_delta, 0);
    }

    #[test]
    fn scale_consistency_under_doubling() {
        let problem = ab_problem(vec![8.0, 16.0]);
        let doubled = ab_problem(vec![16.0, 32.0]);
        let a = evaluate(&problem, &Allocation::continuous(vec![3.0, 1.0])).unwrap();
        let b = evaluate(&doubled, &Allocation::continuous(vec![6.0, 2.0])).unwrap();
        assert!((b.total_cost - 2.0 * a.total_cost).abs() < 1e-12);
        assert!((b.mean_utilization - a.mean_utilization).abs() < 1e-12);
        assert!((b.mean_overprovision_pct - a.mean_overprovision_pct).abs() < 1e-12);
    }

    #[test]
    fn radar_normalizes_by_demand_and_omits_zero_rows() {
        let problem = ab_problem(vec![8.0, 0.0]);
        let m = evaluate(&problem, &Allocation::continuous(vec![5.0, 0.0])).unwrap();
        let names = problem.catalog().schema.names.clone();
        let radar = radar_data(&names, &m);
        assert_eq!(radar.points.len(), 1);
        assert_eq!(radar.points[0].resource, "cpu_cores");
        assert!((radar.points[0].provided_norm - 10.0 / 8.0).abs() < 1e-12);
        assert_eq!(radar.omitted, vec!["memory_gb".to_string()]);
    }

    #[test]
    fn radar_exact_match_is_unit_norm() {
        let problem = ab_problem(vec![8.0, 16.0]);
        let m = evaluate(&problem, &Allocation::continuous(vec![4.0, 0.0])).unwrap();
        let radar = radar_data(&problem.catalog().schema.names.clone(), &m);
        for p in &radar.points {
            assert!((p.provided_norm - 1.0).abs() < 1e-12);
        }
    }
}
