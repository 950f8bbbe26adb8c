//! Benchmark scenarios and the comparison pipeline.
//!
//! Five bundled scenarios cover the spectrum from unconstrained greenfield
//! deployments to tightly restricted environments. Each comparison run
//! presents identical resource conditions (catalog, demand, existing
//! allocation, instance filter) to both strategies: the cluster-autoscaler
//! baseline scales its node pools, the optimizer solves the allocation
//! problem over the same admissible instance set. Repetitions re-seed the
//! multi-start search; the repetition with the median optimized cost is
//! reported.

use serde::{Deserialize, Serialize};

use crate::autoscaler::{self, Expander, PoolSpec};
use crate::catalog::InstanceCatalog;
use crate::error::{Error, Result};
use crate::metrics::{self, ComparisonRow, EvaluationMetrics, RadarSeries};
use crate::model::{Allocation, AllocationProblem, PenaltyParams};
use crate::report::RelaxationSummary;
use crate::solver::continuous::{self, BarrierSettings};
use crate::solver::integer::{self, SearchBudget, SolveMethod};

/// Resource-bound predicate over the schema; an instance is admitted when
/// every bound holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFilter {
    pub resource: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl InstanceFilter {
    fn admits(&self, catalog: &InstanceCatalog, instance: usize) -> Result<bool> {
        let r = catalog.schema.index_of(&self.resource).ok_or_else(|| {
            Error::validation(format!(
                "filter references unknown resource {:?}",
                self.resource
            ))
        })?;
        let v = catalog.instances[instance].capacities[r];
        Ok(self.min.is_none_or(|lo| v >= lo) && self.max.is_none_or(|hi| v <= hi))
    }
}

/// Sparse existing-allocation entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistingEntry {
    pub provider: String,
    pub sku: String,
    pub count: u32,
}

/// One benchmark scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub demand: Vec<f64>,
    /// Node pools available to the cluster-autoscaler baseline.
    pub pools: Vec<PoolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing: Option<Vec<ExistingEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_instance_filter: Option<Vec<InstanceFilter>>,
    /// Restrict the optimizer to the pool instance types (governance
    /// scenarios where only approved types may be used).
    #[serde(default)]
    pub restrict_to_pools: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

fn default_repetitions() -> usize {
    5
}

impl Scenario {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    fn existing_allocation(&self, catalog: &InstanceCatalog) -> Result<Option<Allocation>> {
        let Some(entries) = &self.existing else {
            return Ok(None);
        };
        let mut counts = vec![0.0; catalog.num_instances()];
        for entry in entries {
            let idx = catalog
                .instance_index(&entry.provider, &entry.sku)
                .ok_or_else(|| {
                    Error::validation(format!(
                        "existing allocation references unknown instance ({}, {})",
                        entry.provider, entry.sku
                    ))
                })?;
            counts[idx] += entry.count as f64;
        }
        Ok(Some(Allocation {
            counts,
            integral: true,
        }))
    }

    /// Catalog indices the optimizer may use: the filter intersected with
    /// the pool set when `restrict_to_pools` holds.
    pub fn allowed_indices(&self, catalog: &InstanceCatalog) -> Result<Vec<usize>> {
        let mut allowed = Vec::new();
        'outer: for i in 0..catalog.num_instances() {
            if let Some(filters) = &self.allowed_instance_filter {
                for f in filters {
                    if !f.admits(catalog, i)? {
                        continue 'outer;
                    }
                }
            }
            allowed.push(i);
        }
        if self.restrict_to_pools {
            let pool_set: Vec<usize> = self
                .pools
                .iter()
                .map(|p| p.resolve(catalog).map(|np| np.instance))
                .collect::<Result<_>>()?;
            allowed.retain(|i| pool_set.contains(i));
        }
        if allowed.is_empty() {
            return Err(Error::validation(format!(
                "scenario {:?}: no catalog instance passes the filter",
                self.name
            )));
        }
        Ok(allowed)
    }
}

/// Pipeline knobs shared by all scenario runs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub params: PenaltyParams,
    pub settings: BarrierSettings,
    pub starts: usize,
    pub node_budget: u64,
    pub expander: Expander,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: PenaltyParams::default(),
            settings: BarrierSettings::default(),
            starts: 4,
            node_budget: 4000,
            expander: Expander::LeastWaste,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub allocation: Vec<f64>,
    pub metrics: EvaluationMetrics,
    pub satisfied: bool,
    pub scale_event_count: usize,
    pub radar: RadarSeries,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizedSummary {
    pub allocation: Vec<f64>,
    pub metrics: EvaluationMetrics,
    pub method: SolveMethod,
    pub bound_gap: Option<f64>,
    pub nodes_explored: u64,
    pub relaxation: RelaxationSummary,
    pub radar: RadarSeries,
}

/// Side-by-side result of one scenario under identical resource conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub demand: Vec<f64>,
    pub baseline: BaselineSummary,
    pub optimized: OptimizedSummary,
    pub comparison: ComparisonRow,
    pub median_of_repetitions: bool,
    /// Index of the reported repetition.
    pub repetition: usize,
    pub repetitions: usize,
}

/// Builds the five bundled scenarios against a standard-schema catalog.
///
/// Pool construction rules (deterministic given the catalog):
/// * general purpose: 2-8 cores, 2-4 GB/core, at least 0.5 network
///   units/core; cheapest three per provider;
/// * size tiers: small 2-4 cores, medium >4-8, large >8, each requiring at
///   least 0.25 network units/core; cheapest three overall per tier;
/// * memory optimized: at least 6 GB/core;
/// * existing nodes: the cheapest qualifying instance per provider.
pub fn builtin_scenarios(catalog: &InstanceCatalog) -> Result<Vec<Scenario>> {
    let schema = &catalog.schema;
    let (cpu, mem, net) = match (
        schema.index_of("cpu_cores"),
        schema.index_of("memory_gb"),
        schema.index_of("network_units"),
    ) {
        (Some(c), Some(m), Some(n)) => (c, m, n),
        _ => {
            return Err(Error::validation(
                "builtin scenarios require cpu_cores, memory_gb, network_units in the schema",
            ))
        }
    };
    if schema.len() != 4 {
        return Err(Error::validation(
            "builtin scenarios require the standard four-resource schema",
        ));
    }

    let caps = |i: usize| &catalog.instances[i].capacities;
    let cost = |i: usize| catalog.instances[i].hourly_cost;
    let by_cost = |a: &usize, b: &usize| {
        cost(*a)
            .total_cmp(&cost(*b))
            .then_with(|| {
                catalog.instances[*a]
                    .provider_id
                    .cmp(&catalog.instances[*b].provider_id)
            })
            .then_with(|| catalog.instances[*a].sku.cmp(&catalog.instances[*b].sku))
    };

    let general_purpose: Vec<usize> = (0..catalog.num_instances())
        .filter(|&i| {
            let c = caps(i)[cpu];
            (2.0..=8.0).contains(&c)
                && caps(i)[mem] >= 2.0 * c
                && caps(i)[mem] <= 4.0 * c
                && caps(i)[net] >= 0.5 * c
        })
        .collect();
    let tier = |lo: f64, hi: f64| -> Vec<usize> {
        let mut v: Vec<usize> = (0..catalog.num_instances())
            .filter(|&i| {
                let c = caps(i)[cpu];
                c > lo && c <= hi && caps(i)[net] >= 0.25 * c
            })
            .collect();
        v.sort_by(by_cost);
        v.truncate(3);
        v
    };
    let memory_optimized: Vec<usize> = (0..catalog.num_instances())
        .filter(|&i| caps(i)[cpu] > 0.0 && caps(i)[mem] >= 6.0 * caps(i)[cpu])
        .collect();

    let cheapest_per_provider = |candidates: &[usize]| -> Vec<usize> {
        let mut picks: Vec<usize> = Vec::new();
        for provider in &catalog.providers {
            let mut own: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| &catalog.instances[i].provider_id == provider)
                .collect();
            own.sort_by(by_cost);
            if let Some(&first) = own.first() {
                picks.push(first);
            }
        }
        picks
    };
    let top_per_provider = |candidates: &[usize], k: usize| -> Vec<usize> {
        let mut picks = Vec::new();
        for provider in &catalog.providers {
            let mut own: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| &catalog.instances[i].provider_id == provider)
                .collect();
            own.sort_by(by_cost);
            own.truncate(k);
            picks.extend(own);
        }
        picks.sort_by(by_cost);
        picks
    };

    let pool_spec = |i: usize, current: u32| PoolSpec {
        instance_sku: catalog.instances[i].sku.clone(),
        provider: catalog.instances[i].provider_id.clone(),
        min_nodes: 0,
        max_nodes: 100,
        current_nodes: current,
    };
    let pools_of =
        |indices: &[usize]| -> Vec<PoolSpec> { indices.iter().map(|&i| pool_spec(i, 0)).collect() };
    let existing_of = |indices: &[usize]| -> Vec<ExistingEntry> {
        indices
            .iter()
            .map(|&i| ExistingEntry {
                provider: catalog.instances[i].provider_id.clone(),
                sku: catalog.instances[i].sku.clone(),
                count: 1,
            })
            .collect()
    };
    let require = |v: &[usize], what: &str| -> Result<()> {
        if v.is_empty() {
            Err(Error::validation(format!(
                "catalog lacks instances for {what}"
            )))
        } else {
            Ok(())
        }
    };

    // S1: greenfield web application; CA gets general-purpose pools, the
    // optimizer is unrestricted.
    let gp = top_per_provider(&general_purpose, 3);
    require(&gp, "general-purpose pools")?;
    let s1 = Scenario {
        name: "basic-web".into(),
        demand: vec![8.0, 16.0, 4.0, 100.0],
        pools: pools_of(&gp),
        existing: None,
        allowed_instance_filter: None,
        restrict_to_pools: false,
        max_deviation: None,
        repetitions: 5,
    };

    // S2: scaling with existing infrastructure; one small standard instance
    // per provider is pre-allocated, CA may only scale those types, and the
    // optimizer's churn is bounded.
    let small_standard: Vec<usize> = general_purpose
        .iter()
        .copied()
        .filter(|&i| caps(i)[cpu] <= 4.0)
        .collect();
    let small_existing = cheapest_per_provider(&small_standard);
    require(&small_existing, "small existing instances")?;
    let s2 = Scenario {
        name: "scale-existing".into(),
        demand: vec![16.0, 32.0, 8.0, 200.0],
        pools: pools_of(&small_existing),
        existing: Some(existing_of(&small_existing)),
        allowed_instance_filter: None,
        restrict_to_pools: false,
        max_deviation: Some(8.0),
        repetitions: 5,
    };

    // S3: enterprise fixed pools; nine pools in three size tiers, optimizer
    // restricted to the same approved types.
    let small_tier = tier(2.0 - 1e-9, 4.0);
    let medium_tier = tier(4.0, 8.0);
    let large_tier = tier(8.0, f64::INFINITY);
    for (t, name) in [
        (&small_tier, "small tier"),
        (&medium_tier, "medium tier"),
        (&large_tier, "large tier"),
    ] {
        if t.len() < 3 {
            return Err(Error::validation(format!(
                "catalog lacks three instances for the {name}"
            )));
        }
    }
    let mut nine = Vec::new();
    nine.extend(&small_tier);
    nine.extend(&medium_tier);
    nine.extend(&large_tier);
    let s3 = Scenario {
        name: "enterprise-pools".into(),
        demand: vec![24.0, 64.0, 12.0, 300.0],
        pools: pools_of(&nine),
        existing: None,
        allowed_instance_filter: None,
        restrict_to_pools: true,
        max_deviation: None,
        repetitions: 5,
    };

    // S4: memory-intensive processing; existing high-memory nodes plus
    // memory-optimized pools, optimizer unrestricted.
    let high_memory: Vec<usize> = (0..catalog.num_instances())
        .filter(|&i| caps(i)[mem] >= 16.0)
        .collect();
    let mem_existing = cheapest_per_provider(&high_memory);
    require(&mem_existing, "existing high-memory instances")?;
    require(&memory_optimized, "memory-optimized pools")?;
    let mut s4_pool_idx: Vec<usize> = memory_optimized.clone();
    s4_pool_idx.sort_by(by_cost);
    for &i in &mem_existing {
        if !s4_pool_idx.contains(&i) {
            s4_pool_idx.push(i);
        }
    }
    let s4 = Scenario {
        name: "memory-intensive".into(),
        demand: vec![32.0, 128.0, 12.0, 500.0],
        pools: pools_of(&s4_pool_idx),
        existing: Some(existing_of(&mem_existing)),
        allowed_instance_filter: None,
        restrict_to_pools: false,
        max_deviation: None,
        repetitions: 5,
    };

    // S5: only small instances (<= 2 cores) are permitted for both sides.
    let small_only: Vec<usize> = (0..catalog.num_instances())
        .filter(|&i| caps(i)[cpu] <= 2.0)
        .collect();
    require(&small_only, "<= 2 core instances")?;
    let mut s5_pool_idx = small_only.clone();
    s5_pool_idx.sort_by(by_cost);
    let s5 = Scenario {
        name: "small-only".into(),
        demand: vec![32.0, 64.0, 12.0, 300.0],
        pools: pools_of(&s5_pool_idx),
        existing: None,
        allowed_instance_filter: Some(vec![InstanceFilter {
            resource: "cpu_cores".into(),
            min: None,
            max: Some(2.0),
        }]),
        restrict_to_pools: true,
        max_deviation: None,
        repetitions: 5,
    };

    Ok(vec![s1, s2, s3, s4, s5])
}

/// Executes the comparison pipeline for one scenario: configure, run the
/// baseline, run the optimizer, and collect metrics, repeated with fresh
/// seeds; the repetition with the median optimized cost is reported.
pub fn run_comparison(
    scenario: &Scenario,
    catalog: &InstanceCatalog,
    config: &PipelineConfig,
) -> Result<ComparisonReport> {
    let reps = scenario.repetitions.max(1);
    let mut reports = Vec::with_capacity(reps);
    for rep in 0..reps {
        let seed = config.seed.wrapping_add(rep as u64);
        reports.push(run_single(scenario, catalog, config, seed, rep)?);
    }
    let mut order: Vec<usize> = (0..reps).collect();
    order.sort_by(|&a, &b| {
        reports[a]
            .optimized
            .metrics
            .total_cost
            .total_cmp(&reports[b].optimized.metrics.total_cost)
            .then(a.cmp(&b))
    });
    let median = order[(reps - 1) / 2];
    let mut report = reports.swap_remove(
        reports
            .iter()
            .position(|r| r.repetition == median)
            .expect("median index present"),
    );
    report.median_of_repetitions = reps > 1;
    Ok(report)
}

fn run_single(
    scenario: &Scenario,
    catalog: &InstanceCatalog,
    config: &PipelineConfig,
    seed: u64,
    rep: usize,
) -> Result<ComparisonReport> {
    // Shared evaluation context: full catalog, scenario demand.
    let eval_problem = AllocationProblem::new(catalog.clone(), scenario.demand.clone())?
        .with_params(config.params)?;
    let existing = scenario.existing_allocation(catalog)?;
    let resource_names = catalog.schema.names.clone();

    // Baseline: cluster-autoscaler simulation over the scenario pools.
    let pools = autoscaler::resolve_pools(catalog, &scenario.pools)?;
    let expander = match &config.expander {
        Expander::Random { .. } => Expander::Random { seed },
        other => other.clone(),
    };
    let ca = autoscaler::run_baseline(
        catalog,
        &pools,
        existing.as_ref(),
        &scenario.demand,
        &expander,
    )?;
    let ca_metrics = metrics::evaluate(&eval_problem, &ca.allocation)?;

    // Optimizer over the admissible instance subset.
    let allowed = scenario.allowed_indices(catalog)?;
    let (sub_catalog, index_map) = catalog.subset(&allowed)?;
    let mut sub_problem =
        AllocationProblem::new(sub_catalog, scenario.demand.clone())?.with_params(config.params)?;
    if let Some(existing) = &existing {
        let mut projected = vec![0.0; index_map.len()];
        for (sub_i, &full_i) in index_map.iter().enumerate() {
            projected[sub_i] = existing.counts[full_i];
        }
        let dropped: f64 = existing.counts.iter().sum::<f64>() - projected.iter().sum::<f64>();
        if dropped != 0.0 {
            return Err(Error::validation(format!(
                "scenario {:?}: existing allocation uses filtered-out instances",
                scenario.name
            )));
        }
        sub_problem = sub_problem.with_current(
            Allocation {
                counts: projected,
                integral: true,
            },
            scenario.max_deviation,
        )?;
    }

    let relaxed = continuous::multi_start(&sub_problem, &config.settings, config.starts, seed)?;
    let int = integer::solve_integer(
        &sub_problem,
        &config.settings,
        &SearchBudget::nodes(config.node_budget),
    )?;

    let mut full_counts = vec![0.0; catalog.num_instances()];
    for (sub_i, &full_i) in index_map.iter().enumerate() {
        full_counts[full_i] = int.x_hat.counts[sub_i];
    }
    let opt_alloc = Allocation {
        counts: full_counts,
        integral: true,
    };
    let opt_metrics = metrics::evaluate(&eval_problem, &opt_alloc)?;

    let comparison = metrics::compare(&ca_metrics, &opt_metrics);
    Ok(ComparisonReport {
        scenario: scenario.name.clone(),
        demand: scenario.demand.clone(),
        baseline: BaselineSummary {
            allocation: ca.allocation.counts.clone(),
            radar: metrics::radar_data(&resource_names, &ca_metrics),
            metrics: ca_metrics,
            satisfied: ca.satisfied,
            scale_event_count: ca.scale_events.len(),
        },
        optimized: OptimizedSummary {
            allocation: opt_alloc.counts.clone(),
            radar: metrics::radar_data(&resource_names, &opt_metrics),
            metrics: opt_metrics,
            method: int.method,
            bound_gap: int.bound_gap,
            nodes_explored: int.nodes_explored,
            relaxation: RelaxationSummary::from_solution(&relaxed, false),
        },
        comparison,
        median_of_repetitions: false,
        repetition: rep,
        repetitions: scenario.repetitions.max(1),
    })
}

/// Per-parameter value lists for [`grid_search`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGrid {
    pub alpha: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub beta3: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ParamGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [
            ("alpha", &self.alpha),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("beta3", &self.beta3),
            ("gamma", &self.gamma),
        ] {
            if axis.is_empty() {
                return Err(Error::validation(format!("grid dimension {name} is empty")));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.alpha.len() * self.beta1.len() * self.beta2.len() * self.beta3.len() * self.gamma.len()
    }
}

/// One grid cell outcome; infeasible cells carry `None` metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: PenaltyParams,
    pub feasible: bool,
    pub optimized_cost: Option<f64>,
    pub baseline_cost: f64,
    pub mean_utilization: Option<f64>,
    pub instance_diversity: Option<usize>,
    pub provider_fragmentation: Option<usize>,
    pub mean_overprovision_pct: Option<f64>,
    pub cost_savings_pct: Option<f64>,
}

/// Cartesian sweep over the five penalty parameters; each cell runs the
/// pipeline once (repetitions = 1), infeasible cells are recorded and the
/// sweep continues. Ordering is the nested loop order alpha, beta1, beta2,
/// beta3, gamma.
pub fn grid_search(
    scenario: &Scenario,
    catalog: &InstanceCatalog,
    grid: &ParamGrid,
    config: &PipelineConfig,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let mut single = scenario.clone();
    single.repetitions = 1;
    let mut rows = Vec::with_capacity(grid.cells());
    for &alpha in &grid.alpha {
        for &beta1 in &grid.beta1 {
            for &beta2 in &grid.beta2 {
                for &beta3 in &grid.beta3 {
                    for &gamma in &grid.gamma {
                        let params = PenaltyParams {
                            alpha,
                            beta1,
                            beta2,
                            beta3,
                            gamma,
                        };
                        params.validate()?;
                        let cell_config = PipelineConfig {
                            params,
                            ..config.clone()
                        };
                        match run_comparison(&single, catalog, &cell_config) {
                            Ok(report) => rows.push(SweepRow {
                                params,
                                feasible: true,
                                optimized_cost: Some(report.optimized.metrics.total_cost),
                                baseline_cost: report.baseline.metrics.total_cost,
                                mean_utilization: Some(report.optimized.metrics.mean_utilization),
                                instance_diversity: Some(
                                    report.optimized.metrics.instance_diversity,
                                ),
                                provider_fragmentation: Some(
                                    report.optimized.metrics.provider_fragmentation,
                                ),
                                mean_overprovision_pct: Some(
                                    report.optimized.metrics.mean_overprovision_pct,
                                ),
                                cost_savings_pct: report.comparison.cost_savings_pct,
                            }),
                            Err(err) if err.is_infeasible() => rows.push(SweepRow {
                                params,
                                feasible: false,
                                optimized_cost: None,
                                baseline_cost: 0.0,
                                mean_utilization: None,
                                instance_diversity: None,
                                provider_fragmentation: None,
                                mean_overprovision_pct: None,
                                cost_savings_pct: None,
                            }),
                            Err(err) => return Err(err),
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Metrics a sweep row can be ranked by (all minimized).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKey {
    Cost,
    Fragmentation,
    Diversity,
    Overprovision,
}

impl std::str::FromStr for MetricKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<MetricKey> {
        match s {
            "cost" => Ok(MetricKey::Cost),
            "fragmentation" => Ok(MetricKey::Fragmentation),
            "diversity" => Ok(MetricKey::Diversity),
            "overprovision" => Ok(MetricKey::Overprovision),
            other => Err(Error::validation(format!("unknown metric key {other:?}"))),
        }
    }
}

fn metric_value(row: &SweepRow, key: MetricKey) -> Option<f64> {
    match key {
        MetricKey::Cost => row.optimized_cost,
        MetricKey::Fragmentation => row.provider_fragmentation.map(|v| v as f64),
        MetricKey::Diversity => row.instance_diversity.map(|v| v as f64),
        MetricKey::Overprovision => row.mean_overprovision_pct,
    }
}

/// Non-dominated subset of the sweep table under a minimize/minimize
/// objective pair, in stable order of the first objective.
pub fn pareto_frontier(rows: &[SweepRow], objectives: (MetricKey, MetricKey)) -> Vec<SweepRow> {
    let values: Vec<Option<(f64, f64)>> = rows
        .iter()
        .map(
            |r| match (metric_value(r, objectives.0), metric_value(r, objectives.1)) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            },
        )
        .collect();
    let mut keep: Vec<usize> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let Some((a, b)) = v else { continue };
        let dominated = values.iter().enumerate().any(|(j, w)| {
            if i == j {
                return false;
            }
            let Some((wa, wb)) = w else { return false };
            wa <= a && wb <= b && (wa < a || wb < b)
        });
        if !dominated {
            keep.push(i);
        }
    }
    keep.sort_by(|&i, &j| {
        let (ai, bi) = values[i].expect("kept rows have values");
        let (aj, bj) = values[j].expect("kept rows have values");
        ai.total_cmp(&aj).then(bi.total_cmp(&bj)).then(i.cmp(&j))
    });
    keep.into_iter().map(|i| rows[i].clone()).collect()
}

/// Elasticity of the optimized cost with respect to one penalty parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub parameter: String,
    pub base_value: f64,
    pub elasticity: Option<f64>,
    /// Set when the base value is zero and only an upward perturbation was
    /// possible.
    pub one_sided: bool,
}

/// Central elasticity estimates `(dCost/Cost) / (dTheta/Theta)` per
/// parameter; zero-valued parameters are perturbed one-sided by the
/// absolute `perturbation` instead.
pub fn sensitivity(
    scenario: &Scenario,
    catalog: &InstanceCatalog,
    config: &PipelineConfig,
    perturbation: f64,
) -> Result<Vec<SensitivityRow>> {
    if !(perturbation > 0.0 && perturbation < 1.0) {
        return Err(Error::validation("perturbation must lie in (0, 1)"));
    }
    let mut single = scenario.clone();
    single.repetitions = 1;
    let cost_for = |params: PenaltyParams| -> Result<f64> {
        let cfg = PipelineConfig {
            params,
            ..config.clone()
        };
        Ok(run_comparison(&single, catalog, &cfg)?
            .optimized
            .metrics
            .total_cost)
    };
    let base_cost = cost_for(config.params)?;
    let base = config.params;

    let fields: [(&str, f64, fn(&mut PenaltyParams) -> &mut f64); 5] = [
        ("alpha", base.alpha, |p| &mut p.alpha),
        ("beta1", base.beta1, |p| &mut p.beta1),
        ("beta2", base.beta2, |p| &mut p.beta2),
        ("beta3", base.beta3, |p| &mut p.beta3),
        ("gamma", base.gamma, |p| &mut p.gamma),
    ];
    let mut rows = Vec::with_capacity(fields.len());
    for (name, value, access) in fields {
        let (elasticity, one_sided) = if value > 0.0 {
            let mut up = base;
            *access(&mut up) = value * (1.0 + perturbation);
            let mut down = base;
            *access(&mut down) = value * (1.0 - perturbation);
            let cost_up = cost_for(up)?;
            let cost_down = cost_for(down)?;
            let e = if base_cost > 0.0 {
                Some(((cost_up - cost_down) / base_cost) / (2.0 * perturbation))
            } else {
                None
            };
            (e, false)
        } else {
            let mut up = base;
            *access(&mut up) = perturbation;
            let cost_up = cost_for(up)?;
            let e = if base_cost > 0.0 {
                Some(((cost_up - base_cost) / base_cost) / perturbation)
            } else {
                None
            };
            (e, true)
        };
        rows.push(SensitivityRow {
            parameter: name.to_string(),
            base_value: value,
            elasticity,
            one_sided,
        });
    }
    Ok(rows)
}

/// Cost trajectory of both strategies as the first scenario's demand is
/// scaled by the given factors (the widening-gap study).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub factor: f64,
    pub baseline_cost: f64,
    pub optimized_cost: f64,
    pub gap: f64,
}

pub fn scaling_sweep(
    catalog: &InstanceCatalog,
    config: &PipelineConfig,
    factors: &[f64],
) -> Result<Vec<ScalingPoint>> {
    let base = builtin_scenarios(catalog)?.swap_remove(0);
    let mut points = Vec::with_capacity(factors.len());
    for &factor in factors {
        let mut scenario = base.clone();
        scenario.name = format!("{}-x{}", base.name, factor);
        scenario.demand = base.demand.iter().map(|d| d * factor).collect();
        scenario.repetitions = 1;
        let report = run_comparison(&scenario, catalog, config)?;
        points.push(ScalingPoint {
            factor,
            baseline_cost: report.baseline.metrics.total_cost,
            optimized_cost: report.optimized.metrics.total_cost,
            gap: report.baseline.metrics.total_cost - report.optimized.metrics.total_cost,
        });
    }
    Ok(points)
}
