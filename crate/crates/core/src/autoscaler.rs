//! Kubernetes Cluster Autoscaler baseline simulation.
//!
//! The baseline can only scale predefined node pools of one fixed instance
//! type each, one node at a time: scale-up adds nodes to pools chosen by an
//! expander until the aggregate capacity covers pending demand (or headroom
//! runs out), scale-down removes nodes whose capacity is not needed for
//! coverage. Demand is packed as an aggregate vector against the sum of
//! discrete node capacities; pod-level placement is out of scope.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::InstanceCatalog;
use crate::error::{Error, Result};
use crate::model::Allocation;

/// A homogeneous group of nodes of one instance type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePool {
    /// Index into the catalog's instance list.
    pub instance: usize,
    pub min_nodes: u32,
    pub max_nodes: u32,
    pub current_nodes: u32,
}

impl NodePool {
    pub fn new(
        instance: usize,
        min_nodes: u32,
        max_nodes: u32,
        current_nodes: u32,
    ) -> Result<Self> {
        if !(min_nodes <= current_nodes && current_nodes <= max_nodes) {
            return Err(Error::validation(format!(
                "pool bounds must satisfy min <= current <= max, got {min_nodes} <= {current_nodes} <= {max_nodes}"
            )));
        }
        Ok(NodePool {
            instance,
            min_nodes,
            max_nodes,
            current_nodes,
        })
    }
}

/// Node pools plus the pending aggregate demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub pools: Vec<NodePool>,
    pub pending_demand: Vec<f64>,
}

impl ClusterState {
    pub fn new(
        catalog: &InstanceCatalog,
        pools: Vec<NodePool>,
        pending_demand: Vec<f64>,
    ) -> Result<Self> {
        if pending_demand.len() != catalog.num_resources() {
            return Err(Error::dimension("pending demand length != m"));
        }
        if pending_demand.iter().any(|v| *v < 0.0) {
            return Err(Error::validation("pending demand must be nonnegative"));
        }
        for pool in &pools {
            if pool.instance >= catalog.num_instances() {
                return Err(Error::validation(format!(
                    "pool instance index {} out of range",
                    pool.instance
                )));
            }
        }
        Ok(ClusterState {
            pools,
            pending_demand,
        })
    }

    /// Aggregate capacity of all pools.
    fn coverage(&self, catalog: &InstanceCatalog) -> Vec<f64> {
        let m = catalog.num_resources();
        let mut total = vec![0.0; m];
        for pool in &self.pools {
            let caps = &catalog.instances[pool.instance].capacities;
            for r in 0..m {
                total[r] += pool.current_nodes as f64 * caps[r];
            }
        }
        total
    }

    fn covered(&self, catalog: &InstanceCatalog) -> bool {
        self.coverage(catalog)
            .iter()
            .zip(&self.pending_demand)
            .all(|(have, need)| have >= need)
    }
}

/// Rule for choosing which pool to grow when demand is unmet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expander {
    /// Minimize capacity left over above the current deficit, normalized by
    /// the pool's total capacity; lowest pool index on ties.
    LeastWaste,
    /// Uniform among pools with headroom, deterministic for a fixed seed.
    Random { seed: u64 },
    /// First pool of the given preference order with headroom.
    Priority { order: Vec<usize> },
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaResult {
    pub final_pools: Vec<NodePool>,
    /// Node counts mapped onto catalog indices.
    pub allocation: Allocation,
    pub satisfied: bool,
    /// Ordered `(pool index, +1 | -1)` log.
    pub scale_events: Vec<(usize, i32)>,
}

fn allocation_from_pools(catalog: &InstanceCatalog, pools: &[NodePool]) -> Allocation {
    let mut counts = vec![0.0; catalog.num_instances()];
    for pool in pools {
        counts[pool.instance] += pool.current_nodes as f64;
    }
    Allocation {
        counts,
        integral: true,
    }
}

/// Adds nodes (one per step, chosen by the expander) until demand is
/// covered or no pool has headroom.
pub fn simulate_scale_up(
    catalog: &InstanceCatalog,
    state: &ClusterState,
    expander: &Expander,
) -> Result<CaResult> {
    let mut state = state.clone();
    let m = catalog.num_resources();
    let mut events = Vec::new();
    let mut rng = match expander {
        Expander::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    loop {
        let coverage = state.coverage(catalog);
        let deficit: Vec<f64> = state
            .pending_demand
            .iter()
            .zip(&coverage)
            .map(|(need, have)| need - have)
            .collect();
        if !deficit.iter().any(|v| *v > 0.0) {
            return Ok(CaResult {
                allocation: allocation_from_pools(catalog, &state.pools),
                final_pools: state.pools,
                satisfied: true,
                scale_events: events,
            });
        }

        let headroom: Vec<usize> = state
            .pools
            .iter()
            .enumerate()
            .filter(|(_, p)| p.current_nodes < p.max_nodes)
            .map(|(i, _)| i)
            .collect();
        if headroom.is_empty() {
            return Ok(CaResult {
                allocation: allocation_from_pools(catalog, &state.pools),
                final_pools: state.pools,
                satisfied: false,
                scale_events: events,
            });
        }

        let chosen = match expander {
            Expander::LeastWaste => {
                let mut best = headroom[0];
                let mut best_score = f64::INFINITY;
                for &idx in &headroom {
                    let caps = &catalog.instances[state.pools[idx].instance].capacities;
                    let total: f64 = caps.iter().sum();
                    let mut leftover = 0.0;
                    for r in 0..m {
                        leftover += (caps[r] - deficit[r].max(0.0)).max(0.0);
                    }
                    let score = if total > 0.0 {
                        leftover / total
                    } else {
                        f64::INFINITY
                    };
                    if score < best_score {
                        best_score = score;
                        best = idx;
                    }
                }
                best
            }
            Expander::Random { .. } => {
                let rng = rng.as_mut().expect("random expander has an rng");
                headroom[rng.random_range(0..headroom.len())]
            }
            Expander::Priority { order } => {
                let mut pick = None;
                for &idx in order {
                    if headroom.contains(&idx) {
                        pick = Some(idx);
                        break;
                    }
                }
                // Pools missing from the order fall back to index order.
                pick.unwrap_or(headroom[0])
            }
        };
        state.pools[chosen].current_nodes += 1;
        events.push((chosen, 1));
    }
}

/// Removes nodes (largest pool first, lowest index on ties) while removal
/// keeps demand covered, pools stay at or above `min_nodes`, and the
/// cluster-level utilization of every resource the pool provides sits at or
/// below `utilization_threshold` (1.0 reproduces the pure coverage rule).
pub fn simulate_scale_down(
    catalog: &InstanceCatalog,
    state: &ClusterState,
    utilization_threshold: f64,
) -> Result<CaResult> {
    if !(utilization_threshold > 0.0 && utilization_threshold <= 1.0) {
        return Err(Error::validation(
            "utilization threshold must lie in (0, 1]",
        ));
    }
    let mut state = state.clone();
    let m = catalog.num_resources();
    let mut events = Vec::new();

    loop {
        let coverage = state.coverage(catalog);
        // Pools ordered largest first, index ascending on ties.
        let mut order: Vec<usize> = (0..state.pools.len()).collect();
        order.sort_by(|&a, &b| {
            state.pools[b]
                .current_nodes
                .cmp(&state.pools[a].current_nodes)
                .then(a.cmp(&b))
        });

        let mut removed = false;
        for idx in order {
            let pool = &state.pools[idx];
            if pool.current_nodes == 0 || pool.current_nodes <= pool.min_nodes {
                continue;
            }
            let caps = &catalog.instances[pool.instance].capacities;
            // Underutilization gate: every resource this node provides must
            // be utilized at or below the threshold.
            let underutilized = (0..m).all(|r| {
                caps[r] == 0.0
                    || coverage[r] == 0.0
                    || state.pending_demand[r] / coverage[r] <= utilization_threshold
            });
            if !underutilized {
                continue;
            }
            let keeps_coverage = (0..m).all(|r| coverage[r] - caps[r] >= state.pending_demand[r]);
            if keeps_coverage {
                state.pools[idx].current_nodes -= 1;
                events.push((idx, -1));
                removed = true;
                break;
            }
        }
        if !removed {
            return Ok(CaResult {
                satisfied: state.covered(catalog),
                allocation: allocation_from_pools(catalog, &state.pools),
                final_pools: state.pools,
                scale_events: events,
            });
        }
    }
}

/// Full baseline pipeline: seed the pools with existing nodes, scale up to
/// meet demand, then scale down surplus.
pub fn run_baseline(
    catalog: &InstanceCatalog,
    pools: &[NodePool],
    existing: Option<&Allocation>,
    demand: &[f64],
    expander: &Expander,
) -> Result<CaResult> {
    let mut pools = pools.to_vec();
    if let Some(existing) = existing {
        if existing.len() != catalog.num_instances() {
            return Err(Error::dimension("existing allocation length != n"));
        }
        // Existing nodes land in the first pool of their instance type.
        for (i, count) in existing.counts.iter().enumerate() {
            if *count <= 0.0 {
                continue;
            }
            let pool = pools.iter_mut().find(|p| p.instance == i).ok_or_else(|| {
                Error::validation(format!(
                    "existing allocation uses instance {i} with no matching pool"
                ))
            })?;
            let total = pool.current_nodes + *count as u32;
            pool.current_nodes = total.min(pool.max_nodes);
        }
    }
    let state = ClusterState::new(catalog, pools, demand.to_vec())?;
    let up = simulate_scale_up(catalog, &state, expander)?;
    let mut events = up.scale_events;
    let state = ClusterState {
        pools: up.final_pools,
        pending_demand: state.pending_demand,
    };
    let down = simulate_scale_down(catalog, &state, 1.0)?;
    events.extend(down.scale_events.iter().copied());
    Ok(CaResult {
        final_pools: down.final_pools,
        allocation: down.allocation,
        satisfied: up.satisfied && down.satisfied,
        scale_events: events,
    })
}

/// Pool fixture entry resolved against a catalog by `(provider, sku)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub instance_sku: String,
    pub provider: String,
    #[serde(default)]
    pub min_nodes: u32,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: u32,
    #[serde(default)]
    pub current_nodes: u32,
}

fn default_max_nodes() -> u32 {
    100
}

impl PoolSpec {
    pub fn resolve(&self, catalog: &InstanceCatalog) -> Result<NodePool> {
        let instance = catalog
            .instance_index(&self.provider, &self.instance_sku)
            .ok_or_else(|| {
                Error::validation(format!(
                    "pool references unknown instance ({}, {})",
                    self.provider, self.instance_sku
                ))
            })?;
        NodePool::new(instance, self.min_nodes, self.max_nodes, self.current_nodes)
    }
}

pub fn resolve_pools(catalog: &InstanceCatalog, specs: &[PoolSpec]) -> Result<Vec<NodePool>> {
    specs.iter().map(|s| s.resolve(catalog)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{InstanceType, ResourceSchema};

    fn small_catalog() -> InstanceCatalog {
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

    #[test]
    fn single_pool_scales_to_the_ceiling() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 10, 0).unwrap()],
            vec![8.0, 16.0],
        )
        .unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        // ceil(max(8/2, 16/4)) = 4 nodes.
        assert!(result.satisfied);
        assert_eq!(result.final_pools[0].current_nodes, 4);
        assert_eq!(result.scale_events.len(), 4);
        assert!(result.scale_events.iter().all(|(i, d)| *i == 0 && *d == 1));
    }

    #[test]
    fn zero_demand_means_no_events() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 10, 0).unwrap()],
            vec![0.0, 0.0],
        )
        .unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        assert!(result.satisfied);
        assert!(result.scale_events.is_empty());
    }

    #[test]
    fn headroom_exhaustion_reports_unsatisfied() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 2, 0).unwrap()],
            vec![8.0, 16.0],
        )
        .unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        assert!(!result.satisfied);
        assert_eq!(result.final_pools[0].current_nodes, 2);
    }

    #[test]
    fn empty_pool_list_is_unsatisfiable_not_an_error() {
        let catalog = small_catalog();
        let state = ClusterState::new(&catalog, vec![], vec![8.0, 16.0]).unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        assert!(!result.satisfied);
    }

    #[test]
    fn scale_down_stops_at_coverage() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 10, 5).unwrap()],
            vec![4.0, 8.0],
        )
        .unwrap();
        let result = simulate_scale_down(&catalog, &state, 1.0).unwrap();
        // 2 nodes still cover (4, 8).
        assert_eq!(result.final_pools[0].current_nodes, 2);
        assert!(result.satisfied);
    }

    #[test]
    fn scale_down_respects_min_nodes() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 3, 10, 7).unwrap()],
            vec![0.0, 0.0],
        )
        .unwrap();
        let result = simulate_scale_down(&catalog, &state, 1.0).unwrap();
        assert_eq!(result.final_pools[0].current_nodes, 3);
    }

    #[test]
    fn scale_down_to_empty_when_unconstrained() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 10, 4).unwrap()],
            vec![0.0, 0.0],
        )
        .unwrap();
        let result = simulate_scale_down(&catalog, &state, 1.0).unwrap();
        assert_eq!(result.final_pools[0].current_nodes, 0);
    }

    #[test]
    fn events_are_homogeneous_single_steps() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![
                NodePool::new(0, 0, 10, 0).unwrap(),
                NodePool::new(1, 0, 10, 0).unwrap(),
            ],
            vec![12.0, 40.0],
        )
        .unwrap();
        let result = simulate_scale_up(&catalog, &state, &Expander::LeastWaste).unwrap();
        assert!(result.satisfied);
        for (idx, delta) in &result.scale_events {
            assert!(*idx < 2);
            assert_eq!(*delta, 1);
        }
        // Confinement: allocation support is a subset of pool instances.
        for (i, c) in result.allocation.counts.iter().enumerate() {
            if *c > 0.0 {
                assert!(state.pools.iter().any(|p| p.instance == i));
            }
        }
    }

    #[test]
    fn random_expander_is_seed_deterministic() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![
                NodePool::new(0, 0, 10, 0).unwrap(),
                NodePool::new(1, 0, 10, 0).unwrap(),
            ],
            vec![12.0, 24.0],
        )
        .unwrap();
        let a = simulate_scale_up(&catalog, &state, &Expander::Random { seed: 5 }).unwrap();
        let b = simulate_scale_up(&catalog, &state, &Expander::Random { seed: 5 }).unwrap();
        assert_eq!(a.scale_events, b.scale_events);
    }

    #[test]
    fn priority_expander_follows_the_order() {
        let catalog = small_catalog();
        let state = ClusterState::new(
            &catalog,
            vec![
                NodePool::new(0, 0, 10, 0).unwrap(),
                NodePool::new(1, 0, 10, 0).unwrap(),
            ],
            vec![4.0, 16.0],
        )
        .unwrap();
        let result =
            simulate_scale_up(&catalog, &state, &Expander::Priority { order: vec![1, 0] }).unwrap();
        assert_eq!(result.scale_events[0].0, 1);
    }

    #[test]
    fn lower_threshold_makes_scale_down_conservative() {
        let catalog = small_catalog();
        // 5 nodes of A cover demand (4, 8) at utilization (0.4, 0.4).
        let state = ClusterState::new(
            &catalog,
            vec![NodePool::new(0, 0, 10, 5).unwrap()],
            vec![4.0, 8.0],
        )
        .unwrap();
        // At threshold 0.5, removal stops once utilization exceeds 0.5:
        // 3 nodes give (0.67, 0.67), so the 4th removal is blocked.
        let result = simulate_scale_down(&catalog, &state, 0.5).unwrap();
        assert_eq!(result.final_pools[0].current_nodes, 3);
        // Threshold must lie in (0, 1].
        assert!(simulate_scale_down(&catalog, &state, 0.0).is_err());
        assert!(simulate_scale_down(&catalog, &state, 1.5).is_err());
    }

    #[test]
    fn baseline_seeds_existing_nodes_then_trims() {
        let catalog = small_catalog();
        let pools = vec![NodePool::new(0, 0, 10, 0).unwrap()];
        let existing = Allocation::continuous(vec![6.0, 0.0]);
        let result = run_baseline(
            &catalog,
            &pools,
            Some(&existing),
            &[4.0, 8.0],
            &Expander::LeastWaste,
        )
        .unwrap();
        // 6 existing nodes cover (4, 8) with slack; scale-down trims to 2.
        assert!(result.satisfied);
        assert_eq!(result.final_pools[0].current_nodes, 2);
    }
}
