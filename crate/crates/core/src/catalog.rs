//! Instance-type catalog ingestion and the derived selector matrices.
//!
//! A catalog lists the instance types available for allocation together
//! with their per-resource capacities and hourly price. From a validated
//! catalog the solvers derive the resource composition matrix `K` (one
//! column per instance type, one row per resource) and the provider
//! selector matrix `E` (one row per provider, 0/1 entries, each column
//! summing to exactly 1).

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Ordered list of resource dimensions shared by every instance in a catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSchema {
    pub names: Vec<String>,
    pub units: Vec<String>,
}

impl ResourceSchema {
    pub fn new(names: Vec<String>, units: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::validation("resource schema must have m >= 1"));
        }
        if names.len() != units.len() {
            return Err(Error::validation("schema names and units differ in length"));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::validation("resource names must be nonempty"));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::validation(format!(
                    "duplicate resource name {name:?}"
                )));
            }
        }
        Ok(ResourceSchema { names, units })
    }

    /// The fixed four-dimension schema used by the CSV catalog format and
    /// the bundled fixtures.
    pub fn standard() -> Self {
        ResourceSchema {
            names: vec![
                "cpu_cores".into(),
                "memory_gb".into(),
                "network_units".into(),
                "storage_gb".into(),
            ],
            units: vec!["cores".into(), "GB".into(), "units".into(), "GB".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One purchasable instance type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub provider_id: String,
    pub sku: String,
    /// Per-resource capacities in schema order.
    pub capacities: Vec<f64>,
    pub hourly_cost: f64,
}

impl InstanceType {
    fn validate(&self, m: usize, record: usize) -> Result<()> {
        let at = format!(
            "instance record {record} ({}/{})",
            self.provider_id, self.sku
        );
        if self.capacities.len() != m {
            return Err(Error::validation(format!(
                "{at}: expected {m} capacities, found {}",
                self.capacities.len()
            )));
        }
        if self.hourly_cost < 0.0 || !self.hourly_cost.is_finite() {
            return Err(Error::validation(format!(
                "{at}: hourly_cost must be finite and >= 0, got {}",
                self.hourly_cost
            )));
        }
        if self.capacities.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::validation(format!("{at}: negative capacity")));
        }
        if self.capacities.iter().all(|c| *c == 0.0) {
            return Err(Error::validation(format!("{at}: all capacities are zero")));
        }
        Ok(())
    }
}

/// A validated set of instance types.
///
/// `providers` is derived in first-appearance order; every instance belongs
/// to exactly one provider, so each column of the selector matrix sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceCatalog {
    pub schema: ResourceSchema,
    pub instances: Vec<InstanceType>,
    pub providers: Vec<String>,
}

/// File formats understood by [`load_catalog`] and [`save_catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogFormat {
    Csv,
    Json,
}

/// On-disk JSON shape: schema entries plus the instance list. Providers are
/// re-derived on load, so a save/load pair is the identity on catalogs.
#[derive(Serialize, Deserialize)]
struct CatalogFile {
    schema: Vec<SchemaEntry>,
    instances: Vec<InstanceType>,
}

#[derive(Serialize, Deserialize)]
struct SchemaEntry {
    name: String,
    unit: String,
}

impl InstanceCatalog {
    pub fn new(schema: ResourceSchema, instances: Vec<InstanceType>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::validation("catalog must contain n >= 1 instances"));
        }
        let m = schema.len();
        let mut providers: Vec<String> = Vec::new();
        let mut seen_skus = BTreeSet::new();
        for (idx, inst) in instances.iter().enumerate() {
            inst.validate(m, idx)?;
            if !seen_skus.insert((inst.provider_id.clone(), inst.sku.clone())) {
                return Err(Error::validation(format!(
                    "duplicate (provider, sku) pair ({}, {})",
                    inst.provider_id, inst.sku
                )));
            }
            if !providers.contains(&inst.provider_id) {
                providers.push(inst.provider_id.clone());
            }
        }
        Ok(InstanceCatalog {
            schema,
            instances,
            providers,
        })
    }

    /// Number of resource dimensions `m`.
    pub fn num_resources(&self) -> usize {
        self.schema.len()
    }

    /// Number of instance types `n`.
    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    /// Number of providers `p`.
    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn provider_index(&self, provider: &str) -> Option<usize> {
        self.providers.iter().position(|p| p == provider)
    }

    /// Catalog index of `(provider, sku)`.
    pub fn instance_index(&self, provider: &str, sku: &str) -> Option<usize> {
        self.instances
            .iter()
            .position(|i| i.provider_id == provider && i.sku == sku)
    }

    /// Hourly cost vector `c` in instance order.
    pub fn cost_vector(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.hourly_cost).collect()
    }

    /// Restricts the catalog to the given instance indices (ascending),
    /// returning the sub-catalog and the map from sub index to full index.
    pub fn subset(&self, indices: &[usize]) -> Result<(InstanceCatalog, Vec<usize>)> {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let instances: Vec<InstanceType> = sorted
            .iter()
            .map(|&i| {
                self.instances
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::validation(format!("instance index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        let sub = InstanceCatalog::new(self.schema.clone(), instances)?;
        Ok((sub, sorted))
    }
}

/// Materializes the `m x n` resource composition matrix `K`.
///
/// `K[r][i]` is the amount of resource `r` provided by one unit of instance
/// type `i`; column order matches catalog instance order.
pub fn composition_matrix(catalog: &InstanceCatalog) -> Matrix {
    let m = catalog.num_resources();
    let n = catalog.num_instances();
    let mut k = Matrix::zeros(m, n);
    for (i, inst) in catalog.instances.iter().enumerate() {
        for (r, cap) in inst.capacities.iter().enumerate() {
            k.set(r, i, *cap);
        }
    }
    k
}

/// Materializes the `p x n` provider selector matrix `E`.
///
/// `E[j][i] = 1` iff instance `i` belongs to provider `j`; every column
/// sums to exactly 1.
pub fn selector_matrix(catalog: &InstanceCatalog) -> Matrix {
    let p = catalog.num_providers();
    let n = catalog.num_instances();
    let mut e = Matrix::zeros(p, n);
    for (i, inst) in catalog.instances.iter().enumerate() {
        let j = catalog
            .provider_index(&inst.provider_id)
            .expect("validated catalog");
        e.set(j, i, 1.0);
    }
    e
}

/// The synthetic catalog bundled with the repository fixtures (two
/// providers, 26 instance types over the standard schema).
pub fn bundled_catalog() -> InstanceCatalog {
    parse_catalog_json(include_str!("../../../fixtures/catalog.json"))
        .expect("bundled catalog parses and validates")
}

const CSV_HEADER: [&str; 7] = [
    "provider",
    "sku",
    "cpu_cores",
    "memory_gb",
    "network_units",
    "storage_gb",
    "hourly_usd",
];

/// Loads and validates a catalog from `path`.
///
/// The CSV format is fixed to the standard four-resource schema; the JSON
/// format supports arbitrary schemas. Instance order is file order and
/// provider order is first-appearance order.
pub fn load_catalog(path: impl AsRef<Path>, format: CatalogFormat) -> Result<InstanceCatalog> {
    let text = std::fs::read_to_string(path.as_ref())?;
    match format {
        CatalogFormat::Csv => parse_catalog_csv(&text),
        CatalogFormat::Json => parse_catalog_json(&text),
    }
}

pub fn parse_catalog_json(text: &str) -> Result<InstanceCatalog> {
    let file: CatalogFile = serde_json::from_str(text)?;
    let (names, units) = file.schema.into_iter().map(|e| (e.name, e.unit)).unzip();
    let schema = ResourceSchema::new(names, units)?;
    InstanceCatalog::new(schema, file.instances)
}

pub fn parse_catalog_csv(text: &str) -> Result<InstanceCatalog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::Parse {
                location: "header".into(),
                message: format!("expected columns {CSV_HEADER:?}, found {got:?}"),
            });
        }
    }
    let mut instances = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                location: format!("line {line}"),
                message: format!(
                    "expected {} fields, found {}",
                    CSV_HEADER.len(),
                    record.len()
                ),
            });
        }
        let field = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse {
                location: format!("line {line}, column {}", CSV_HEADER[i]),
                message: e.to_string(),
            })
        };
        instances.push(InstanceType {
            provider_id: record[0].to_string(),
            sku: record[1].to_string(),
            capacities: vec![field(2)?, field(3)?, field(4)?, field(5)?],
            hourly_cost: field(6)?,
        });
    }
    InstanceCatalog::new(ResourceSchema::standard(), instances)
}

/// Serializes a catalog to `path`. CSV requires the standard schema.
pub fn save_catalog(
    catalog: &InstanceCatalog,
    path: impl AsRef<Path>,
    format: CatalogFormat,
) -> Result<()> {
    let text = catalog_to_string(catalog, format)?;
    std::fs::write(path.as_ref(), text)?;
    Ok(())
}

pub fn catalog_to_string(catalog: &InstanceCatalog, format: CatalogFormat) -> Result<String> {
    match format {
        CatalogFormat::Json => {
            let file = CatalogFile {
                schema: catalog
                    .schema
                    .names
                    .iter()
                    .zip(&catalog.schema.units)
                    .map(|(name, unit)| SchemaEntry {
                        name: name.clone(),
                        unit: unit.clone(),
                    })
                    .collect(),
                instances: catalog.instances.clone(),
            };
            Ok(serde_json::to_string_pretty(&file)? + "\n")
        }
        CatalogFormat::Csv => {
            if catalog.schema != ResourceSchema::standard() {
                return Err(Error::validation(
                    "CSV catalogs require the standard cpu/memory/network/storage schema",
                ));
            }
            let mut out = CSV_HEADER.join(",") + "\n";
            for inst in &catalog.instances {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    inst.provider_id,
                    inst.sku,
                    inst.capacities[0],
                    inst.capacities[1],
                    inst.capacities[2],
                    inst.capacities[3],
                    inst.hourly_cost
                ));
            }
            Ok(out)
        }
    }
}

/// Capacity ranges and price model for [`synth_catalog`].
#[derive(Debug, Clone)]
pub struct SynthRanges {
    /// Per-resource (min, max) capacity, in schema order.
    pub capacity_ranges: Vec<(f64, f64)>,
    pub price_base: f64,
    /// Per-resource price weight, in schema order.
    pub price_weights: Vec<f64>,
    /// Half-width of the multiplicative seeded price noise.
    pub price_noise: f64,
}

impl SynthRanges {
    /// Defaults tuned so standard-schema catalogs price out like real
    /// general-purpose fleets.
    pub fn default_for(schema: &ResourceSchema) -> Self {
        let ranges = schema
            .names
            .iter()
            .map(|name| match name.as_str() {
                "cpu_cores" => (1.0, 16.0),
                "memory_gb" => (2.0, 128.0),
                "network_units" => (0.5, 8.0),
                "storage_gb" => (20.0, 1200.0),
                _ => (1.0, 32.0),
            })
            .collect();
        let weights = schema
            .names
            .iter()
            .map(|name| match name.as_str() {
                "cpu_cores" => 0.045,
                "memory_gb" => 0.006,
                "network_units" => 0.002,
                "storage_gb" => 0.0004,
                _ => 0.01,
            })
            .collect();
        SynthRanges {
            capacity_ranges: ranges,
            price_base: 0.01,
            price_weights: weights,
            price_noise: 0.05,
        }
    }
}

/// Deterministically generates a synthetic catalog: `n` instances spread
/// round-robin over `p` providers, capacities sampled within the given
/// ranges, and prices positively correlated with total capacity.
///
/// When the schema carries both `cpu_cores` and `network_units`, network
/// capacity is pinned to half the core count instead of being sampled, so
/// the bundled scenario demands stay coverable.
pub fn synth_catalog(
    seed: u64,
    n: usize,
    p: usize,
    schema: &ResourceSchema,
    ranges: &SynthRanges,
) -> Result<InstanceCatalog> {
    if n < p || p == 0 {
        return Err(Error::validation("synth_catalog requires n >= p >= 1"));
    }
    if ranges.capacity_ranges.len() != schema.len() || ranges.price_weights.len() != schema.len() {
        return Err(Error::dimension("ranges must match schema length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cpu_idx = schema.index_of("cpu_cores");
    let net_idx = schema.index_of("network_units");

    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let provider = format!("prov{}", i % p);
        let mut capacities = vec![0.0; schema.len()];
        for (r, &(lo, hi)) in ranges.capacity_ranges.iter().enumerate() {
            capacities[r] = round2(rng.random_range(lo..=hi));
        }
        if let (Some(ci), Some(ni)) = (cpu_idx, net_idx) {
            capacities[ci] = capacities[ci].round().max(1.0);
            capacities[ni] = capacities[ci] / 2.0;
        }
        let mut price = ranges.price_base;
        for (cap, w) in capacities.iter().zip(&ranges.price_weights) {
            price += cap * w;
        }
        price *= 1.0 + ranges.price_noise * rng.random_range(-1.0..=1.0);
        instances.push(InstanceType {
            provider_id: provider,
            sku: format!("sku{i:03}"),
            capacities,
            hourly_cost: round4(price.max(0.001)),
        });
    }
    InstanceCatalog::new(schema.clone(), instances)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn round4(v: f64) -> f64 {
    (v * 10000.0).round() / 10000.0
}
