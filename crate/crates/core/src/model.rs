//! The allocation problem: objective evaluation, gradient, and constraint
//! residuals.
//!
//! The objective combines four stored terms (the provider-consolidation
//! expression folds its constant in, so the value at the origin is exactly
//! the shortage penalty):
//!
//! ```text
//! f(x) = c^T x
//!      + alpha * sum_j (1 - exp(-beta1 * (Ex)_j))      consolidation
//!      - gamma * sum_j ln(1 + beta2 * (Ex)_j)          volume discount
//!      + beta3 * sum_r max(0, d_r - (Kx)_r)^2          shortage penalty
//! ```
//!
//! subject to `d - mu <= Kx <= d + g`, `x >= 0`, and optionally the
//! incremental-adoption trust region `||x - x_current||_1 <= delta_max`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{self, CatalogFormat, InstanceCatalog};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Weights of the non-cost objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    /// Provider-consolidation weight; each active provider costs up to `alpha`.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Consolidation sharpness (> 0).
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    /// Volume-discount curvature (> 0).
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    /// Shortage weight.
    #[serde(default = "defaults::beta3")]
    pub beta3: f64,
    /// Volume-discount weight.
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
}

mod defaults {
    pub fn alpha() -> f64 {
        0.05
    }
    pub fn beta1() -> f64 {
        1.0
    }
    pub fn beta2() -> f64 {
        0.1
    }
    pub fn beta3() -> f64 {
        10.0
    }
    pub fn gamma() -> f64 {
        0.01
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            alpha: defaults::alpha(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            beta3: defaults::beta3(),
            gamma: defaults::gamma(),
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0) || !(self.beta2 > 0.0) {
            return Err(Error::validation("beta1 and beta2 must be positive"));
        }
        if self.alpha < 0.0 || self.beta3 < 0.0 || self.gamma < 0.0 {
            return Err(Error::validation("alpha, beta3, gamma must be nonnegative"));
        }
        Ok(())
    }

    /// A pure linear-cost configuration, handy for oracle comparisons.
    pub fn linear_only() -> Self {
        PenaltyParams {
            alpha: 0.0,
            beta1: 1.0,
            beta2: 0.1,
            beta3: 0.0,
            gamma: 0.0,
        }
    }
}

/// An instance-count vector, continuous or integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub counts: Vec<f64>,
    pub integral: bool,
}

impl Allocation {
    pub fn continuous(counts: Vec<f64>) -> Self {
        Allocation {
            counts,
            integral: false,
        }
    }

    pub fn integral(counts: Vec<f64>) -> Result<Self> {
        for (i, v) in counts.iter().enumerate() {
            if *v < 0.0 || v.fract() != 0.0 {
                return Err(Error::validation(format!(
                    "count {i} = {v} is not a nonnegative whole number"
                )));
            }
        }
        Ok(Allocation {
            counts,
            integral: true,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Allocation {
            counts: vec![0.0; n],
            integral: true,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-term objective value; `total` is the sum of the four stored terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub base_cost: f64,
    pub consolidation_penalty: f64,
    /// Signed contribution `-gamma * sum_j ln(1 + beta2 (Ex)_j)`, always <= 0.
    pub volume_discount: f64,
    pub shortage_penalty: f64,
    pub total: f64,
}

/// The full problem instance handed to the solvers.
///
/// Immutable after construction; cheap to share between threads.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    catalog: InstanceCatalog,
    k: Matrix,
    e: Matrix,
    cost: Vec<f64>,
    demand: Vec<f64>,
    uncertainty: Vec<f64>,
    waste: Vec<f64>,
    params: PenaltyParams,
    current: Option<Allocation>,
    max_deviation: Option<f64>,
    upper_bounds: Vec<f64>,
    upper_bounds_explicit: bool,
}

/// Global cap guarding degenerate catalogs in the derived per-type bounds.
pub const UPPER_BOUND_CAP: f64 = 512.0;

impl AllocationProblem {
    /// Builds a problem with defaults: `mu = 0`, `g = 0.25 * d`, default
    /// penalty parameters, and derived per-type upper bounds.
    pub fn new(catalog: InstanceCatalog, demand: Vec<f64>) -> Result<Self> {
        let m = catalog.num_resources();
        if demand.len() != m {
            return Err(Error::dimension(format!(
                "demand has {} entries, schema has {m}",
                demand.len()
            )));
        }
        if demand.iter().any(|d| *d < 0.0 || !d.is_finite()) {
            return Err(Error::validation("demand must be nonnegative and finite"));
        }
        let waste: Vec<f64> = demand.iter().map(|d| 0.25 * d).collect();
        let k = catalog::composition_matrix(&catalog);
        let e = catalog::selector_matrix(&catalog);
        let cost = catalog.cost_vector();
        let mut problem = AllocationProblem {
            catalog,
            k,
            e,
            cost,
            uncertainty: vec![0.0; m],
            waste,
            demand,
            params: PenaltyParams::default(),
            current: None,
            max_deviation: None,
            upper_bounds: Vec::new(),
            upper_bounds_explicit: false,
        };
        problem.upper_bounds = problem.derive_upper_bounds();
        Ok(problem)
    }

    pub fn with_params(mut self, params: PenaltyParams) -> Result<Self> {
        params.validate()?;
        self.params = params;
        Ok(self)
    }

    pub fn with_uncertainty(mut self, mu: Vec<f64>) -> Result<Self> {
        self.check_resource_vec(&mu, "uncertainty")?;
        self.uncertainty = mu;
        Ok(self)
    }

    pub fn with_waste(mut self, g: Vec<f64>) -> Result<Self> {
        self.check_resource_vec(&g, "waste")?;
        self.waste = g;
        if !self.upper_bounds_explicit {
            self.upper_bounds = self.derive_upper_bounds();
        }
        Ok(self)
    }

    /// Installs the current allocation and (optionally) the l1 deviation
    /// bound for incremental adoption.
    pub fn with_current(mut self, current: Allocation, max_deviation: Option<f64>) -> Result<Self> {
        if current.len() != self.n() {
            return Err(Error::dimension("current allocation length != n"));
        }
        if let Some(d) = max_deviation {
            if d < 0.0 || !d.is_finite() {
                return Err(Error::validation("max_deviation must be >= 0"));
            }
        }
        self.current = Some(current);
        self.max_deviation = max_deviation;
        Ok(self)
    }

    pub fn with_upper_bounds(mut self, ub: Vec<f64>) -> Result<Self> {
        if ub.len() != self.n() {
            return Err(Error::dimension("upper_bounds length != n"));
        }
        if ub.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::validation("upper bounds must be finite and >= 0"));
        }
        self.upper_bounds = ub;
        self.upper_bounds_explicit = true;
        Ok(self)
    }

    fn check_resource_vec(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.m() {
            return Err(Error::dimension(format!("{what} length != m")));
        }
        if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::validation(format!("{what} must be nonnegative")));
        }
        Ok(())
    }

    /// Per-type box that provably contains every allocation satisfying
    /// `Kx <= d + g`, capped at [`UPPER_BOUND_CAP`].
    fn derive_upper_bounds(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let mut best = 0.0f64;
                let mut any = false;
                for r in 0..self.m() {
                    let cap = self.k.get(r, i);
                    if cap > 0.0 {
                        any = true;
                        best = best.max((self.demand[r] + self.waste[r]) / cap);
                    }
                }
                if any {
                    best.ceil().min(UPPER_BOUND_CAP)
                } else {
                    // No positive capacity row; the instance is useless.
                    0.0
                }
            })
            .collect()
    }

    pub fn catalog(&self) -> &InstanceCatalog {
        &self.catalog
    }

    /// Resource composition matrix `K` (m x n).
    pub fn k(&self) -> &Matrix {
        &self.k
    }

    /// Provider selector matrix `E` (p x n).
    pub fn e(&self) -> &Matrix {
        &self.e
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn uncertainty(&self) -> &[f64] {
        &self.uncertainty
    }

    pub fn waste(&self) -> &[f64] {
        &self.waste
    }

    pub fn params(&self) -> &PenaltyParams {
        &self.params
    }

    pub fn current(&self) -> Option<&Allocation> {
        self.current.as_ref()
    }

    pub fn max_deviation(&self) -> Option<f64> {
        self.max_deviation
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    pub fn n(&self) -> usize {
        self.catalog.num_instances()
    }

    pub fn m(&self) -> usize {
        self.catalog.num_resources()
    }

    pub fn p(&self) -> usize {
        self.catalog.num_providers()
    }

    fn check_x(&self, x: &Allocation) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::dimension(format!(
                "allocation has {} entries, catalog has {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// Evaluates the objective with its per-term breakdown.
pub fn objective(problem: &AllocationProblem, x: &Allocation) -> Result<ObjectiveBreakdown> {
    problem.check_x(x)?;
    let p = problem.params();
    let z = problem.e().mul_vec(&x.counts);
    let kx = problem.k().mul_vec(&x.counts);

    let base_cost = dot(problem.cost(), &x.counts);
    let mut consolidation = 0.0;
    let mut discount = 0.0;
    for zj in &z {
        consolidation += p.alpha * (1.0 - (-p.beta1 * zj).exp());
        discount += -(p.gamma * (1.0 + p.beta2 * zj).ln());
    }
    let mut shortage = 0.0;
    for (d, v) in problem.demand().iter().zip(&kx) {
        let gap = d - v;
        if gap > 0.0 {
            shortage += gap * gap;
        }
    }
    shortage *= p.beta3;

    Ok(ObjectiveBreakdown {
        base_cost,
        consolidation_penalty: consolidation,
        volume_discount: discount,
        shortage_penalty: shortage,
        total: base_cost + consolidation + discount + shortage,
    })
}

/// Gradient of the objective at `x`:
///
/// ```text
/// c + alpha beta1 E^T exp(-beta1 Ex)
///   - gamma beta2 E^T (1 / (1 + beta2 Ex))
///   - 2 beta3 K^T diag(s) (d - Kx)
/// ```
///
/// The shortage term is only C1; at ties `d_r = (Kx)_r` the indicator `s`
/// uses the strict inequality, i.e. the one-sided derivative from the
/// feasible side.
pub fn gradient(problem: &AllocationProblem, x: &Allocation) -> Result<Vec<f64>> {
    problem.check_x(x)?;
    let p = problem.params();
    let z = problem.e().mul_vec(&x.counts);
    let kx = problem.k().mul_vec(&x.counts);

    let mut g: Vec<f64> = problem.cost().to_vec();

    let consol_w: Vec<f64> = z
        .iter()
        .map(|zj| p.alpha * p.beta1 * (-p.beta1 * zj).exp())
        .collect();
    for (gi, v) in g.iter_mut().zip(problem.e().tr_mul_vec(&consol_w)) {
        *gi += v;
    }

    let disc_w: Vec<f64> = z
        .iter()
        .map(|zj| p.gamma * p.beta2 / (1.0 + p.beta2 * zj))
        .collect();
    for (gi, v) in g.iter_mut().zip(problem.e().tr_mul_vec(&disc_w)) {
        *gi -= v;
    }

    let short_w: Vec<f64> = problem
        .demand()
        .iter()
        .zip(&kx)
        .map(|(d, v)| if *d > *v { d - v } else { 0.0 })
        .collect();
    for (gi, v) in g.iter_mut().zip(problem.k().tr_mul_vec(&short_w)) {
        *gi -= 2.0 * p.beta3 * v;
    }

    Ok(g)
}

/// Index of a demanded resource (after uncertainty slack) that no
/// catalog instance provides at all.
pub fn uncoverable_resource(problem: &AllocationProblem) -> Option<usize> {
    (0..problem.m()).find(|&r| {
        problem.demand()[r] - problem.uncertainty()[r] > 0.0
            && (0..problem.n()).all(|i| problem.k().get(r, i) == 0.0)
    })
}

/// Shortage indicator `s_r = 1` iff `d_r > (Kx)_r`; ties yield 0.
pub fn shortage_indicator(problem: &AllocationProblem, x: &Allocation) -> Result<Vec<u8>> {
    problem.check_x(x)?;
    let kx = problem.k().mul_vec(&x.counts);
    Ok(problem
        .demand()
        .iter()
        .zip(&kx)
        .map(|(d, v)| u8::from(*d > *v))
        .collect())
}

/// Signed feasibility slacks; every component must be >= 0 at a feasible
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// `Kx - (d - mu)` per resource.
    pub lower: Vec<f64>,
    /// `(d + g) - Kx` per resource.
    pub upper: Vec<f64>,
    /// `delta_max - ||x - x_current||_1` when the deviation bound is set.
    pub deviation: Option<f64>,
}

impl ConstraintResiduals {
    pub fn feasible(&self, tol: f64) -> bool {
        self.lower.iter().all(|v| *v >= -tol)
            && self.upper.iter().all(|v| *v >= -tol)
            && self.deviation.is_none_or(|v| v >= -tol)
    }
}

pub fn constraint_residuals(
    problem: &AllocationProblem,
    x: &Allocation,
) -> Result<ConstraintResiduals> {
    problem.check_x(x)?;
    let kx = problem.k().mul_vec(&x.counts);
    let lower = kx
        .iter()
        .zip(problem.demand())
        .zip(problem.uncertainty())
        .map(|((v, d), mu)| v - (d - mu))
        .collect();
    let upper = kx
        .iter()
        .zip(problem.demand())
        .zip(problem.waste())
        .map(|((v, d), g)| (d + g) - v)
        .collect();
    let deviation = match (problem.current(), problem.max_deviation()) {
        (Some(cur), Some(dmax)) => {
            let l1: f64 = x
                .counts
                .iter()
                .zip(&cur.counts)
                .map(|(a, b)| (a - b).abs())
                .sum();
            Some(dmax - l1)
        }
        _ => None,
    };
    Ok(ConstraintResiduals {
        lower,
        upper,
        deviation,
    })
}

/// Problem fixture: demand and parameters plus a catalog reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub demand: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waste: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PenaltyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_counts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    pub catalog: CatalogRef,
}

/// Catalog reference inside a problem fixture: a path (resolved relative
/// to the fixture file) or an inline catalog object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CatalogRef {
    Path(String),
    Inline(serde_json::Value),
}

/// Loads a problem fixture, resolving its catalog reference.
pub fn load_problem(path: impl AsRef<Path>) -> Result<(InstanceCatalog, AllocationProblem)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let spec: ProblemSpec = serde_json::from_str(&text)?;
    let catalog = match &spec.catalog {
        CatalogRef::Path(rel) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let cat_path = base.join(rel);
            let format = if cat_path.extension().and_then(|e| e.to_str()) == Some("csv") {
                CatalogFormat::Csv
            } else {
                CatalogFormat::Json
            };
            catalog::load_catalog(&cat_path, format)?
        }
        CatalogRef::Inline(value) => catalog::parse_catalog_json(&value.to_string())?,
    };
    let problem = spec.into_problem(catalog.clone())?;
    Ok((catalog, problem))
}

impl ProblemSpec {
    pub fn into_problem(self, catalog: InstanceCatalog) -> Result<AllocationProblem> {
        let mut problem = AllocationProblem::new(catalog, self.demand)?;
        if let Some(mu) = self.uncertainty {
            problem = problem.with_uncertainty(mu)?;
        }
        if let Some(g) = self.waste {
            problem = problem.with_waste(g)?;
        }
        if let Some(params) = self.params {
            problem = problem.with_params(params)?;
        }
        if let Some(counts) = self.current_counts {
            let current = Allocation::continuous(counts);
            problem = problem.with_current(current, self.max_deviation)?;
        } else if self.max_deviation.is_some() {
            return Err(Error::validation(
                "max_deviation requires current_counts to be set",
            ));
        }
        Ok(problem)
    }
}
