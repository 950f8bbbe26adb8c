//! fleetmix command-line interface.
//!
//! Subcommands cover the whole toolchain: solving allocation problems,
//! simulating the cluster-autoscaler baseline, running the bundled
//! comparison scenarios, sweeping penalty parameters, filtering Pareto
//! frontiers, checking KKT residuals, and generating synthetic catalogs.
//!
//! Exit codes are part of the interface: 0 success, 1 error, 2 infeasible
//! problem, 3 partial scenario failure. Errors are mirrored as a JSON
//! object on stderr for machine consumption. Output files are written
//! atomically (temp file + rename), and everything outside the report
//! `metadata` field is byte-deterministic for a fixed seed.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fleetmix_core::autoscaler::{self, Expander, PoolSpec};
use fleetmix_core::catalog::{
    bundled_catalog, load_catalog, save_catalog, CatalogFormat, InstanceCatalog, ResourceSchema,
    SynthRanges,
};
use fleetmix_core::error::Error as CoreError;
use fleetmix_core::metrics;
use fleetmix_core::model::{self, AllocationProblem, PenaltyParams};
use fleetmix_core::report::{build_solve_report, Envelope, ErrorObject, RelaxationSummary};
use fleetmix_core::scenarios::{
    self, builtin_scenarios, MetricKey, ParamGrid, PipelineConfig, Scenario, SweepRow,
};
use fleetmix_core::solver::continuous::{self, BarrierSettings};
use fleetmix_core::solver::integer::{self, SearchBudget};

#[derive(Parser)]
#[command(
    name = "fleetmix",
    version,
    about = "Heterogeneous cloud instance-mix optimization vs. cluster-autoscaler baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem fixture to an integer allocation and emit a report.
    Solve(SolveArgs),
    /// Run the cluster-autoscaler baseline over a pool fixture.
    SimulateCa(SimulateCaArgs),
    /// Run one scenario comparison (baseline vs optimizer).
    Compare(CompareArgs),
    /// Run all five bundled scenarios; write reports and the summary CSV.
    Scenarios(ScenariosArgs),
    /// Grid-sweep the penalty parameters over a scenario.
    Sweep(SweepArgs),
    /// Filter a sweep table down to its Pareto frontier.
    Pareto(ParetoArgs),
    /// Solve the continuous relaxation and report its KKT residuals.
    KktCheck(KktCheckArgs),
    /// Generate a deterministic synthetic catalog.
    SynthCatalog(SynthCatalogArgs),
}

#[derive(Args, Clone)]
struct ParamOverrides {
    /// Provider-consolidation weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Consolidation sharpness.
    #[arg(long)]
    beta1: Option<f64>,
    /// Volume-discount curvature.
    #[arg(long)]
    beta2: Option<f64>,
    /// Shortage weight.
    #[arg(long)]
    beta3: Option<f64>,
    /// Volume-discount weight.
    #[arg(long)]
    gamma: Option<f64>,
}

impl ParamOverrides {
    fn none() -> Self {
        ParamOverrides {
            alpha: None,
            beta1: None,
            beta2: None,
            beta3: None,
            gamma: None,
        }
    }

    fn apply(&self, mut params: PenaltyParams) -> Result<PenaltyParams, CoreError> {
        if let Some(v) = self.alpha {
            params.alpha = v;
        }
        if let Some(v) = self.beta1 {
            params.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            params.beta2 = v;
        }
        if let Some(v) = self.beta3 {
            params.beta3 = v;
        }
        if let Some(v) = self.gamma {
            params.gamma = v;
        }
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args, Clone)]
struct SolverKnobs {
    /// Multi-start count for the continuous relaxation.
    #[arg(long, default_value_t = 4)]
    starts: usize,
    /// Branch-and-bound node budget.
    #[arg(long, default_value_t = 100_000)]
    node_budget: u64,
    /// Wall-clock limit for branch-and-bound (0 disables it).
    #[arg(long, default_value_t = 10)]
    time_budget_secs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpanderArg {
    LeastWaste,
    Random,
    Priority,
}

impl ExpanderArg {
    fn build(self, seed: u64, pool_count: usize) -> Expander {
        match self {
            ExpanderArg::LeastWaste => Expander::LeastWaste,
            ExpanderArg::Random => Expander::Random { seed },
            ExpanderArg::Priority => Expander::Priority {
                order: (0..pool_count).collect(),
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem fixture (JSON with demand, params, and a catalog reference).
    #[arg(long)]
    problem: PathBuf,
    /// Catalog override; replaces the fixture's catalog reference.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the per-iteration objective trace in the report.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    params: ParamOverrides,
    #[command(flatten)]
    solver: SolverKnobs,
}

#[derive(Args)]
struct SimulateCaArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Pool fixture: JSON array of {instance_sku, provider, min_nodes,
    /// max_nodes, current_nodes}.
    #[arg(long)]
    pools: PathBuf,
    /// Demand vector, comma separated (e.g. "8,16,4,100").
    #[arg(long, conflicts_with = "problem")]
    demand: Option<String>,
    /// Problem fixture supplying the demand vector.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpanderArg::LeastWaste)]
    expander: ExpanderArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario fixture (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpanderArg::LeastWaste)]
    expander: ExpanderArg,
    #[command(flatten)]
    params: ParamOverrides,
    #[command(flatten)]
    solver: SolverKnobs,
}

#[derive(Args)]
struct ScenariosArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Output directory for the per-scenario reports and CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ExpanderArg::LeastWaste)]
    expander: ExpanderArg,
    #[command(flatten)]
    params: ParamOverrides,
    #[command(flatten)]
    solver: SolverKnobs,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario fixture; the first bundled scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Grid spec: JSON with alpha/beta1/beta2/beta3/gamma value arrays.
    #[arg(long)]
    grid: PathBuf,
    /// Sweep table destination (CSV).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverKnobs,
}

#[derive(Args)]
struct ParetoArgs {
    /// Sweep table produced by `fleetmix sweep`.
    #[arg(long)]
    table: PathBuf,
    /// Objective pair to minimize, e.g. "cost,fragmentation".
    #[arg(long, default_value = "cost,fragmentation")]
    objectives: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KktCheckArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: ParamOverrides,
    #[command(flatten)]
    solver: SolverKnobs,
}

#[derive(Args)]
struct SynthCatalogArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of instance types.
    #[arg(long, default_value_t = 24)]
    n: usize,
    /// Number of providers.
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let obj = ErrorObject::from_error(&err);
            eprintln!(
                "{}",
                serde_json::to_string(&obj).unwrap_or_else(|_| err.to_string())
            );
            if err.is_infeasible() {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, CoreError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::SimulateCa(args) => cmd_simulate_ca(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scenarios(args) => cmd_scenarios(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::KktCheck(args) => cmd_kkt_check(args),
        Command::SynthCatalog(args) => cmd_synth_catalog(args),
    }
}

fn load_catalog_arg(path: &Option<PathBuf>) -> Result<InstanceCatalog, CoreError> {
    match path {
        None => Ok(bundled_catalog()),
        Some(p) => {
            let format = if p.extension().and_then(|e| e.to_str()) == Some("csv") {
                CatalogFormat::Csv
            } else {
                CatalogFormat::Json
            };
            load_catalog(p, format)
        }
    }
}

/// Loads a problem fixture, optionally overriding its catalog reference.
fn load_problem_arg(
    problem: &Path,
    catalog: &Option<PathBuf>,
    params: &ParamOverrides,
) -> Result<AllocationProblem, CoreError> {
    let mut loaded = match catalog {
        None => model::load_problem(problem)?.1,
        Some(path) => {
            let text = std::fs::read_to_string(problem)?;
            let spec: model::ProblemSpec = serde_json::from_str(&text)?;
            spec.into_problem(load_catalog_arg(&Some(path.clone()))?)?
        }
    };
    let merged = params.apply(*loaded.params())?;
    loaded = loaded.with_params(merged)?;
    Ok(loaded)
}

fn write_atomic(path: &Path, content: &str) -> Result<(), CoreError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_file_name(format!(
        "{}.tmp-{}",
        path.file_name().and_then(|f| f.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CoreError> {
    match out {
        Some(path) => write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn budget(solver: &SolverKnobs) -> SearchBudget {
    SearchBudget {
        max_nodes: solver.node_budget,
        time_limit: (solver.time_budget_secs > 0)
            .then(|| Duration::from_secs(solver.time_budget_secs)),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<i32, CoreError> {
    let started = Instant::now();
    let problem = load_problem_arg(&args.problem, &args.catalog, &args.params)?;
    let settings = BarrierSettings::default();
    let relaxed =
        continuous::multi_start(&problem, &settings, args.solver.starts, args.solver.seed)?;
    let int = integer::solve_integer(&problem, &settings, &budget(&args.solver))?;
    let report = build_solve_report(&problem, &relaxed, &int, args.trace)?;
    let envelope = Envelope::new(report, started.elapsed().as_millis() as u64);
    emit(&args.out, &envelope.to_json()?)?;
    Ok(0)
}

#[derive(Serialize)]
struct CaRunReport {
    satisfied: bool,
    allocation: Vec<f64>,
    scale_events: Vec<(usize, i32)>,
    final_pools: Vec<autoscaler::NodePool>,
    metrics: metrics::EvaluationMetrics,
}

fn parse_demand(text: &str) -> Result<Vec<f64>, CoreError> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|e| CoreError::Parse {
                location: format!("demand component {part:?}"),
                message: e.to_string(),
            })
        })
        .collect()
}

fn cmd_simulate_ca(args: SimulateCaArgs) -> Result<i32, CoreError> {
    let started = Instant::now();
    let catalog = load_catalog_arg(&args.catalog)?;
    let text = std::fs::read_to_string(&args.pools)?;
    let specs: Vec<PoolSpec> = serde_json::from_str(&text)?;
    let pools = autoscaler::resolve_pools(&catalog, &specs)?;
    let demand = match (&args.demand, &args.problem) {
        (Some(text), _) => parse_demand(text)?,
        (None, Some(path)) => model::load_problem(path)?.1.demand().to_vec(),
        (None, None) => {
            return Err(CoreError::validation(
                "simulate-ca requires --demand or --problem",
            ))
        }
    };
    let expander = args.expander.build(args.seed, pools.len());
    let result = autoscaler::run_baseline(&catalog, &pools, None, &demand, &expander)?;
    let problem = AllocationProblem::new(catalog, demand)?;
    let eval = metrics::evaluate(&problem, &result.allocation)?;
    let report = CaRunReport {
        satisfied: result.satisfied,
        allocation: result.allocation.counts.clone(),
        scale_events: result.scale_events.clone(),
        final_pools: result.final_pools.clone(),
        metrics: eval,
    };
    let envelope = Envelope::new(report, started.elapsed().as_millis() as u64);
    emit(&args.out, &envelope.to_json()?)?;
    Ok(0)
}

fn pipeline_config(
    params: &ParamOverrides,
    solver: &SolverKnobs,
    expander: ExpanderArg,
    pool_count: usize,
) -> Result<PipelineConfig, CoreError> {
    Ok(PipelineConfig {
        params: params.apply(PenaltyParams::default())?,
        settings: BarrierSettings::default(),
        starts: solver.starts,
        node_budget: solver.node_budget,
        expander: expander.build(solver.seed, pool_count),
        seed: solver.seed,
    })
}

fn cmd_compare(args: CompareArgs) -> Result<i32, CoreError> {
    let started = Instant::now();
    let catalog = load_catalog_arg(&args.catalog)?;
    let scenario = Scenario::load(&args.scenario)?;
    let config = pipeline_config(
        &args.params,
        &args.solver,
        args.expander,
        scenario.pools.len(),
    )?;
    let report = scenarios::run_comparison(&scenario, &catalog, &config)?;
    let envelope = Envelope::new(report, started.elapsed().as_millis() as u64);
    emit(&args.out, &envelope.to_json()?)?;
    Ok(0)
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_scenarios(args: ScenariosArgs) -> Result<i32, CoreError> {
    let catalog = load_catalog_arg(&args.catalog)?;
    let all = builtin_scenarios(&catalog)?;
    let mut summary = String::from(
        "scenario,strategy,cost,mean_utilization,diversity,fragmentation,mean_overprovision_pct\n",
    );
    let mut radar =
        String::from("scenario,strategy,resource,demand_norm,provided_norm,utilization\n");
    let mut failures = 0usize;
    for scenario in &all {
        let started = Instant::now();
        let config = pipeline_config(
            &args.params,
            &args.solver,
            args.expander,
            scenario.pools.len(),
        )?;
        match scenarios::run_comparison(scenario, &catalog, &config) {
            Ok(report) => {
                for (strategy, m, series) in [
                    (
                        "cluster_autoscaler",
                        &report.baseline.metrics,
                        &report.baseline.radar,
                    ),
                    (
                        "optimizer",
                        &report.optimized.metrics,
                        &report.optimized.radar,
                    ),
                ] {
                    summary.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        report.scenario,
                        strategy,
                        m.total_cost,
                        m.mean_utilization,
                        m.instance_diversity,
                        m.provider_fragmentation,
                        m.mean_overprovision_pct,
                    ));
                    for point in &series.points {
                        radar.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            report.scenario,
                            strategy,
                            point.resource,
                            point.demand_norm,
                            point.provided_norm,
                            csv_opt(point.utilization),
                        ));
                    }
                }
                let envelope = Envelope::new(report, started.elapsed().as_millis() as u64);
                let path = args.out.join(format!("{}.json", scenario.name));
                write_atomic(&path, &envelope.to_json()?)?;
            }
            Err(err) => {
                failures += 1;
                let obj = ErrorObject::from_error(&err);
                let path = args.out.join(format!("{}.error.json", scenario.name));
                write_atomic(&path, &(serde_json::to_string_pretty(&obj)? + "\n"))?;
                eprintln!("{}", serde_json::to_string(&obj)?);
            }
        }
    }
    write_atomic(&args.out.join("summary.csv"), &summary)?;
    write_atomic(&args.out.join("radar.csv"), &radar)?;
    Ok(if failures > 0 { 3 } else { 0 })
}

const SWEEP_HEADER: &str = "alpha,beta1,beta2,beta3,gamma,feasible,optimized_cost,baseline_cost,mean_utilization,instance_diversity,provider_fragmentation,mean_overprovision_pct,cost_savings_pct";

fn sweep_row_csv(row: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.params.alpha,
        row.params.beta1,
        row.params.beta2,
        row.params.beta3,
        row.params.gamma,
        row.feasible,
        csv_opt(row.optimized_cost),
        row.baseline_cost,
        csv_opt(row.mean_utilization),
        row.instance_diversity
            .map(|v| v.to_string())
            .unwrap_or_default(),
        row.provider_fragmentation
            .map(|v| v.to_string())
            .unwrap_or_default(),
        csv_opt(row.mean_overprovision_pct),
        csv_opt(row.cost_savings_pct),
    )
}

fn load_scenario_or_first(
    scenario: &Option<PathBuf>,
    catalog: &InstanceCatalog,
) -> Result<Scenario, CoreError> {
    match scenario {
        Some(path) => Scenario::load(path),
        None => Ok(builtin_scenarios(catalog)?.swap_remove(0)),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<i32, CoreError> {
    let catalog = load_catalog_arg(&args.catalog)?;
    let scenario = load_scenario_or_first(&args.scenario, &catalog)?;
    let grid: ParamGrid = serde_json::from_str(&std::fs::read_to_string(&args.grid)?)?;
    let config = pipeline_config(
        &ParamOverrides::none(),
        &args.solver,
        ExpanderArg::LeastWaste,
        scenario.pools.len(),
    )?;
    let rows = scenarios::grid_search(&scenario, &catalog, &grid, &config)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &rows {
        csv.push_str(&sweep_row_csv(row));
        csv.push('\n');
    }
    write_atomic(&args.out, &csv)?;
    Ok(0)
}

fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, CoreError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != SWEEP_HEADER {
        return Err(CoreError::Parse {
            location: "sweep table header".into(),
            message: format!("expected {SWEEP_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(CoreError::Parse {
                location: format!("sweep table line {}", idx + 2),
                message: format!("expected 13 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64, CoreError> {
            fields[i].parse::<f64>().map_err(|e| CoreError::Parse {
                location: format!("sweep table line {}, field {}", idx + 2, i + 1),
                message: e.to_string(),
            })
        };
        let opt_num = |i: usize| -> Result<Option<f64>, CoreError> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(SweepRow {
            params: PenaltyParams {
                alpha: num(0)?,
                beta1: num(1)?,
                beta2: num(2)?,
                beta3: num(3)?,
                gamma: num(4)?,
            },
            feasible: fields[5] == "true",
            optimized_cost: opt_num(6)?,
            baseline_cost: num(7)?,
            mean_utilization: opt_num(8)?,
            instance_diversity: opt_num(9)?.map(|v| v as usize),
            provider_fragmentation: opt_num(10)?.map(|v| v as usize),
            mean_overprovision_pct: opt_num(11)?,
            cost_savings_pct: opt_num(12)?,
        });
    }
    Ok(rows)
}

fn cmd_pareto(args: ParetoArgs) -> Result<i32, CoreError> {
    let rows = parse_sweep_csv(&std::fs::read_to_string(&args.table)?)?;
    let (first, second) = args.objectives.split_once(',').ok_or_else(|| {
        CoreError::validation("objectives must be a pair like \"cost,fragmentation\"")
    })?;
    let keys = (
        first.trim().parse::<MetricKey>()?,
        second.trim().parse::<MetricKey>()?,
    );
    let frontier = scenarios::pareto_frontier(&rows, keys);
    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &frontier {
        csv.push_str(&sweep_row_csv(row));
        csv.push('\n');
    }
    write_atomic(&args.out, &csv)?;
    Ok(0)
}

#[derive(Serialize)]
struct KktCheckReport {
    relaxation: RelaxationSummary,
    kkt: fleetmix_core::kkt::KktReport,
    duality_gap: fleetmix_core::kkt::DualityGapEstimate,
    scale_factor: f64,
}

fn cmd_kkt_check(args: KktCheckArgs) -> Result<i32, CoreError> {
    let started = Instant::now();
    let problem = load_problem_arg(&args.problem, &args.catalog, &args.params)?;
    let settings = BarrierSettings::default();
    let relaxed =
        continuous::multi_start(&problem, &settings, args.solver.starts, args.solver.seed)?;
    let kkt = fleetmix_core::kkt::kkt_report(&problem, &relaxed.x_star, &relaxed.multipliers)?;
    let duality_gap =
        fleetmix_core::kkt::duality_gap_estimate(&problem, &relaxed.x_star, &relaxed.multipliers)?;
    let report = KktCheckReport {
        relaxation: RelaxationSummary::from_solution(&relaxed, false),
        kkt,
        duality_gap,
        scale_factor: fleetmix_core::kkt::scale_factor(&problem),
    };
    let envelope = Envelope::new(report, started.elapsed().as_millis() as u64);
    emit(&args.out, &envelope.to_json()?)?;
    Ok(0)
}

fn cmd_synth_catalog(args: SynthCatalogArgs) -> Result<i32, CoreError> {
    let schema = ResourceSchema::standard();
    let ranges = SynthRanges::default_for(&schema);
    let catalog =
        fleetmix_core::catalog::synth_catalog(args.seed, args.n, args.p, &schema, &ranges)?;
    let format = match args.format {
        FormatArg::Json => CatalogFormat::Json,
        FormatArg::Csv => CatalogFormat::Csv,
    };
    save_catalog(&catalog, &args.out, format)?;
    Ok(0)
}
