//! Experiment driver: the end-to-end pipeline, scheme comparisons, the
//! approximation audit sweep, and deterministic result tables.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::allocation::{
    delay_report, AllocationError, AllocationScheme, BandwidthAllocation, DelayReport,
    UploadContext, UploadLoad, UploadScheme,
};
use crate::caching::{
    rank_model, simulate_cache, zipf_requests, CacheError, ModelEntry, ModelId, PopularityMode,
};
use crate::geometry::{
    coverage_sets, estimate_target_area, GeometryError, SensingGrid, TargetArea,
};
use crate::photo::{ParticipantId, PhotoMeta};
use crate::pricing::{price_all, PriceTag, PricingError};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{CacheParams, Scenario, ScenarioError};
use crate::selection::{
    audit_ratio, cluster_select, exact_select, greedy_select, random_instance, random_select,
    AuditRecord, InstanceShape, SelectionError, SelectionProblem, SelectionResult,
    DEFAULT_MAX_EXACT_PHOTOS,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("target-area estimation: {0}")]
    TargetArea(#[source] GeometryError),
    #[error("pricing: {0}")]
    Pricing(#[source] PricingError),
    #[error("selection: {0}")]
    Selection(#[source] SelectionError),
    #[error("allocation: {0}")]
    Allocation(#[source] AllocationError),
    #[error("caching: {0}")]
    Caching(#[source] CacheError),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("row {row}: metric {metric} is not finite")]
    NonFinite { row: usize, metric: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScheme {
    Greedy,
    /// Uniform random photos, same count as the greedy pick.
    Rpss,
    /// Pose-clustered photos, same count as the greedy pick.
    Cpss,
}

impl SelectionScheme {
    pub const ALL: [SelectionScheme; 3] = [
        SelectionScheme::Greedy,
        SelectionScheme::Rpss,
        SelectionScheme::Cpss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SelectionScheme::Greedy => "greedy",
            SelectionScheme::Rpss => "rpss",
            SelectionScheme::Cpss => "cpss",
        }
    }
}

impl fmt::Display for SelectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionScheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" | "ec-pcs" => Ok(SelectionScheme::Greedy),
            "rpss" | "random" => Ok(SelectionScheme::Rpss),
            "cpss" | "cluster" => Ok(SelectionScheme::Cpss),
            _ => Err(HarnessError::UnknownScheme(s.to_string())),
        }
    }
}

/// Parses a comma-separated scheme list.
pub fn parse_list<T: FromStr>(list: &str) -> Result<Vec<T>, HarnessError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| HarnessError::UnknownScheme(s.to_string()))
        })
        .collect()
}

/// Scene state shared by every scheme of one run.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scenario: Scenario,
    pub photos: Vec<PhotoMeta>,
    pub grid: SensingGrid,
    pub target: TargetArea,
    pub prices: Vec<PriceTag>,
    pub problem: SelectionProblem,
}

impl PreparedScene {
    /// Estimates the target area from every photo, the requester's included,
    /// then restricts participant photos to it and prices them.
    pub fn new(scenario: &Scenario) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let photos = scenario.photos();
        let mut grid = scenario.grid.clone();
        let mut all = Vec::with_capacity(photos.len() + 1);
        all.push(scenario.requester_photo.clone());
        all.extend(photos.iter().cloned());
        let target = estimate_target_area(&all, &mut grid, scenario.params.target_threshold)
            .map_err(HarnessError::TargetArea)?;
        let sets = coverage_sets(&photos, &target, &grid);
        let prices = price_all(
            &photos,
            &scenario.channels(),
            scenario.params.now_min,
            scenario.params.omega,
        )
        .map_err(HarnessError::Pricing)?;
        let problem = SelectionProblem::new(sets, &prices, target.len(), scenario.params.eta)
            .map_err(HarnessError::Selection)?;
        Ok(PreparedScene {
            scenario: scenario.clone(),
            photos,
            grid,
            target,
            prices,
            problem,
        })
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, HarnessError> {
        let mut next = self.clone();
        next.problem = self
            .problem
            .with_eta(eta)
            .map_err(HarnessError::Selection)?;
        next.scenario.params.eta = eta;
        Ok(next)
    }

    pub fn seed(&self) -> u64 {
        self.scenario.params.seed
    }

    /// Runs a selector. Baselines pick `budget` photos with their own RNG
    /// streams; the greedy ignores the budget.
    pub fn select(
        &self,
        scheme: SelectionScheme,
        budget: usize,
    ) -> Result<SelectionResult, HarnessError> {
        let budget = budget.min(self.photos.len());
        match scheme {
            SelectionScheme::Greedy => Ok(greedy_select(&self.problem)),
            SelectionScheme::Rpss => random_select(
                &self.problem,
                budget,
                &mut stream_rng(self.seed(), Stream::Rpss, 0),
            ),
            SelectionScheme::Cpss if budget == 0 => Ok(self
                .problem
                .evaluate(&[])
                .map_err(HarnessError::Selection)?),
            SelectionScheme::Cpss => cluster_select(
                &self.photos,
                &self.problem,
                budget,
                &mut stream_rng(self.seed(), Stream::Cpss, 0),
            ),
        }
        .map_err(HarnessError::Selection)
    }

    /// Per-participant upload loads of the chosen photos, every participant
    /// listed, with the photo counts.
    pub fn loads(
        &self,
        selection: &SelectionResult,
    ) -> (Vec<UploadLoad>, BTreeMap<ParticipantId, usize>) {
        let chosen: std::collections::BTreeSet<_> = selection.chosen_ids.iter().copied().collect();
        self.loads_where(|p| chosen.contains(&p.photo_id))
    }

    pub fn all_loads(&self) -> (Vec<UploadLoad>, BTreeMap<ParticipantId, usize>) {
        self.loads_where(|_| true)
    }

    fn loads_where(
        &self,
        keep: impl Fn(&PhotoMeta) -> bool,
    ) -> (Vec<UploadLoad>, BTreeMap<ParticipantId, usize>) {
        let mut loads = Vec::new();
        let mut counts = BTreeMap::new();
        for part in &self.scenario.participants {
            let picked: Vec<&PhotoMeta> = part.photos.iter().filter(|p| keep(p)).collect();
            loads.push(UploadLoad {
                participant_id: part.participant_id,
                total_mb: picked.iter().map(|p| p.size_mb).sum(),
                snr_linear: part.channel.snr_linear,
            });
            counts.insert(part.participant_id, picked.len());
        }
        (loads, counts)
    }

    pub fn upload_context(&self, selection: &SelectionResult) -> UploadContext {
        let (selected, selected_counts) = self.loads(selection);
        let (all, all_counts) = self.all_loads();
        UploadContext {
            selected,
            selected_counts,
            all,
            all_counts,
            total_hz: self.scenario.params.total_bandwidth_hz,
            cloud: self.scenario.cloud,
        }
    }

    /// Allocates bandwidth and measures delay for one scheme pair. Nothing to
    /// upload means zero delay.
    pub fn delay(
        &self,
        selection: &SelectionResult,
        allocation: AllocationScheme,
        upload: UploadScheme,
        rras_index: u64,
    ) -> Result<(Option<BandwidthAllocation>, DelayReport), HarnessError> {
        let ctx = self.upload_context(selection);
        let mut rng = stream_rng(self.seed(), Stream::Rras, rras_index);
        match crate::allocation::scheme_delay(upload, allocation, &ctx, &mut rng) {
            Ok((alloc, report)) => Ok((Some(alloc), report)),
            Err(AllocationError::NoLoad) => {
                let loads = match upload {
                    UploadScheme::EdgeTotal => &ctx.all,
                    _ => &ctx.selected,
                };
                let zero = BandwidthAllocation {
                    shares: loads.iter().map(|l| (l.participant_id, 0.0)).collect(),
                    total_hz: ctx.total_hz,
                };
                let report = delay_report(loads, &zero).map_err(HarnessError::Allocation)?;
                Ok((None, report))
            }
            Err(e) => Err(HarnessError::Allocation(e)),
        }
    }

    /// Hit ratio of the edge cache over a Zipf request stream in which this
    /// scene's model is the most popular one.
    pub fn cache_hit_ratio(&self, params: &CacheParams) -> Result<f64, HarnessError> {
        let own = ModelId(self.target.fingerprint() | (1 << 63));
        let id_of = |rank: usize| if rank == 1 { own } else { rank_model(rank) };
        let models: Vec<ModelEntry> = (1..=params.model_count)
            .map(|rank| ModelEntry {
                model_id: id_of(rank),
                size_units: 1,
                popularity: (rank as f64).powf(-params.alpha),
            })
            .collect();
        let requests: Vec<ModelId> = zipf_requests(
            params.model_count,
            params.alpha,
            params.requests,
            &mut stream_rng(self.seed(), Stream::Zipf, 0),
        )
        .map_err(HarnessError::Caching)?
        .into_iter()
        .map(|m| id_of(m.0 as usize + 1))
        .collect();
        let report = simulate_cache(
            params.capacity_units,
            &models,
            &requests,
            PopularityMode::Static,
            params.warmup,
        )
        .map_err(HarnessError::Caching)?;
        Ok(report.hit_ratio)
    }
}

/// One result table line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub seed: u64,
    pub selection: String,
    pub allocation: String,
    pub upload: String,
    pub eta: f64,
    pub omega: f64,
    pub bandwidth_hz: f64,
    pub photo_count: usize,
    pub total_cost: f64,
    pub coverage_ratio: f64,
    pub max_delay_s: f64,
    pub hit_ratio: Option<f64>,
    pub feasible: bool,
}

pub const RESULT_COLUMNS: [&str; 14] = [
    "experiment_id",
    "seed",
    "selection",
    "allocation",
    "upload",
    "eta",
    "omega",
    "bandwidth_hz",
    "photo_count",
    "total_cost",
    "coverage_ratio",
    "max_delay_s",
    "hit_ratio",
    "feasible",
];

fn row_for(
    scene: &PreparedScene,
    experiment_id: &str,
    selection: SelectionScheme,
    result: &SelectionResult,
    allocation: AllocationScheme,
    upload: UploadScheme,
    delay: &DelayReport,
    hit_ratio: Option<f64>,
) -> ResultRow {
    let p = &scene.scenario.params;
    ResultRow {
        experiment_id: experiment_id.to_string(),
        seed: p.seed,
        selection: selection.name().to_string(),
        allocation: allocation.name().to_string(),
        upload: upload.name().to_string(),
        eta: scene.problem.eta(),
        omega: p.omega,
        bandwidth_hz: p.total_bandwidth_hz,
        photo_count: result.photo_count(),
        total_cost: result.total_cost,
        coverage_ratio: result.coverage_ratio(scene.problem.target_size()),
        max_delay_s: delay.max_delay,
        hit_ratio,
        feasible: result.feasible,
    }
}

/// Full pipeline: target area, coverage, pricing, greedy selection, optimal
/// allocation with edge upload, and the cache stage when configured.
pub fn run_pipeline(scenario: &Scenario) -> Result<ResultRow, HarnessError> {
    let scene = PreparedScene::new(scenario)?;
    pipeline_row(&scene, "pipeline")
}

pub fn pipeline_row(scene: &PreparedScene, experiment_id: &str) -> Result<ResultRow, HarnessError> {
    let result = greedy_select(&scene.problem);
    let (_, delay) = scene.delay(
        &result,
        AllocationScheme::Optimal,
        UploadScheme::EdgePartial,
        0,
    )?;
    let hit_ratio = match &scene.scenario.cache {
        Some(params) => Some(scene.cache_hit_ratio(params)?),
        None => None,
    };
    Ok(row_for(
        scene,
        experiment_id,
        SelectionScheme::Greedy,
        &result,
        AllocationScheme::Optimal,
        UploadScheme::EdgePartial,
        &delay,
        hit_ratio,
    ))
}

/// One row per (selection, allocation, upload) combination, in argument
/// order. Baselines get the greedy's photo count as their budget.
pub fn run_comparison(
    scenario: &Scenario,
    selections: &[SelectionScheme],
    allocations: &[AllocationScheme],
    uploads: &[UploadScheme],
) -> Result<Vec<ResultRow>, HarnessError> {
    let scene = PreparedScene::new(scenario)?;
    compare_scene(&scene, "compare", selections, allocations, uploads)
}

pub fn compare_scene(
    scene: &PreparedScene,
    experiment_id: &str,
    selections: &[SelectionScheme],
    allocations: &[AllocationScheme],
    uploads: &[UploadScheme],
) -> Result<Vec<ResultRow>, HarnessError> {
    let greedy = greedy_select(&scene.problem);
    let budget = greedy.photo_count();
    let hit_ratio = match &scene.scenario.cache {
        Some(params) => Some(scene.cache_hit_ratio(params)?),
        None => None,
    };
    let mut rows = Vec::new();
    for (si, &sel) in selections.iter().enumerate() {
        let result = match sel {
            SelectionScheme::Greedy => greedy.clone(),
            other => scene.select(other, budget)?,
        };
        for &alloc in allocations {
            for (ui, &upload) in uploads.iter().enumerate() {
                let rras_index = (si * uploads.len() + ui) as u64;
                let (_, delay) = scene.delay(&result, alloc, upload, rras_index)?;
                rows.push(row_for(
                    scene,
                    experiment_id,
                    sel,
                    &result,
                    alloc,
                    upload,
                    &delay,
                    hit_ratio,
                ));
            }
        }
    }
    Ok(rows)
}

/// Outcome of the approximation-ratio sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditSummary {
    pub records: Vec<AuditRecord>,
    pub feasibility_mismatches: Vec<u64>,
    pub cost_inversions: Vec<u64>,
    pub violations: Vec<u64>,
    pub infeasible: usize,
}

impl AuditSummary {
    pub fn ok(&self) -> bool {
        self.feasibility_mismatches.is_empty()
            && self.cost_inversions.is_empty()
            && self.violations.is_empty()
    }
}

/// Greedy against the exact oracle on `count` seeded random instances.
pub fn audit_sweep(
    count: u64,
    seed: u64,
    shape: &InstanceShape,
) -> Result<AuditSummary, HarnessError> {
    let mut summary = AuditSummary::default();
    for i in 0..count {
        let problem = random_instance(&mut stream_rng(seed, Stream::Audit, i), shape);
        let greedy = greedy_select(&problem);
        let exact =
            exact_select(&problem, DEFAULT_MAX_EXACT_PHOTOS).map_err(HarnessError::Selection)?;
        if greedy.feasible != exact.feasible {
            summary.feasibility_mismatches.push(i);
            continue;
        }
        if !exact.feasible {
            summary.infeasible += 1;
            continue;
        }
        if exact.total_cost > greedy.total_cost {
            summary.cost_inversions.push(i);
        }
        let report =
            audit_ratio(&greedy, &exact, problem.required()).map_err(HarnessError::Selection)?;
        if report.violation {
            summary.violations.push(i);
        }
        summary.records.push(report.record(i));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(HarnessError::UnknownScheme(s.to_string())),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A cell of a result table.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(u64),
    Float(f64),
    Bool(bool),
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(n) => n.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Bool(b) => b.to_string(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Text(s) => serde_json::Value::String(s.clone()).to_string(),
            Value::Int(n) => n.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Bool(b) => b.to_string(),
            Value::Missing => "null".to_string(),
        }
    }
}

/// Rows that can be written as a fixed-column table.
pub trait Tabular {
    fn columns() -> Vec<&'static str>;
    fn values(&self) -> Vec<Value>;
}

impl Tabular for ResultRow {
    fn columns() -> Vec<&'static str> {
        RESULT_COLUMNS.to_vec()
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Text(self.experiment_id.clone()),
            Value::Int(self.seed),
            Value::Text(self.selection.clone()),
            Value::Text(self.allocation.clone()),
            Value::Text(self.upload.clone()),
            Value::Float(self.eta),
            Value::Float(self.omega),
            Value::Float(self.bandwidth_hz),
            Value::Int(self.photo_count as u64),
            Value::Float(self.total_cost),
            Value::Float(self.coverage_ratio),
            Value::Float(self.max_delay_s),
            self.hit_ratio.map_or(Value::Missing, Value::Float),
            Value::Bool(self.feasible),
        ]
    }
}

impl Tabular for AuditRecord {
    fn columns() -> Vec<&'static str> {
        vec!["instance_id", "greedy_cost", "exact_cost", "ratio", "bound"]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Int(self.instance_id),
            Value::Float(self.greedy_cost),
            Value::Float(self.exact_cost),
            Value::Float(self.ratio),
            Value::Float(self.bound),
        ]
    }
}

impl Tabular for crate::allocation::AllocationRow {
    fn columns() -> Vec<&'static str> {
        vec![
            "scheme",
            "participant_id",
            "share_hz",
            "delay_s",
            "max_delay_s",
        ]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Text(self.scheme.clone()),
            Value::Int(self.participant_id as u64),
            Value::Float(self.share_hz),
            Value::Float(self.delay_s),
            Value::Float(self.max_delay_s),
        ]
    }
}

impl Tabular for crate::caching::CacheRow {
    fn columns() -> Vec<&'static str> {
        vec!["capacity", "alpha", "n", "requests", "hit_ratio"]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Int(self.capacity),
            Value::Float(self.alpha),
            Value::Int(self.n as u64),
            Value::Int(self.requests),
            Value::Float(self.hit_ratio),
        ]
    }
}

/// A chosen photo, for the `select` listing.
#[derive(Debug, Clone, PartialEq)]
pub struct PickRow {
    pub selection: String,
    pub photo_id: u32,
    pub participant_id: u32,
    pub price: f64,
    pub size_mb: f64,
}

impl Tabular for PickRow {
    fn columns() -> Vec<&'static str> {
        vec![
            "selection",
            "photo_id",
            "participant_id",
            "price",
            "size_mb",
        ]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Text(self.selection.clone()),
            Value::Int(self.photo_id as u64),
            Value::Int(self.participant_id as u64),
            Value::Float(self.price),
            Value::Float(self.size_mb),
        ]
    }
}

fn check_finite<T: Tabular>(rows: &[T]) -> Result<(), HarnessError> {
    let columns = T::columns();
    for (i, row) in rows.iter().enumerate() {
        for (v, name) in row.values().iter().zip(&columns) {
            if let Value::Float(f) = v {
                if !f.is_finite() {
                    return Err(HarnessError::NonFinite {
                        row: i,
                        metric: name,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Renders rows with a stable column order. Empty input gives a header-only
/// CSV or an empty JSON array.
pub fn render_results<T: Tabular>(
    rows: &[T],
    format: OutputFormat,
) -> Result<String, HarnessError> {
    check_finite(rows)?;
    let columns = T::columns();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&columns)?;
            for row in rows {
                w.write_record(row.values().iter().map(Value::csv))?;
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Io {
                path: "<buffer>".into(),
                source: e.into_error(),
            })?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Json => {
            let mut out = String::from("[");
            for (i, row) in rows.iter().enumerate() {
                out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
                for (j, (name, v)) in columns.iter().zip(row.values()).enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "\"{name}\": {}", v.json());
                }
                out.push('}');
            }
            out.push_str(if rows.is_empty() { "]\n" } else { "\n]\n" });
            Ok(out)
        }
    }
}

pub fn emit_results<T: Tabular>(
    rows: &[T],
    format: OutputFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let text = render_results(rows, format)?;
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
