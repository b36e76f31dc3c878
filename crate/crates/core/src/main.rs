use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use ecpcs::allocation::{allocation_rows, AllocationError, AllocationScheme, UploadScheme};
use ecpcs::caching::{simulate_cache, zipf_catalogue, zipf_requests, CacheRow, PopularityMode};
use ecpcs::harness::{
    audit_sweep, compare_scene, parse_list, pipeline_row, render_results, HarnessError,
    OutputFormat, PickRow, PreparedScene, SelectionScheme, Tabular,
};
use ecpcs::rng::{stream_rng, Stream};
use ecpcs::scenario::{generate_preset, load_scenario, scenario_to_toml, Preset, Scenario};
use ecpcs::selection::{exact_select, InstanceShape, DEFAULT_MAX_EXACT_PHOTOS};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "ecpcs", version, about = "Edge photo crowdsourcing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene and write it as TOML.
    Generate(SceneArgs),
    /// Select photos and list the picks.
    Select(SceneArgs),
    /// Allocate upload bandwidth for the greedy selection.
    Allocate(SceneArgs),
    /// Simulate the edge cache under a Zipf request stream.
    Cache(CacheArgs),
    /// Run the full pipeline and print one result row.
    Pipeline(SceneArgs),
    /// Compare selection, allocation and upload schemes.
    Compare(CompareArgs),
    /// Audit the greedy against the exact oracle on random instances.
    Audit(AuditArgs),
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// Scenario file; a preset scene is generated when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// gate-like or temple-like.
    #[arg(long, default_value = "gate-like")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    bandwidth_mhz: Option<f64>,
    /// Coverage count that marks a cell as target.
    #[arg(long)]
    threshold: Option<u32>,
    /// Selection scheme for `select`, allocation scheme for `allocate`.
    #[arg(long)]
    scheme: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value = "greedy,rpss,cpss")]
    selection: String,
    #[arg(long, default_value = "optimal,fras,wras,rras")]
    allocation: String,
    #[arg(long, default_value = "edge_partial,edge_total,cloud_partial")]
    upload: String,
}

#[derive(Args)]
struct CacheArgs {
    #[arg(long, default_value_t = 10)]
    capacity: u64,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    models: usize,
    #[arg(long, default_value_t = 100_000)]
    requests: usize,
    /// Popularity from running request counts instead of rank weights.
    #[arg(long)]
    history: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 200)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::NonFinite { .. }
            | HarnessError::Allocation(AllocationError::OptimalityViolation { .. }) => {
                EXIT_INVARIANT
            }
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load(args: &SceneArgs) -> Result<Scenario, Failure> {
    let mut scenario = match &args.scenario {
        Some(path) => load_scenario(path).map_err(Failure::config)?,
        None => {
            let preset: Preset = args.preset.parse().map_err(Failure::config)?;
            generate_preset(preset, args.seed.unwrap_or(0)).map_err(Failure::config)?
        }
    };
    let p = &mut scenario.params;
    if let Some(seed) = args.seed {
        p.seed = seed;
    }
    if let Some(eta) = args.eta {
        p.eta = eta;
    }
    if let Some(omega) = args.omega {
        p.omega = omega;
    }
    if let Some(mhz) = args.bandwidth_mhz {
        p.total_bandwidth_hz = mhz * 1e6;
    }
    if let Some(t) = args.threshold {
        p.target_threshold = t;
    }
    scenario.validate().map_err(Failure::config)?;
    Ok(scenario)
}

fn write_text(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::config),
    }
}

fn write_rows<T: Tabular>(rows: &[T], output: &OutputArgs) -> Result<(), Failure> {
    let format: OutputFormat = output
        .format
        .parse()
        .map_err(|_| Failure::config(format!("unknown format `{}`", output.format)))?;
    let text = render_results(rows, format)?;
    write_text(&text, &output.out)
}

fn infeasible(ok: bool) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INFEASIBLE,
            message: "selection cannot reach the required coverage".into(),
        })
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => {
            let scenario = load(&args)?;
            let text = scenario_to_toml(&scenario).map_err(Failure::config)?;
            write_text(&text, &args.output.out)
        }
        Command::Select(args) => {
            let scene = PreparedScene::new(&load(&args)?)?;
            let name = args.scheme.as_deref().unwrap_or("greedy");
            let result = if name.eq_ignore_ascii_case("exact") {
                exact_select(&scene.problem, DEFAULT_MAX_EXACT_PHOTOS).map_err(Failure::config)?
            } else {
                let scheme: SelectionScheme = name.parse()?;
                let budget = scene.select(SelectionScheme::Greedy, 0)?.photo_count();
                scene.select(scheme, budget)?
            };
            let rows: Vec<PickRow> = result
                .chosen_ids
                .iter()
                .map(|&id| {
                    let photo = scene.scenario.photo(id).expect("chosen photo exists");
                    let idx = scene.problem.index_of(id).expect("chosen photo is indexed");
                    PickRow {
                        selection: name.to_ascii_lowercase(),
                        photo_id: id.0,
                        participant_id: photo.participant_id.0,
                        price: scene.problem.price(idx),
                        size_mb: photo.size_mb,
                    }
                })
                .collect();
            write_rows(&rows, &args.output)?;
            infeasible(result.feasible)
        }
        Command::Allocate(args) => {
            let scene = PreparedScene::new(&load(&args)?)?;
            let scheme: AllocationScheme = args
                .scheme
                .as_deref()
                .unwrap_or("optimal")
                .parse()
                .map_err(Failure::config)?;
            let result = scene.select(SelectionScheme::Greedy, 0)?;
            let (alloc, report) = scene.delay(&result, scheme, UploadScheme::EdgePartial, 0)?;
            let rows = alloc
                .map(|a| allocation_rows(scheme.name(), &a, &report))
                .unwrap_or_default();
            write_rows(&rows, &args.output)?;
            infeasible(result.feasible)
        }
        Command::Cache(args) => {
            let models = zipf_catalogue(args.models, args.alpha);
            let requests = zipf_requests(
                args.models,
                args.alpha,
                args.requests,
                &mut stream_rng(args.seed, Stream::Zipf, 0),
            )
            .map_err(Failure::config)?;
            let mode = if args.history {
                PopularityMode::History
            } else {
                PopularityMode::Static
            };
            let report = simulate_cache(args.capacity, &models, &requests, mode, 0)
                .map_err(Failure::config)?;
            let row = CacheRow {
                capacity: args.capacity,
                alpha: args.alpha,
                n: args.models,
                requests: report.requests,
                hit_ratio: report.hit_ratio,
            };
            write_rows(&[row], &args.output)
        }
        Command::Pipeline(args) => {
            let scene = PreparedScene::new(&load(&args)?)?;
            let row = pipeline_row(&scene, "pipeline")?;
            write_rows(std::slice::from_ref(&row), &args.output)?;
            infeasible(row.feasible)
        }
        Command::Compare(args) => {
            let scene = PreparedScene::new(&load(&args.scene)?)?;
            let selections: Vec<SelectionScheme> = parse_list(&args.selection)?;
            let allocations: Vec<AllocationScheme> = parse_list(&args.allocation)?;
            let uploads: Vec<UploadScheme> = parse_list(&args.upload)?;
            let rows = compare_scene(&scene, "compare", &selections, &allocations, &uploads)?;
            write_rows(&rows, &args.scene.output)
        }
        Command::Audit(args) => {
            let summary = audit_sweep(args.count, args.seed, &InstanceShape::default())?;
            write_rows(&summary.records, &args.output)?;
            if summary.ok() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_INVARIANT,
                    message: format!(
                        "audit failed: {} bound violations, {} feasibility mismatches, {} cost inversions",
                        summary.violations.len(),
                        summary.feasibility_mismatches.len(),
                        summary.cost_inversions.len()
                    ),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ecpcs: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
