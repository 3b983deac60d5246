//! `cascade` — run contractual waterfalls over deterministic or simulated
//! inflow paths, compute metrics, and sweep structural designs.
//!
//! Subcommands: `validate`, `run`, `simulate`, `enumerate`, `metrics`,
//! `sweep`, `example`. Exit code 0 on success, 1 on a domain error (with a
//! machine-readable JSON object on standard error), 2 on usage errors.
//! Randomised commands require an explicit `--seed`; outputs are
//! reproducible bit-for-bit given equal inputs. `CASCADE_THREADS` caps
//! worker parallelism (default: machine parallelism).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cascade_core::design::{search, DesignSpace, SearchMode, DEFAULT_BUDGET};
use cascade_core::example::three_position_example;
use cascade_core::io::{
    self, parse_objective, parse_pool, parse_space, parse_structure, render_payments,
    render_scenarios, render_sweep_table, report_to_csv, report_to_json, write_atomic,
    RunManifest,
};
use cascade_core::metrics::{build_report, run_scenarios, DiscountCurve};
use cascade_core::{enumerate_scenarios, run_waterfall, sample_scenarios, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "cascade", version, about = "Contractual cash-flow waterfall engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a structure specification and report every violation.
    Validate {
        /// Structure JSON file.
        structure: PathBuf,
    },
    /// Run one deterministic inflow path through a structure.
    Run(RunArgs),
    /// Simulate scenarios from a pool and allocate each one.
    Simulate(SimulateArgs),
    /// Enumerate every scenario of a small pool exactly, with weights.
    Enumerate(EnumerateArgs),
    /// Compute valuation and loss metrics from a payments directory.
    Metrics(MetricsArgs),
    /// Evaluate a design space over a shared simulated scenario set.
    Sweep(SweepArgs),
    /// Print the bundled three-position example structure.
    Example,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    structure: PathBuf,
    /// Inflow path CSV (`period,amount`).
    #[arg(long)]
    inflows: PathBuf,
    /// Output payments CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    structure: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Number of scenarios to sample.
    #[arg(long)]
    scenarios: u64,
    /// Master seed; required so reruns are reproducible.
    #[arg(long)]
    seed: u64,
    /// Output directory (payments.csv, scenarios.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    structure: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory produced by `simulate` or `enumerate`.
    #[arg(long)]
    payments: PathBuf,
    /// Discount curve CSV (`period,factor`); defaults to no discounting.
    #[arg(long)]
    discount: Option<PathBuf>,
    /// Comma-separated quantile levels in (0, 1).
    #[arg(long, default_value = "0.95,0.99")]
    quantiles: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    structure: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Master seed for scenario generation.
    #[arg(long)]
    seed: u64,
    /// Number of scenarios in the shared set.
    #[arg(long)]
    scenarios: u64,
    /// Design space JSON (parameter axes and constraints).
    #[arg(long)]
    space: PathBuf,
    /// Objective JSON (position and metric).
    #[arg(long)]
    objective: PathBuf,
    /// Output table CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SweepMode::Grid)]
    mode: SweepMode,
    /// Number of draws for random mode.
    #[arg(long)]
    draws: Option<u64>,
    /// Seed for random mode draws.
    #[arg(long, default_value_t = 0)]
    search_seed: u64,
    /// Maximum number of evaluated points.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Discount curve CSV for present-value objectives.
    #[arg(long)]
    discount: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Grid,
    Random,
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", error_json(&error));
            ExitCode::FAILURE
        }
    }
}

/// CASCADE_THREADS caps the rayon pool; unset means machine parallelism.
fn configure_threads() {
    if let Ok(value) = std::env::var("CASCADE_THREADS") {
        if let Ok(threads) = value.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn error_json(error: &Error) -> String {
    let mut body = serde_json::json!({
        "error": error.code(),
        "message": error.to_string(),
    });
    if let Error::Validation(issues) = error {
        body["issues"] = serde_json::Value::Array(
            issues
                .iter()
                .map(|issue| serde_json::Value::String(issue.to_string()))
                .collect(),
        );
    }
    serde_json::to_string(&body).expect("error serialization cannot fail")
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::Io)
}

fn parse_quantiles(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|level| {
            let level = level.trim();
            level.parse::<f64>().map_err(|_| Error::BadDecimal {
                text: level.to_string(),
            })
        })
        .collect()
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Example => {
            print!("{}", io::serialize_structure(&three_position_example()));
            Ok(())
        }
        Command::Validate { structure } => {
            let text = read_file(&structure)?;
            parse_structure(&text)?;
            println!("ok: {}", structure.display());
            Ok(())
        }
        Command::Run(args) => run_command(args),
        Command::Simulate(args) => simulate_command(args),
        Command::Enumerate(args) => enumerate_command(args),
        Command::Metrics(args) => metrics_command(args),
        Command::Sweep(args) => sweep_command(args),
    }
}

fn run_command(args: RunArgs) -> Result<(), Error> {
    let structure_text = read_file(&args.structure)?;
    let inflow_text = read_file(&args.inflows)?;
    let spec = parse_structure(&structure_text)?;
    let inflows = io::read_inflows(&inflow_text)?;
    let matrix = run_waterfall(&spec, &inflows)?;

    write_atomic(
        &args.out,
        render_payments(std::slice::from_ref(&matrix)).as_bytes(),
    )?;
    let manifest = RunManifest::new(
        VERSION,
        &format!(
            "run --structure {} --inflows {}",
            args.structure.display(),
            args.inflows.display()
        ),
        &[
            (file_label(&args.structure), structure_text.as_bytes()),
            (file_label(&args.inflows), inflow_text.as_bytes()),
        ],
    );
    write_manifest_beside(&args.out, &manifest)
}

fn simulate_command(args: SimulateArgs) -> Result<(), Error> {
    let structure_text = read_file(&args.structure)?;
    let pool_text = read_file(&args.pool)?;
    let spec = parse_structure(&structure_text)?;
    let pool = parse_pool(&pool_text)?;
    check_horizons(&spec, pool.horizon)?;

    let scenarios = sample_scenarios(&pool, args.seed, args.scenarios)?;
    let matrices = run_scenarios(&spec, &scenarios)?;

    write_atomic(
        &args.out.join("payments.csv"),
        render_payments(&matrices).as_bytes(),
    )?;
    write_atomic(
        &args.out.join("scenarios.csv"),
        render_scenarios(&scenarios).as_bytes(),
    )?;
    let mut manifest = RunManifest::new(
        VERSION,
        &format!(
            "simulate --structure {} --pool {} --scenarios {} --seed {}",
            args.structure.display(),
            args.pool.display(),
            args.scenarios,
            args.seed
        ),
        &[
            (file_label(&args.structure), structure_text.as_bytes()),
            (file_label(&args.pool), pool_text.as_bytes()),
        ],
    );
    manifest.master_seed = Some(args.seed);
    manifest.scenario_count = Some(args.scenarios);
    write_atomic(
        &args.out.join("manifest.json"),
        manifest.to_json().as_bytes(),
    )
}

fn enumerate_command(args: EnumerateArgs) -> Result<(), Error> {
    let structure_text = read_file(&args.structure)?;
    let pool_text = read_file(&args.pool)?;
    let spec = parse_structure(&structure_text)?;
    let pool = parse_pool(&pool_text)?;
    check_horizons(&spec, pool.horizon)?;

    let scenarios = enumerate_scenarios(&pool)?;
    let matrices = run_scenarios(&spec, &scenarios)?;

    write_atomic(
        &args.out.join("payments.csv"),
        render_payments(&matrices).as_bytes(),
    )?;
    write_atomic(
        &args.out.join("scenarios.csv"),
        render_scenarios(&scenarios).as_bytes(),
    )?;
    let mut manifest = RunManifest::new(
        VERSION,
        &format!(
            "enumerate --structure {} --pool {}",
            args.structure.display(),
            args.pool.display()
        ),
        &[
            (file_label(&args.structure), structure_text.as_bytes()),
            (file_label(&args.pool), pool_text.as_bytes()),
        ],
    );
    manifest.scenario_count = Some(scenarios.len() as u64);
    write_atomic(
        &args.out.join("manifest.json"),
        manifest.to_json().as_bytes(),
    )
}

fn metrics_command(args: MetricsArgs) -> Result<(), Error> {
    let payments_text = read_file(&args.payments.join("payments.csv"))?;
    let matrices = io::read_payments(&payments_text)?;

    let scenarios_path = args.payments.join("scenarios.csv");
    let weights = if scenarios_path.exists() {
        io::read_scenario_weights(&read_file(&scenarios_path)?)?
    } else {
        None
    };

    let periods = matrices.first().map(|m| m.periods.len()).unwrap_or(0);
    let (curve, curve_bytes) = match &args.discount {
        Some(path) => {
            let text = read_file(path)?;
            (io::read_curve(&text)?, Some(text))
        }
        None => (DiscountCurve::flat(periods), None),
    };

    let levels = parse_quantiles(&args.quantiles)?;
    let report = build_report(&matrices, weights.as_deref(), &curve, &levels)?;

    let rendered = match args.format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&report_to_json(&report)).expect("report json") + "\n"
        }
        OutputFormat::Csv => report_to_csv(&report),
    };
    write_atomic(&args.out, rendered.as_bytes())?;

    let mut inputs: Vec<(String, &[u8])> =
        vec![("payments.csv".to_string(), payments_text.as_bytes())];
    if let Some(bytes) = &curve_bytes {
        inputs.push(("curve.csv".to_string(), bytes.as_bytes()));
    }
    let manifest = RunManifest::new(
        VERSION,
        &format!(
            "metrics --payments {} --quantiles {}",
            args.payments.display(),
            args.quantiles
        ),
        &inputs,
    );
    write_manifest_beside(&args.out, &manifest)
}

fn sweep_command(args: SweepArgs) -> Result<(), Error> {
    let structure_text = read_file(&args.structure)?;
    let pool_text = read_file(&args.pool)?;
    let space_text = read_file(&args.space)?;
    let objective_text = read_file(&args.objective)?;

    let spec = parse_structure(&structure_text)?;
    let pool = parse_pool(&pool_text)?;
    check_horizons(&spec, pool.horizon)?;
    let space_file = parse_space(&space_text)?;
    let objective = parse_objective(&objective_text)?;

    let curve = match &args.discount {
        Some(path) => io::read_curve(&read_file(path)?)?,
        None => DiscountCurve::flat(spec.horizon),
    };

    let mode = match args.mode {
        SweepMode::Grid => SearchMode::ExhaustiveGrid,
        SweepMode::Random => SearchMode::Random {
            count: args
                .draws
                .ok_or(Error::EmptyInput("--draws is required with --mode random"))?,
            seed: args.search_seed,
        },
    };

    let scenarios = sample_scenarios(&pool, args.seed, args.scenarios)?;
    let space = DesignSpace {
        base: spec,
        parameters: space_file.parameters,
        constraints: space_file.constraints,
    };
    let outcome = search(&space, &objective, &scenarios, &curve, mode, args.budget)?;

    let table = render_sweep_table(&space.parameters, &space.constraints, &outcome);
    write_atomic(&args.out, table.as_bytes())?;

    let mut manifest = RunManifest::new(
        VERSION,
        &format!(
            "sweep --structure {} --pool {} --seed {} --scenarios {} --space {} --objective {}",
            args.structure.display(),
            args.pool.display(),
            args.seed,
            args.scenarios,
            args.space.display(),
            args.objective.display()
        ),
        &[
            (file_label(&args.structure), structure_text.as_bytes()),
            (file_label(&args.pool), pool_text.as_bytes()),
            (file_label(&args.space), space_text.as_bytes()),
            (file_label(&args.objective), objective_text.as_bytes()),
        ],
    );
    manifest.master_seed = Some(args.seed);
    manifest.scenario_count = Some(args.scenarios);
    write_manifest_beside(&args.out, &manifest)
}

fn check_horizons(spec: &cascade_core::StructureSpec, pool_horizon: usize) -> Result<(), Error> {
    if spec.horizon != pool_horizon {
        return Err(Error::LengthMismatch {
            expected: spec.horizon,
            got: pool_horizon,
        });
    }
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string())
}

/// Manifests accompany single-file outputs as `<name>.manifest.json`.
fn write_manifest_beside(out: &Path, manifest: &RunManifest) -> Result<(), Error> {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());
    let path = out.with_file_name(format!("{}.manifest.json", name));
    write_atomic(&path, manifest.to_json().as_bytes())
}
