//! `driftwin` command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver stopped at its
//! iteration limit, 4 numeric failure.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use driftwin::baselines::nelder_mead_reconstruct;
use driftwin::benchmark::{self, BenchmarkConfig, InstanceOptions, SolverKind};
use driftwin::io::{self, LabeledMatrix, ResultDocument};
use driftwin::reconstruction::{reconstruct, ObjectiveVariant, ReconstructionConfig};
use driftwin::water::{self, DemandEstimate, DemandProfile, HOURS};
use driftwin::window::atomize_with_horizon;
use driftwin::Error;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "driftwin", version, about = "Distribution-process reconstruction from windowed observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split interval windows into atoms and write the incidence matrix.
    Atomize(AtomizeArgs),
    /// Recover (P, D) from an incidence matrix and window distributions.
    Reconstruct(ReconstructArgs),
    /// Run the seeded rank-sweep benchmark.
    Benchmark(BenchmarkArgs),
    /// Water-demand case study.
    #[command(subcommand)]
    Water(WaterCommand),
}

#[derive(Args)]
struct AtomizeArgs {
    /// JSON array of windows: `[{"id": "w1", "intervals": [[0, 2]]}, …]`.
    windows: PathBuf,
    /// Output directory for atoms.json and incidence.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Explicit horizon `start,end`; defaults to the hull of all windows.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    horizon: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolverArg {
    Cd,
    NelderMead,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum VariantArg {
    Constrained,
    Direct,
}

#[derive(Args)]
struct ReconstructArgs {
    incidence: PathBuf,
    /// Window distributions, one row per window, same labels as the incidence.
    r: PathBuf,
    #[arg(long, value_enum, default_value = "cd")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "constrained")]
    variant: VariantArg,
    /// Stop once an iteration lowers the objective by less than this
    /// fraction of its value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_value = "1.0,1.4,1.9,2.2,2.6")]
    ranks: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Number of data categories.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only draw instances whose noiseless solution is unique.
    #[arg(long)]
    identifiable: bool,
    #[arg(long, value_delimiter = ',', default_value = "cd,nelder-mead")]
    solvers: Vec<SolverArg>,
    /// Iteration cap for coordinate descent.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Write every generated instance under this directory.
    #[arg(long)]
    emit_fixtures: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum WaterCommand {
    /// Simulate households and write meter logs plus ground truth.
    Simulate(SimulateArgs),
    /// Fit hourly demand from meter logs.
    Fit(FitArgs),
    /// Predict community consumption from a fitted estimate.
    Predict(PredictArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Demand profile JSON; defaults to the bundled two-peak profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 12_000)]
    households: usize,
    /// Overrides the profile's horizon.
    #[arg(long)]
    days: Option<u32>,
    #[arg(long, default_value_t = 4.0)]
    reports_per_day: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    logs: PathBuf,
    /// Fit on the first N households only.
    #[arg(long)]
    households: Option<usize>,
    #[arg(long, default_value = "estimate.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    estimate: PathBuf,
    #[arg(long)]
    households: usize,
    #[arg(long, default_value_t = 0.95)]
    quantile: f64,
    #[arg(long, default_value = "prediction.csv")]
    out: PathBuf,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFiniteObjective { .. } => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = manifest::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Atomize(a) => cmd_atomize(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Water(WaterCommand::Simulate(a)) => cmd_simulate(a),
        Command::Water(WaterCommand::Fit(a)) => cmd_fit(a),
        Command::Water(WaterCommand::Predict(a)) => cmd_predict(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure { code: 2, message: format!("{}: {e}", dir.display()) })
}

fn cmd_atomize(a: AtomizeArgs) -> Outcome {
    let start = Instant::now();
    let windows = io::read_windows_file(&a.windows)?;
    let horizon = a.horizon.as_ref().map(|h| [h[0], h[1]]);
    let (atoms, incidence) = atomize_with_horizon(&windows, horizon)?;
    create_dir(&a.out)?;
    let atoms_path = a.out.join("atoms.json");
    let inc_path = a.out.join("incidence.csv");
    io::write_json_file(&atoms, &atoms_path)?;
    io::incidence_to_csv(&incidence).write_file(&inc_path)?;
    RunManifest::new("atomize", &serde_json::json!({ "windows": a.windows, "horizon": horizon }), None)
        .outputs(&[&atoms_path, &inc_path])
        .finish(start, &a.out.join("manifest.json"))?;
    Ok(0)
}

fn cmd_reconstruct(a: ReconstructArgs) -> Outcome {
    let start = Instant::now();
    let incidence = io::incidence_from_csv(LabeledMatrix::read_file(&a.incidence)?)?;
    let obs = io::observations_from_csv(LabeledMatrix::read_file(&a.r)?, incidence.clone())?;
    let mut config = ReconstructionConfig {
        objective_variant: match a.variant {
            VariantArg::Constrained => ObjectiveVariant::Constrained,
            VariantArg::Direct => ObjectiveVariant::Direct,
        },
        ..ReconstructionConfig::default()
    };
    if let Some(t) = a.tol {
        config.relative_tol = t;
    }
    if let Some(n) = a.max_iter {
        config.max_outer_iter = n;
    }
    let (res, solver) = match a.solver {
        SolverArg::Cd => (reconstruct(&incidence, &obs, &config)?, "cd"),
        SolverArg::NelderMead => (nelder_mead_reconstruct(&incidence, &obs, &config)?, "nelder-mead"),
    };
    let variant = match a.variant {
        VariantArg::Constrained => "constrained",
        VariantArg::Direct => "direct",
    };
    io::write_json_file(&ResultDocument::new(solver, variant, &res), &a.out)?;
    let snapshot = serde_json::json!({
        "incidence": a.incidence,
        "r": a.r,
        "solver": a.solver,
        "config": config,
    });
    RunManifest::new("reconstruct", &snapshot, Some(config.seed)).outputs(&[&a.out]).finish(start, &manifest::beside(&a.out))?;
    if !res.converged {
        eprintln!("warning: stopped at the iteration limit after {} iterations", res.iterations);
        return Ok(3);
    }
    Ok(0)
}

fn cmd_benchmark(a: BenchmarkArgs) -> Outcome {
    let start = Instant::now();
    if a.runs == 0 {
        return Err(Error::InvalidParameter("--runs must be at least 1".into()).into());
    }
    let mut config = BenchmarkConfig {
        ranks: a.ranks.clone(),
        runs: a.runs,
        seed: a.seed,
        instance: InstanceOptions { m: a.m, require_identifiable: a.identifiable, ..Default::default() },
        solvers: a
            .solvers
            .iter()
            .map(|s| match s {
                SolverArg::Cd => SolverKind::CoordinateDescent,
                SolverArg::NelderMead => SolverKind::NelderMead,
            })
            .collect(),
        ..Default::default()
    };
    if let Some(n) = a.max_iter {
        config.cd.max_outer_iter = n;
    }
    let report = benchmark::run_benchmark(&config)?;
    create_dir(&a.out)?;
    let summary_path = a.out.join("summary.csv");
    let runs_path = a.out.join("runs.csv");
    report.write_summary_csv(io_file(&summary_path)?)?;
    report.write_runs_csv(io_file(&runs_path)?)?;
    let mut outputs = vec![summary_path, runs_path];
    if let Some(dir) = &a.emit_fixtures {
        for (ri, rank) in config.ranks.iter().enumerate() {
            for run in 0..config.runs {
                let (_, inst) = benchmark::cell_instance(&config, ri, run)?;
                let path = dir.join(format!("rank{rank}_run{run}"));
                benchmark::write_fixture(&inst, &path)?;
                outputs.push(path);
            }
        }
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    RunManifest::new("benchmark", &config, Some(a.seed)).outputs(&refs).finish(start, &a.out.join("manifest.json"))?;
    Ok(0)
}

fn io_file(path: &Path) -> Result<std::fs::File, Failure> {
    std::fs::File::create(path).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn io_open(path: &Path) -> Result<std::fs::File, Failure> {
    std::fs::File::open(path).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    let start = Instant::now();
    let mut profile = match &a.profile {
        Some(p) => DemandProfile::from_json(io_open(p)?)?,
        None => DemandProfile::two_peak(),
    };
    if let Some(d) = a.days {
        profile.horizon_days = d;
    }
    let sim = water::simulate_households(&profile, a.households, a.reports_per_day, a.seed)?;
    create_dir(&a.out)?;
    let logs_path = a.out.join("logs.csv");
    let truth_path = a.out.join("truth_hourly.csv");
    water::write_logs_csv(&sim.logs, io_file(&logs_path)?)?;
    let all: Vec<usize> = (0..a.households).collect();
    let mean = sim.hourly_mean(&all);
    let mut w = csv_writer(&truth_path)?;
    let row = |w: &mut csv::Writer<std::fs::File>, rec: [String; 2]| {
        w.write_record(rec).map_err(|e| Failure::from(Error::from(e)))
    };
    row(&mut w, ["hour".into(), "mean_liters_per_household".into()])?;
    for (h, m) in mean.iter().enumerate().take(HOURS) {
        row(&mut w, [h.to_string(), format!("{m}")])?;
    }
    w.flush().map_err(|e| Failure::from(Error::from(e)))?;
    let snapshot = serde_json::json!({
        "profile": profile,
        "households": a.households,
        "reports_per_day": a.reports_per_day,
    });
    RunManifest::new("water simulate", &snapshot, Some(a.seed))
        .outputs(&[&logs_path, &truth_path])
        .finish(start, &a.out.join("manifest.json"))?;
    Ok(0)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, Failure> {
    Ok(csv::Writer::from_writer(io_file(path)?))
}

fn cmd_fit(a: FitArgs) -> Outcome {
    let start = Instant::now();
    let mut logs = water::read_logs_csv(io_open(&a.logs)?)?;
    if let Some(n) = a.households {
        logs.truncate(n);
    }
    let est = water::fit_demand(&logs)?;
    io::write_json_file(&est, &a.out)?;
    let snapshot = serde_json::json!({ "logs": a.logs, "households": logs.len() });
    RunManifest::new("water fit", &snapshot, None).outputs(&[&a.out]).finish(start, &manifest::beside(&a.out))?;
    Ok(0)
}

fn cmd_predict(a: PredictArgs) -> Outcome {
    let start = Instant::now();
    let est: DemandEstimate = serde_json::from_reader(io_open(&a.estimate)?).map_err(|e| Failure::from(Error::from(e)))?;
    if est.hourly_mean.len() != HOURS || est.hourly_var.len() != HOURS {
        return Err(Error::Parse(format!("estimate must have {HOURS} hourly means and variances")).into());
    }
    let pred = water::predict_community(&est, a.households, a.quantile)?;
    water::write_prediction_csv(&pred, io_file(&a.out)?)?;
    let snapshot = serde_json::json!({ "estimate": a.estimate, "households": a.households, "quantile": a.quantile });
    RunManifest::new("water predict", &snapshot, None).outputs(&[&a.out]).finish(start, &manifest::beside(&a.out))?;
    Ok(0)
}
