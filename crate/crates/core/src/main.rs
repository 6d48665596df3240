//! `scalelaws` command-line interface.
//!
//! Subcommands mirror the library: `fit` runs the batch pipeline over
//! observation logs, `report` exports plot-ready CSV from a report file, and
//! the remaining verbs expose single computations (prediction, allocation,
//! contours, crossovers, frontier and transfer fits, synthetic data).
//!
//! Exit codes: 0 on success, 1 if any group failed or a computation errored,
//! 2 on manifest/schema/usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scalelaws::allocate;
use scalelaws::error::{Error, Result};
use scalelaws::fit::{self, FitConfig, ResidualSpace, RobustLoss};
use scalelaws::model::{ComputeModel, JointLaw, LossToLossLaw, MarginalLaw, Split};
use scalelaws::pipeline::{
    self, CrossoverReport, FrontierReport, LossToLossOptions, PlotKind, Profile, ReportFile,
    RunManifest,
};
use scalelaws::synth::{self, NoiseModel, ObservationTags};
use scalelaws::transfer::{self, TransferPoint};

/// Environment variable holding the default output directory.
const OUT_DIR_ENV: &str = "SCALELAWS_OUT";

#[derive(Parser)]
#[command(
    name = "scalelaws",
    version,
    about = "Scaling-law fitting and compute-allocation analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest observation logs and fit every group, writing reports.
    Fit(FitCmd),
    /// Export plot-ready CSV from a report file.
    Report(ReportCmd),
    /// Predict OOD loss from ID loss under a loss-to-loss law.
    Predict(PredictCmd),
    /// Compute-optimal (N*, D*) for given budgets.
    Allocate(AllocateCmd),
    /// Iso-loss contour grid over (compute, model size).
    Contour(ContourCmd),
    /// Crossing points of two single-axis curves.
    Crossover(CrossoverCmd),
    /// Fit a compute frontier to (compute, loss) points.
    Frontier(FrontierCmd),
    /// Fit a fine-tuning transfer law to (d_f, n_params, d_t) points.
    Transfer(TransferCmd),
    /// Generate synthetic observations from a known joint law.
    Synth(SynthCmd),
}

type ParseResult<T> = std::result::Result<T, String>;

fn parse_residual_space(s: &str) -> ParseResult<ResidualSpace> {
    match s {
        "linear" => Ok(ResidualSpace::Linear),
        "log" => Ok(ResidualSpace::Log),
        other => Err(format!("'{other}' is not 'linear' or 'log'")),
    }
}

fn parse_profile(s: &str) -> ParseResult<Profile> {
    match s {
        "default" => Ok(Profile::Default),
        "kappa_floor" => Ok(Profile::KappaFloor),
        other => Err(format!("'{other}' is not 'default' or 'kappa_floor'")),
    }
}

fn parse_split(s: &str) -> ParseResult<Split> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_plot_kind(s: &str) -> ParseResult<PlotKind> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A parsed `LO:HI:COUNT` log-spaced grid argument.
#[derive(Clone)]
struct GridSpec(Vec<u64>);

fn parse_grid(s: &str) -> ParseResult<GridSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("'{s}' is not of the form LO:HI:COUNT"));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| format!("bad grid bound '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| format!("bad grid bound '{}'", parts[1]))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| format!("bad grid count '{}'", parts[2]))?;
    if !(lo.is_finite() && lo >= 1.0 && hi.is_finite() && hi >= lo) {
        return Err(format!(
            "grid bounds must satisfy 1 <= lo <= hi, got {lo}:{hi}"
        ));
    }
    synth::log_grid(lo.round() as u64, hi.round() as u64, count)
        .map(GridSpec)
        .map_err(|e| e.to_string())
}

#[derive(Args, Clone)]
struct FitConfigArgs {
    /// Residual space: linear or log.
    #[arg(long, value_parser = parse_residual_space, default_value = "linear")]
    residual_space: ResidualSpace,
    /// Enable the Huber robust loss; without a value the threshold is
    /// 1.345 * MAD of the initial residuals.
    #[arg(long, num_args = 0..=1, default_missing_value = "auto")]
    huber: Option<String>,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    rel_tolerance: f64,
    #[arg(long, default_value_t = 64)]
    n_starts: usize,
    /// Seed for initializations beyond the deterministic start grid.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reject constant-loss groups instead of returning a flat fit.
    #[arg(long, default_value_t = false)]
    error_on_constant: bool,
}

impl FitConfigArgs {
    fn to_config(&self) -> Result<FitConfig> {
        let robust = match self.huber.as_deref() {
            None => RobustLoss::LeastSquares,
            Some("auto") => RobustLoss::HuberAuto,
            Some(raw) => {
                let delta: f64 = raw
                    .parse()
                    .map_err(|_| Error::Domain(format!("--huber value '{raw}' is not a number")))?;
                RobustLoss::Huber(delta)
            }
        };
        let config = FitConfig {
            residual_space: self.residual_space,
            robust,
            max_iterations: self.max_iterations,
            rel_tolerance: self.rel_tolerance,
            n_starts: self.n_starts,
            seed: self.seed,
            error_on_constant: self.error_on_constant,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Clone, Copy)]
struct JointLawArgs {
    #[arg(long)]
    e: f64,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    b: f64,
    #[arg(long)]
    beta: f64,
}

impl JointLawArgs {
    fn law(&self) -> Result<JointLaw> {
        JointLaw::new(self.e, self.a, self.alpha, self.b, self.beta)
    }
}

#[derive(Args, Clone, Copy)]
struct ComputeModelArgs {
    /// Forward MACs per parameter per sample.
    #[arg(long)]
    macs_per_param: f64,
    #[arg(long)]
    batch_size: u64,
    /// Epoch count at convergence.
    #[arg(long)]
    epochs: f64,
}

impl ComputeModelArgs {
    fn model(&self) -> Result<ComputeModel> {
        ComputeModel::new(self.macs_per_param, self.batch_size, self.epochs)
    }
}

#[derive(Args)]
struct FitCmd {
    /// JSON manifest; inline flags are ignored when given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Observation log(s) in the documented CSV schema.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    fit: FitConfigArgs,
    /// Compute model (all three required together).
    #[arg(long)]
    macs_per_param: Option<f64>,
    #[arg(long)]
    batch_size: Option<u64>,
    #[arg(long)]
    epochs: Option<f64>,
    #[arg(long, value_parser = parse_profile, default_value = "default")]
    profile: Profile,
    /// ID floor override for loss-to-loss pairing.
    #[arg(long)]
    e_id: Option<f64>,
    /// OOD floor override for loss-to-loss pairing.
    #[arg(long)]
    e_ood: Option<f64>,
    /// Transfer-exponent floor for loss-to-loss fits.
    #[arg(long)]
    kappa_floor: Option<f64>,
    /// Output directory for reports.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportCmd {
    /// Report JSON produced by `fit`, `frontier`, or `crossover`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_parser = parse_plot_kind)]
    kind: PlotKind,
    /// Number of fitted-curve samples.
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Output CSV path.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictCmd {
    #[arg(long)]
    k: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    e_id: f64,
    #[arg(long, default_value_t = 0.0)]
    e_ood: f64,
    /// ID loss value(s) to map to OOD predictions.
    #[arg(long = "l-id", required = true)]
    l_id: Vec<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AllocateCmd {
    #[command(flatten)]
    law: JointLawArgs,
    /// Absorbed constant in C = kappa_const * N * D.
    #[arg(long)]
    kappa_const: f64,
    /// Compute budget(s) in FLOPs.
    #[arg(long = "budget", required = true)]
    budgets: Vec<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ContourCmd {
    #[command(flatten)]
    law: JointLawArgs,
    #[command(flatten)]
    compute: ComputeModelArgs,
    #[arg(long)]
    c_min: f64,
    #[arg(long)]
    c_max: f64,
    #[arg(long)]
    n_min: f64,
    #[arg(long)]
    n_max: f64,
    #[arg(long, default_value_t = 64)]
    res_c: usize,
    #[arg(long, default_value_t = 64)]
    res_n: usize,
    /// Output CSV path.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossoverCmd {
    #[arg(long)]
    e1: f64,
    #[arg(long)]
    coeff1: f64,
    #[arg(long)]
    exponent1: f64,
    #[arg(long)]
    e2: f64,
    #[arg(long)]
    coeff2: f64,
    #[arg(long)]
    exponent2: f64,
    #[arg(long)]
    x_min: f64,
    #[arg(long)]
    x_max: f64,
    /// Axis the curves share: params or data.
    #[arg(long, default_value = "params")]
    axis: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FrontierCmd {
    /// CSV with header `compute,loss`.
    #[arg(long)]
    points: PathBuf,
    #[command(flatten)]
    fit: FitConfigArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransferCmd {
    /// CSV with header `d_f,n_params,d_t`.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    #[command(flatten)]
    law: JointLawArgs,
    /// Model-size grid LO:HI:COUNT (log-spaced).
    #[arg(long, value_parser = parse_grid)]
    n_grid: GridSpec,
    /// Data-size grid LO:HI:COUNT (log-spaced).
    #[arg(long, value_parser = parse_grid)]
    d_grid: GridSpec,
    /// Log-space noise standard deviation; 0 disables noise.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "resnet")]
    arch: String,
    #[arg(long, default_value = "sl")]
    paradigm: String,
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    #[arg(long, value_parser = parse_split, default_value = "ID")]
    split: Split,
    #[arg(long, default_value_t = 128)]
    batch_size: u64,
    #[arg(long)]
    macs_fwd: Option<f64>,
    /// Output CSV path.
    #[arg(long, short)]
    out: PathBuf,
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Pretty JSON to a file, or to stdout when no path is given.
fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => pipeline::write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn read_two_column_csv(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Schema {
            path: path.display().to_string(),
            message: format!(
                "expected header '{}', got '{}'",
                header.join(","),
                got.join(",")
            ),
        });
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let a: f64 = record.get(0).unwrap_or("").trim().parse().map_err(|_| {
            Error::Domain(format!(
                "bad {} value '{}'",
                header[0],
                record.get(0).unwrap_or("")
            ))
        })?;
        let b: f64 = record.get(1).unwrap_or("").trim().parse().map_err(|_| {
            Error::Domain(format!(
                "bad {} value '{}'",
                header[1],
                record.get(1).unwrap_or("")
            ))
        })?;
        points.push((a, b));
    }
    Ok(points)
}

fn read_transfer_csv(path: &Path) -> Result<Vec<TransferPoint>> {
    let expected = ["d_f", "n_params", "d_t"];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::Schema {
            path: path.display().to_string(),
            message: format!(
                "expected header '{}', got '{}'",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse_u64 = |i: usize| -> Result<u64> {
            record.get(i).unwrap_or("").trim().parse().map_err(|_| {
                Error::Domain(format!(
                    "bad {} value '{}'",
                    expected[i],
                    record.get(i).unwrap_or("")
                ))
            })
        };
        let d_t: f64 = record.get(2).unwrap_or("").trim().parse().map_err(|_| {
            Error::Domain(format!("bad d_t value '{}'", record.get(2).unwrap_or("")))
        })?;
        points.push(TransferPoint {
            d_f: parse_u64(0)?,
            n_params: parse_u64(1)?,
            d_t,
        });
    }
    Ok(points)
}

fn run_fit(cmd: &FitCmd) -> Result<bool> {
    let manifest = match &cmd.manifest {
        Some(path) => RunManifest::from_json_file(path)?,
        None => {
            if cmd.inputs.is_empty() {
                return Err(Error::Manifest(
                    "either --manifest or at least one --input is required".into(),
                ));
            }
            let compute_model = match (cmd.macs_per_param, cmd.batch_size, cmd.epochs) {
                (Some(m), Some(b), Some(e)) => Some(ComputeModel::new(m, b, e)?),
                (None, None, None) => None,
                _ => {
                    return Err(Error::Manifest(
                        "--macs-per-param, --batch-size, and --epochs must be given together"
                            .into(),
                    ))
                }
            };
            RunManifest {
                input_paths: cmd.inputs.clone(),
                fit_config: cmd.fit.to_config()?,
                compute_model,
                profile: cmd.profile,
                loss_to_loss: LossToLossOptions {
                    e_id: cmd.e_id,
                    e_ood: cmd.e_ood,
                    kappa_floor: cmd.kappa_floor,
                },
                output_dir: cmd.out.clone().unwrap_or_else(default_out_dir),
                contour_resolution: (24, 24),
                curve_points: 25,
            }
        }
    };
    let summary = pipeline::run_pipeline(&manifest)?;
    for group in &summary.groups {
        let status = match group.status {
            pipeline::GroupStatus::Ok => "ok",
            pipeline::GroupStatus::Skipped => "skipped",
            pipeline::GroupStatus::Failed => "FAILED",
        };
        eprintln!(
            "{} {} {} {} ({}): {}",
            status,
            group.group.arch,
            group.group.paradigm,
            group.group.dataset,
            group.group.split,
            group.reason.as_deref().unwrap_or("report written")
        );
    }
    Ok(summary.any_failed())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Fit(cmd) => run_fit(cmd),
        Command::Report(cmd) => {
            let report = ReportFile::from_json_file(&cmd.report)?;
            pipeline::export_plotdata(&report, cmd.kind, cmd.resolution, &cmd.out)?;
            Ok(false)
        }
        Command::Predict(cmd) => {
            let law = LossToLossLaw::new(cmd.k, cmd.kappa, cmd.e_id, cmd.e_ood)?;
            let predictions: Vec<serde_json::Value> = cmd
                .l_id
                .iter()
                .map(|&l_id| {
                    transfer::predict_ood(&law, l_id)
                        .map(|l_ood| serde_json::json!({ "l_id": l_id, "l_ood": l_ood }))
                })
                .collect::<Result<_>>()?;
            emit_json(cmd.out.as_deref(), &predictions)?;
            Ok(false)
        }
        Command::Allocate(cmd) => {
            let law = cmd.law.law()?;
            let allocations: Vec<serde_json::Value> = cmd
                .budgets
                .iter()
                .map(|&c| {
                    allocate::optimal_allocation(&law, c, cmd.kappa_const)
                        .map(|al| serde_json::json!({ "budget": c, "allocation": al }))
                })
                .collect::<Result<_>>()?;
            emit_json(cmd.out.as_deref(), &allocations)?;
            Ok(false)
        }
        Command::Contour(cmd) => {
            let law = cmd.law.law()?;
            let cm = cmd.compute.model()?;
            let grid = allocate::iso_loss_grid(
                &law,
                &cm,
                (cmd.c_min, cmd.c_max),
                (cmd.n_min, cmd.n_max),
                (cmd.res_c, cmd.res_n),
            )?;
            std::fs::write(&cmd.out, pipeline::contour_grid_csv(&grid))?;
            Ok(false)
        }
        Command::Crossover(cmd) => {
            let axis = match cmd.axis.as_str() {
                "params" => scalelaws::model::Axis::Params,
                "data" => scalelaws::model::Axis::Data,
                other => {
                    return Err(Error::Domain(format!(
                        "axis must be 'params' or 'data', got '{other}'"
                    )))
                }
            };
            let curve_a = MarginalLaw::new(cmd.e1, cmd.coeff1, cmd.exponent1, axis)?;
            let curve_b = MarginalLaw::new(cmd.e2, cmd.coeff2, cmd.exponent2, axis)?;
            let scan = allocate::crossover(&curve_a, &curve_b, (cmd.x_min, cmd.x_max))?;
            let report = ReportFile::Crossover(CrossoverReport {
                curve_a,
                curve_b,
                x_range: (cmd.x_min, cmd.x_max),
                scan,
            });
            emit_json(cmd.out.as_deref(), &report)?;
            Ok(false)
        }
        Command::Frontier(cmd) => {
            let points = read_two_column_csv(&cmd.points, ["compute", "loss"])?;
            let config = cmd.fit.to_config()?;
            let fit = fit::fit_frontier(&points, &config)?;
            let report = ReportFile::Frontier(FrontierReport { fit, points });
            emit_json(cmd.out.as_deref(), &report)?;
            Ok(false)
        }
        Command::Transfer(cmd) => {
            let points = read_transfer_csv(&cmd.points)?;
            let report = transfer::fit_transfer(&points)?;
            emit_json(cmd.out.as_deref(), &report)?;
            Ok(false)
        }
        Command::Synth(cmd) => {
            let law = cmd.law.law()?;
            let noise = if cmd.sigma == 0.0 {
                NoiseModel::none()
            } else {
                NoiseModel::log_normal(cmd.sigma, cmd.seed)
            };
            let tags = ObservationTags {
                arch: cmd.arch.clone(),
                paradigm: cmd.paradigm.clone(),
                dataset: cmd.dataset.clone(),
                split: cmd.split,
                batch_size: cmd.batch_size,
                macs_fwd: cmd.macs_fwd,
            };
            let observations =
                synth::generate_observations(&law, &cmd.n_grid.0, &cmd.d_grid.0, &noise, &tags)?;
            pipeline::write_observations_csv(&cmd.out, &observations)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Schema { .. } | Error::Manifest(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
