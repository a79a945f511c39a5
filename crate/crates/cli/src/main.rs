#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fourier_shap::pipeline::CountingAllocator;
use fourier_shap::{Error, ErrorClass};
use serde::Serialize;

mod commands;
mod manifest;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[derive(Parser, Debug)]
#[command(name = "fshap", version, about = "Spectral SHAP attributions and error bounds on discrete product spaces")]
struct Cli {
    /// Worker threads for parallel batch work (0 = all cores).
    #[arg(long, global = true, env = "FSHAP_THREADS", default_value_t = 0)]
    threads: usize,

    /// Log progress at info level.
    #[arg(short, long, global = true)]
    verbose: bool,

    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build the orthonormal basis of a product measure.
    Basis(BasisArgs),
    /// Dense value table or MLP to a sparse spectral model.
    Transform(TransformArgs),
    /// Keep the atoms picked by a selector.
    Truncate(TruncateArgs),
    /// SHAP values of a sparse model.
    Shap(ShapArgs),
    /// Gaussian-process SHAP error bounds.
    Bounds(BoundsArgs),
    /// Draw Gaussian-process samples.
    GpSample(GpSampleArgs),
    /// Binning, atom selection, fitting and per-bin reports on a CSV.
    Pipeline(PipelineArgs),
    /// Time Fourier SHAP against Kernel SHAP.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct BasisArgs {
    /// Measure file: `{"cardinalities": [...], "measures": [[...], ...]}`.
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TransformArgs {
    #[arg(long)]
    pub measure: PathBuf,
    /// CSV with a `value` column, one row per state in mixed-radix order (feature 0 slowest).
    #[arg(long, conflicts_with = "mlp", required_unless_present = "mlp")]
    pub values: Option<PathBuf>,
    /// MLP weights; the logit is tabulated over all states.
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    /// Largest state space to tabulate.
    #[arg(long, default_value_t = fourier_shap::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TruncateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Selector such as `order<=2&abs>=1e-3` or `top=100`.
    #[arg(long = "S")]
    pub selector: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Fourier,
    Brute,
    Kernel,
}

#[derive(Args, Debug, Serialize)]
pub struct ShapArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Fourier)]
    pub method: MethodArg,
    /// Comma-separated state indices; repeat for several instances.
    #[arg(long)]
    pub instance: Vec<String>,
    /// Headerless CSV of instances, one state vector per row.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Explain the truncation to this selector and add the deterministic bound column.
    #[arg(long = "S")]
    pub selector: Option<String>,
    /// Kernel SHAP coalition budget.
    #[arg(long, default_value_t = 2048)]
    pub budget: usize,
    /// Required for `--method kernel`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated feature names for the report.
    #[arg(long)]
    pub feature_names: Option<String>,
    /// Largest accepted `|base + Σφ − h(x*)|`.
    #[arg(long, default_value_t = 1e-8)]
    pub efficiency_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    /// Kernel specification file.
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long = "S")]
    pub selector: String,
    /// Comma-separated state indices of the explained instance.
    #[arg(long)]
    pub instance: String,
    /// Failure probabilities for the high-probability bound.
    #[arg(long, default_values_t = vec![0.05])]
    pub delta: Vec<f64>,
    /// Monte Carlo samples for empirical gaps (0 = bounds only).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    /// Hidden width of a random finite network for the finite-width bound (NNGP kernels only).
    #[arg(long)]
    pub width: Option<usize>,
    /// Required with `--mc-samples` or `--width`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GpSampleArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PipelineArgs {
    /// Raw CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Binning schema JSON (default: the built-in stroke scheme).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// MLP weights providing the targets and the Kernel SHAP baseline.
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    /// Column of predicted probabilities (overrides the schema's `prediction`).
    #[arg(long)]
    pub prediction_column: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 300)]
    pub k1: usize,
    #[arg(long, default_value_t = 4000)]
    pub k2: usize,
    #[arg(long, default_value_t = 2000)]
    pub k3: usize,
    #[arg(long, default_value_t = 3)]
    pub d_max: usize,
    #[arg(long, default_value_t = 5)]
    pub per_feature_top: usize,
    #[arg(long, default_value_t = fourier_shap::pipeline::DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = 512)]
    pub kernel_budget: usize,
    /// Explain at most this many rows per bin (first rows in file order).
    #[arg(long)]
    pub max_per_bin: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BaselineArg {
    /// Kernel SHAP queries the sparse model directly.
    Sparse,
    /// Kernel SHAP queries a dense table of the model.
    Dense,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub kernel_budget: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    /// Instances drawn from the model's measure.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, value_enum, default_value_t = BaselineArg::Sparse)]
    pub baseline: BaselineArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("fshap: cannot start worker pool: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli.command, cli.manifest.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fshap: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
