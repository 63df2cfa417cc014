//! `shadeprune`: binarize shadow photos, extract features, train and
//! evaluate pruning-quality classifiers, generate synthetic data, and plot.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
//! (solver did not converge).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "shadeprune", version, about = "Pruning evaluation from tree shadow images")]
pub struct Cli {
    /// Seed for splits, solver ordering and synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print per-photo threshold audits and solver details to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Otsu-binarize one PPM/PGM image and write a binary PGM.
    Binarize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Compute features for every photo of a manifest.
    Extract {
        manifest: PathBuf,
        /// Output CSV (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// One aggregated row per tree instead of one per photo.
        #[arg(long)]
        per_tree: bool,
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Train one model and save it.
    Train {
        /// Manifest or features CSV.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Train only on the training side of a split with this fraction.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Classify rows with a saved model and write predictions CSV.
    Predict {
        /// Manifest or features CSV.
        input: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        /// Output CSV (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Classify photos instead of trees.
        #[arg(long)]
        per_point: bool,
    },
    /// Split, train every kernel on the same split, and report accuracy.
    Evaluate {
        /// Manifest or features CSV.
        input: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        train_fraction: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Write the human-readable report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the key=value report.
        #[arg(long)]
        report_kv: Option<PathBuf>,
        /// Write test-set predictions of every configuration.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Write an accuracy bar chart (SVG).
        #[arg(long)]
        chart: Option<PathBuf>,
        /// Save each trained model as `<dir>/model-<i>-<kernel>.txt`.
        #[arg(long)]
        model_dir: Option<PathBuf>,
    },
    /// Generate a synthetic dataset of shadow images and a manifest.
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        trees: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = shadeprune::synth::DEFAULT_IMAGE_EDGE)]
        width: usize,
        #[arg(long, default_value_t = shadeprune::synth::DEFAULT_IMAGE_EDGE)]
        height: usize,
        /// Mean shadow coverage of well-pruned trees.
        #[arg(long, default_value_t = 0.30, value_parser = coverage)]
        good_coverage: f64,
        /// Mean shadow coverage of poorly pruned trees.
        #[arg(long, default_value_t = 0.65, value_parser = coverage)]
        poor_coverage: f64,
        /// Uniform intensity noise amplitude.
        #[arg(long, default_value_t = shadeprune::synth::DEFAULT_NOISE)]
        noise: u8,
    },
    /// Scatter plot of a features CSV with a model's boundary (SVG).
    Plot {
        features: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Pooling window edge.
    #[arg(long, default_value_t = shadeprune::pooling::DEFAULT_POOL_FACTOR)]
    pub pool_factor: usize,
    /// Skip pooling.
    #[arg(long)]
    pub no_pool: bool,
    /// Grid edge in original pixels.
    #[arg(long, default_value_t = shadeprune::features::DEFAULT_GRID_EDGE)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Kernel name; repeat to compare several in `evaluate`.
    #[arg(long = "kernel", default_value = "linear")]
    pub kernels: Vec<String>,
    #[arg(long, default_value_t = shadeprune::svm::DEFAULT_C)]
    pub c: f64,
    /// RBF width; defaults to 1 / (2 Var(X)) of the training rows.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = shadeprune::svm::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Classify photos instead of trees.
    #[arg(long)]
    pub per_point: bool,
    #[command(flatten)]
    pub extract: ExtractArgs,
}

fn coverage(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("coverage must lie strictly between 0 and 1, got {v}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
