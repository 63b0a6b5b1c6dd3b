//! Command-line front end.
//!
//! Every command reads one JSON [`RunConfig`] (all fields optional), applies the
//! `--out`, `--seed` and `--threads` flags, writes the resolved configuration to
//! the output directory and then runs. Relative paths inside the config are
//! resolved against the config file's directory.

mod commands;
mod config;
mod data;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use commands::Kind;

use crate::dataset::DatasetError;
use crate::evaluation::EvalError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;
use crate::synthgen::SynthError;

pub use config::{
    BaselineSpec, DataSource, EstimatorSpec, FitOn, HeatmapSpec, Precision, RunConfig, SplitSpec, SweepSpec, SynthSpec,
};
pub use output::OutputDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Scene(_) | SynthError::Plan(_) | SynthError::EmptyPositions => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Empty(_) | MetricsError::ZeroNorm(_) | MetricsError::Length { .. } => {
                CliError::Data(e.to_string())
            }
            MetricsError::EigenOptions(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Spec(_)
            | NeuralError::Config(_)
            | NeuralError::Shape { .. }
            | NeuralError::LatentMismatch { .. } => CliError::Config(e.to_string()),
            NeuralError::ZeroOutput | NeuralError::NonFinite(_) | NeuralError::Diverged { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) | EvalError::Provenance { .. } => CliError::Config(e.to_string()),
            EvalError::EmptySubset { .. } => CliError::Data(e.to_string()),
            EvalError::Metrics(m) => m.into(),
            EvalError::Neural(n) => n.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "csimap", version, about = "Downlink precoding from uplink CSI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (overrides `threads`).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset file and print its summary.
    Validate {
        /// Dataset file; its sidecar must sit next to it. Defaults to the configured data.
        dataset: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate the configured synthetic dataset.
    Synth(CommonArgs),
    /// Random-precoding and principal-component baselines.
    Baseline(CommonArgs),
    /// Train every configured estimator on the split's training side and score it.
    TrainEval(CommonArgs),
    /// Seen/unseen sweep over checkerboard square sides.
    Sweep(CommonArgs),
    /// Per-cell mean power maps.
    Heatmap(CommonArgs),
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loaded configuration plus the directory relative paths resolve against.
pub struct Invocation {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Invocation {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let (mut config, base_dir) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (RunConfig::from_json(&text)?, base)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        if let Some(out) = &args.out {
            config.out_dir = Some(std::path::absolute(out)?);
        }
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if args.threads.is_some() {
            config.threads = args.threads;
        }
        config.validate()?;
        Ok(Self {
            config: config.resolve(),
            base_dir,
        })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> Result<OutputDir, CliError> {
        let dir = self
            .config
            .out_dir
            .as_ref()
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set out_dir".into()))?;
        OutputDir::create(&self.resolve_path(dir))
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, kind) = match command {
        Command::Validate { dataset, common } => (common, Kind::Validate(dataset)),
        Command::Synth(c) => (c, Kind::Synth),
        Command::Baseline(c) => (c, Kind::Baseline),
        Command::TrainEval(c) => (c, Kind::TrainEval),
        Command::Sweep(c) => (c, Kind::Sweep),
        Command::Heatmap(c) => (c, Kind::Heatmap),
    };
    let inv = Invocation::from_args(&common)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = inv.config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match inv.config.precision {
        Precision::F64 => commands::execute::<f64>(&kind, &inv),
        Precision::F32 => commands::execute::<f32>(&kind, &inv),
    })
}
