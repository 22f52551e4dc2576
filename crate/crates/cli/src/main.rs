//! `v2xsense` command line: traffic, datasets, reconstruction, evaluation.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

/// Relative data paths resolve under this directory when it is set.
pub const DATA_DIR_ENV: &str = "V2XSENSE_DATA_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "v2xsense", version, about = "Vehicular spectrum sensing pipelines", args_override_self = true)]
pub struct Cli {
    /// `key = value` file of flag defaults for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate traffic or ingest an FCD trace; write trajectories as CSV.
    GenTraffic(GenTraffic),
    /// Generate a labelled spectrum dataset.
    GenDataset(GenDataset),
    /// Reconstruct one split from compressed measurements.
    Reconstruct(Reconstruct),
    /// Score estimates (or a reference method) against the clean spectra.
    Evaluate(Evaluate),
    /// Check a training log and plot its loss curves.
    TrainingLog(TrainingLogArgs),
}

impl Command {
    const NAMES: [&'static str; 5] = ["gen-traffic", "gen-dataset", "reconstruct", "evaluate", "training-log"];
}

#[derive(Debug, Args)]
pub struct GenTraffic {
    /// Simulated seconds.
    #[arg(long, conflicts_with = "fcd", required_unless_present = "fcd", requires = "seed")]
    pub duration: Option<f64>,
    /// SUMO floating-car-data XML to ingest instead of simulating.
    #[arg(long, value_name = "FILE")]
    pub fcd: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean inter-arrival time per direction in seconds.
    #[arg(long)]
    pub spawn_interval: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Band {
    Sub6ghz,
    Thz,
}

#[derive(Debug, Args)]
pub struct GenDataset {
    #[arg(long, default_value_t = 0)]
    pub train: usize,
    #[arg(long, default_value_t = 0)]
    pub val: usize,
    #[arg(long, default_value_t = 0)]
    pub test: usize,
    /// Noise level in dB; `inf` for noiseless data.
    #[arg(long, default_value_t = 30.0)]
    pub snr: f64,
    #[arg(long, value_enum, default_value = "sub6ghz")]
    pub band: Band,
    /// `key = value` band description overriding the preset.
    #[arg(long, value_name = "FILE")]
    pub band_config: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub subcarriers: usize,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads; the file does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Validate flags and print the header without generating.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconMethod {
    Omp,
    Fista,
    Learned,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixChoice {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct Reconstruct {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_enum)]
    pub method: ReconMethod,
    /// Network weights; required by `learned`.
    #[arg(long, value_name = "FILE", required_if_eq("method", "learned"))]
    pub weights: Option<PathBuf>,
    /// OMP sparsity: atoms selected per sample.
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    /// FISTA L1 weight; default is 1e-3 · ‖Φᴴy‖∞ per sample.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Measurements per subcarrier for the classical methods.
    #[arg(long, default_value_t = 0.125)]
    pub rate: f64,
    /// Stored sensing matrix; otherwise a random one from `--seed`.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub matrix_kind: MatrixChoice,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    Oracle,
    Noisy,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Estimates written by `reconstruct`.
    #[arg(long, value_name = "FILE", required_unless_present = "reference", conflicts_with = "reference")]
    pub estimates: Option<PathBuf>,
    /// Score the clean or noisy spectra themselves.
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Report JSON path; printed to stdout otherwise.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Directory for overlay and bar-chart SVGs.
    #[arg(long, value_name = "DIR")]
    pub plot: Option<PathBuf>,
    /// Samples drawn as overlays.
    #[arg(long, default_value_t = 3)]
    pub plot_samples: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainingLogArgs {
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Loss-curve SVG output.
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

/// `path` under the data directory when it is relative and the
/// environment variable is set.
pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let mut cmd = Cli::command();
    let matches = cmd.try_get_matches_from_mut(argv)?;
    Cli::from_arg_matches(&matches).map_err(|e| e.format(&mut cmd))
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = match config_path(&argv) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let from_file = config::config_args(&text)?;
            let index = argv
                .iter()
                .position(|a| Command::NAMES.contains(&a.to_string_lossy().as_ref()))
                .ok_or_else(|| CliError::Usage("missing subcommand".into()))?;
            config::merge(&argv, index, from_file)
        }
        None => argv,
    };
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Usage(e.render().to_string())),
        Err(e) => {
            print!("{}", e.render());
            return Ok(());
        }
    };
    match cli.command {
        Command::GenTraffic(a) => commands::gen_traffic(&a),
        Command::GenDataset(a) => commands::gen_dataset(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::TrainingLog(a) => commands::training_log(&a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.message().trim_end();
            if matches!(e, CliError::Usage(_)) {
                eprintln!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
