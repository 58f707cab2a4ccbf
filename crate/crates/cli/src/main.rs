mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use specprobe_core::spectral::{Component, SvdScope};
use specprobe_core::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "specprobe", version, about = "Spectral transferability diagnostics for checkpoint features")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for probe initialization, shuffling and synthetic data
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for per-checkpoint fan-out
    #[arg(long, global = true, env = "SPECPROBE_THREADS", default_value_t = 1,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,

    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a labeled CSV into an FTRX feature file
    Import(ImportArgs),
    /// Split features into main and residual spectral components
    Split(SplitArgs),
    /// Train a softmax probe and report its accuracy
    Probe(ProbeArgs),
    /// Score features with LogME
    Logme(LogmeArgs),
    /// Analyze every checkpoint of a manifest
    Trajectory(TrajectoryArgs),
    /// Generate synthetic features
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_energy(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("energy threshold must be in (0, 1], got {v}"))
    }
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SplitFlags {
    /// Fraction of the singular-value sum kept in the main component
    #[arg(long, default_value_t = 0.8, value_parser = parse_energy)]
    pub energy: f64,

    /// Decompose the whole matrix once, or every mini-batch separately
    #[arg(long, default_value = "full", value_parser = parse_scope)]
    pub svd_scope: SvdScope,
}

fn parse_scope(s: &str) -> Result<SvdScope, String> {
    s.parse().map_err(|e: specprobe_core::Error| e.to_string())
}

fn parse_component(s: &str) -> Result<Component, String> {
    s.parse().map_err(|e: specprobe_core::Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Rows per batch when --svd-scope batch
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    /// Writes PREFIX.main.ftrx, PREFIX.resid.ftrx and PREFIX.json
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct ProbeFlags {
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub probe: ProbeFlags,
    /// Which features the probe sees
    #[arg(long, default_value = "full", value_parser = parse_component)]
    pub component: Component,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Args, Debug)]
pub struct LogmeArgs {
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogmeSplit {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also probe the main and residual components
    #[arg(long)]
    pub with_split: bool,
    /// Also score each checkpoint with LogME (needs --logme-split)
    #[arg(long, requires = "logme_split")]
    pub with_logme: bool,
    /// Which features LogME scores
    #[arg(long, value_enum, requires = "with_logme")]
    pub logme_split: Option<LogmeSplit>,
    #[command(flatten)]
    pub probe: ProbeFlags,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// One train/test pair from a Gaussian class mixture
    Features(SynthFeaturesArgs),
    /// A planted checkpoint trajectory with its manifest
    Trajectory(SynthTrajectoryArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SynthBase {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: u32,
    #[arg(long, default_value_t = 4)]
    pub signal_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub signal_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
}

#[derive(Args, Debug)]
pub struct SynthFeaturesArgs {
    #[command(flatten)]
    pub base: SynthBase,
    /// Writes PREFIX.train.ftrx and PREFIX.test.ftrx
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthTrajectoryArgs {
    #[command(flatten)]
    pub base: SynthBase,
    #[arg(long, default_value_t = 9)]
    pub checkpoints: usize,
    /// Checkpoint index of the planted FE peak
    #[arg(long, default_value_t = 3)]
    pub peak: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Import(a) => commands::import(g, a),
        Command::Split(a) => commands::split(g, a),
        Command::Probe(a) => commands::probe(g, a),
        Command::Logme(a) => commands::logme(g, a),
        Command::Trajectory(a) => commands::trajectory(g, a),
        Command::Synth(SynthCommand::Features(a)) => commands::synth_features(g, a),
        Command::Synth(SynthCommand::Trajectory(a)) => commands::synth_trajectory(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
