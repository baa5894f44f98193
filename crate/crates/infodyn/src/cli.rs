use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use infodyn_core::clustering::FeatureMode;

use crate::commands;
use crate::config::{GridFormat, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "infodyn",
    version,
    about = "Entropy spectra, z-stack transforms, LC-MS decomposition and causal-system checks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the noisy hodgepodge machine and write PGM frames plus a manifest.
    SimulateBz(SimulateArgs),
    /// I_α and P_α spectra for consecutive frame pairs.
    Spectra(SpectraArgs),
    /// k-means segmentation of a spectrum series.
    Cluster(ClusterArgs),
    /// Divergence transform of a z-stack with sign-split and LIL renders.
    Zstack(ZStackArgs),
    /// Synthetic LC-MS grid with ground truth.
    LcmsSynth(LcmsSynthArgs),
    /// Noise fit, classification, decomposition and peak table of an LC-MS grid.
    LcmsAnalyze(LcmsAnalyzeArgs),
    /// Validate a causal decomposition and cut information bonds.
    KernelCheck(KernelCheckArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub emit_every: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    /// Frame manifest written by `simulate-bz`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Use every n-th frame.
    #[arg(long)]
    pub decimate: Option<usize>,
    /// Output file name inside the output directory [default: spectra.csv].
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Spectrum CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Range of cluster counts such as `3..6` (inclusive).
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Z-score every feature column first.
    #[arg(long)]
    pub standardize: bool,
    /// Also cluster every n-th pair and report the agreement.
    #[arg(long)]
    pub decimate: Option<usize>,
    /// Spectra of the decimated frame series; defaults to every n-th row of `--input`.
    #[arg(long, requires = "decimate")]
    pub decimated_input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    I,
    P,
    Both,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::I => FeatureMode::Pdge,
            ModeArg::P => FeatureMode::Pdged,
            ModeArg::Both => FeatureMode::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct ZStackArgs {
    /// Stack descriptor JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Restrict to these channels (repeatable).
    #[arg(long)]
    pub channel: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub stable_tolerance: Option<f64>,
    #[arg(long)]
    pub no_renders: bool,
}

#[derive(Debug, Args)]
pub struct LcmsSynthArgs {
    #[arg(long, value_enum)]
    pub format: Option<GridFormat>,
}

#[derive(Debug, Args)]
pub struct LcmsAnalyzeArgs {
    /// Grid as CSV or as a JSON descriptor of a flat binary file.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth mask CSV; adds precision and recall to the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Blank-run grid whose peaks are removed from the result.
    #[arg(long)]
    pub blank: Option<PathBuf>,
    #[arg(long)]
    pub envelope_k: Option<f64>,
    #[arg(long)]
    pub ridge_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KernelCheckArgs {
    /// System description TOML.
    #[arg(long)]
    pub input: PathBuf,
    /// Bond indices to cut, overriding the file's `cut` list.
    #[arg(long, value_delimiter = ',')]
    pub cut: Option<Vec<usize>>,
}

/// Resolved global settings shared by all subcommands.
pub struct Context {
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.global.verbose);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let config = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::validation("--threads", "must be at least 1"));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context {
        seed: cli.global.seed.or(config.seed),
        out_dir: cli
            .global
            .out_dir
            .clone()
            .or_else(|| config.out_dir.clone().map(PathBuf::from))
            .unwrap_or_else(|| "out".into()),
        config,
    };
    match cli.command {
        Command::SimulateBz(a) => commands::simulate::run(&ctx, &a),
        Command::Spectra(a) => commands::spectra::run(&ctx, &a),
        Command::Cluster(a) => commands::cluster::run(&ctx, &a),
        Command::Zstack(a) => commands::zstack::run(&ctx, &a),
        Command::LcmsSynth(a) => commands::lcms::synth(&ctx, &a),
        Command::LcmsAnalyze(a) => commands::lcms::analyze(&ctx, &a),
        Command::KernelCheck(a) => commands::kernel::run(&ctx, &a),
    }
}

/// `"3..6"`, `"3..=6"` or a single `"4"`.
pub fn parse_k_range(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::validation("--k", format!("`{text}` is not a range like 3..6"));
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
        None => {
            let k = parse(text)?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
