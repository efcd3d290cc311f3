use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod commands;
mod config;

/// Invalid flags or flag values; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

/// In-ReRAM stochastic computing simulator.
///
/// Every command is deterministic given --seed. SCREAMSIM_THREADS caps the
/// number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "screamsim", version)]
struct Cli {
    /// JSON file presetting flags; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generator error sweep: CSV of MSE (%) per source, M and N.
    SngSweep(SngSweepArgs),
    /// Arithmetic error sweep: CSV of MSE (%) per op, source and N.
    OpSweep(OpSweepArgs),
    /// Run one image application and write the output image and a manifest.
    App(AppArgs),
    /// Calibrate unit costs, price a run manifest or compare designs.
    Cost(CostArgs),
    /// SC versus binary quality under sense faults, optionally calibrating p_f.
    FaultStudy(FaultStudyArgs),
    /// Write the synthetic test images as PGM files.
    Corpus(CorpusArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SngSweepArgs {
    /// Sources: imsng, sw, lfsr, sobol [default: imsng]
    #[arg(long, value_delimiter = ',')]
    pub source: Option<Vec<String>>,
    /// Word widths [default: 8]
    #[arg(long = "M", value_delimiter = ',')]
    #[serde(rename = "M")]
    pub m: Option<Vec<u32>>,
    /// Stream lengths [default: 32,64,128,256,512]
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    /// Samples per cell [default: 100000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSweepArgs {
    /// Ops: mul, sadd, aadd, asub, div, min, max [default: all]
    #[arg(long, value_delimiter = ',')]
    pub ops: Option<Vec<String>>,
    /// Sources: imsng, sw, lfsr, sobol [default: imsng]
    #[arg(long, value_delimiter = ',')]
    pub source: Option<Vec<String>>,
    /// Word width [default: 8]
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<u32>,
    /// Stream lengths [default: 32,64,128,256,512]
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    /// Samples per cell [default: 10000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AppArgs {
    /// composite, bilinear or matting
    pub app: String,
    #[command(flatten)]
    pub opts: AppOpts,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppOpts {
    /// PGM inputs: FG BG ALPHA for composite and matting, one image for
    /// bilinear. Without inputs a built-in scene is used.
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// Built-in scene name [default: the first scene for the app]
    #[arg(long)]
    pub scene: Option<String>,
    /// Stream length [default: 256]
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Per-sensed-bit flip probability [default: 0]
    #[arg(long)]
    pub pf: Option<f64>,
    /// cim, sw or binary [default: cim]
    #[arg(long)]
    pub backend: Option<String>,
    /// opt or naive [default: opt]
    #[arg(long)]
    pub variant: Option<String>,
    /// steered or plain [default: steered]
    #[arg(long)]
    pub select: Option<String>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs aggregated in the manifest [default: 1]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output PGM of the first run
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest destination [default: OUT with a .json extension, or stdout]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostArgs {
    /// Fit unit costs to the baseline rows; prints residuals as CSV
    #[arg(long)]
    #[serde(default)]
    pub calibrate: bool,
    /// Price the ledger stored in a run manifest
    #[arg(long, value_name = "MANIFEST")]
    pub report: Option<PathBuf>,
    /// Compare designs for an app (or "all")
    #[arg(long, value_name = "APP")]
    pub compare: Option<String>,
    /// Stream lengths for --compare [default: 32,64,128,256]
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    /// Unit-cost JSON [default: calibrated costs]
    #[arg(long)]
    pub costs: Option<PathBuf>,
    /// Baseline-table JSON [default: built-in table]
    #[arg(long)]
    pub baselines: Option<PathBuf>,
    /// Parallel ReRAM columns for --compare [default: 4096]
    #[arg(long)]
    pub columns: Option<usize>,
    /// Transfer latency per bit for the CMOS design [default: 0.1]
    #[arg(long)]
    pub transfer_ns: Option<f64>,
    /// Transfer energy per bit for the CMOS design [default: 0.12]
    #[arg(long)]
    pub transfer_nj: Option<f64>,
    /// Where --calibrate writes the fitted unit costs
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultStudyArgs {
    /// Apps to study [default: all]
    #[arg(long, value_delimiter = ',')]
    pub apps: Option<Vec<String>>,
    /// Stream length [default: 128]
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Fault rate; calibrated when absent
    #[arg(long)]
    pub pf: Option<f64>,
    /// Mean SC SSIM drop (points) targeted by calibration [default: 5]
    #[arg(long)]
    pub target_drop: Option<f64>,
    /// Calibration tolerance in points [default: 0.25]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Runs per pipeline [default: 1]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Runs per calibration step [default: 1]
    #[arg(long)]
    pub calibration_runs: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// opt or naive [default: opt]
    #[arg(long)]
    pub variant: Option<String>,
    /// Manifest destination [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of the result rows
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusArgs {
    /// Output directory [default: corpus]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn set_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SCREAMSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("SCREAMSIM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    set_threads()?;
    let preset = cli.config.as_deref().map(config::load).transpose()?;
    let preset = preset.as_ref();
    match cli.command {
        Command::SngSweep(a) => commands::sng_sweep(config::merge(&a, "sng-sweep", preset)?),
        Command::OpSweep(a) => commands::op_sweep(config::merge(&a, "op-sweep", preset)?),
        Command::App(a) => commands::app(&a.app, config::merge(&a.opts, "app", preset)?),
        Command::Cost(a) => commands::cost(config::merge(&a, "cost", preset)?),
        Command::FaultStudy(a) => commands::fault_study(config::merge(&a, "fault-study", preset)?),
        Command::Corpus(a) => commands::corpus(config::merge(&a, "corpus", preset)?),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<screamsim::Error>() {
            return match e {
                screamsim::Error::InvalidInput(_) | screamsim::Error::OutOfRange { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
