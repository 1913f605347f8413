//! `stvsr` — space-time video super-resolution from the command line.
//!
//! Four subcommands bind the engine together:
//!
//! * `train`     — fit a model on PNG clips (or synthetic toy clips) and
//!                 write a checkpoint plus a per-step loss log.
//! * `infer`     — turn n+1 low-resolution frames into 2n+1 frames at ×4
//!                 resolution.
//! * `eval`      — per-frame and mean PSNR/SSIM between two frame
//!                 directories.
//! * `selfcheck` — run the built-in invariant and gradient suite.
//!
//! Exit codes: 0 success, 1 usage/config/data problems, 2 training aborted
//! on a non-finite loss. Every failure prints a single `error:` line to
//! standard error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod eval;
mod frames;
mod infer;
mod selfcheck;
mod train;

/// A command failure: one printable line and the process exit code.
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    /// Configuration, data, or usage problem (exit code 1).
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { message: message.into(), code: 1 }
    }
}

#[derive(Parser)]
#[command(
    name = "stvsr",
    version,
    about = "Space-time video super-resolution: joint 4x upscaling and frame-rate doubling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a loss log
    Train(TrainArgs),
    /// Reconstruct 2n+1 high-resolution frames from n+1 input frames
    Infer(InferArgs),
    /// Compare two frame directories with PSNR and SSIM
    Eval(EvalArgs),
    /// Run the built-in invariant and gradient suite
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Plain `key = value` config file (model and optimizer settings)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Directory of clip subdirectories, each holding exactly 7 PNG frames
    #[arg(long, value_name = "DIR", conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate N synthetic toy clips instead of reading --data
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    /// Checkpoint output path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Model variant preset, overriding the config file
    #[arg(long, value_name = "a|b|c|d|e")]
    ablation: Option<char>,
    /// Loss log path (default: <out>.loss.tsv)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

#[derive(Args)]
pub struct InferArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    /// Directory with at least 2 equal-size PNG frames
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output directory for frame_000000.png, frame_000001.png, ...
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of predicted frames
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Directory of reference frames
    #[arg(long, value_name = "DIR")]
    gt: PathBuf,
    /// Score on the luma channel instead of RGB
    #[arg(long)]
    y_channel: bool,
}

#[derive(Args)]
pub struct SelfcheckArgs {
    /// Corrupt one backward rule so the matching check must fail
    /// (negative control for the suite itself).
    #[arg(long, hide = true)]
    inject_grad_fault: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; everything else is
            // a usage problem and exits 1 (clap's own default of 2 is
            // reserved here for training divergence).
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let result = match &cli.command {
        Command::Train(args) => train::run(args),
        Command::Infer(args) => infer::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Selfcheck(args) => selfcheck::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { message, code }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
