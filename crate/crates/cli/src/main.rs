//! `fisheye`: batch front end for dataset synthesis, label generation,
//! rectification and evaluation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 partial failure (some inputs of a batch failed).

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fisheye", version, about = "Fisheye distortion labels, rectification and synthetic datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a labeled dataset of central, deviated and distortion-free samples.
    Synthesize(SynthesizeArgs),
    /// Write the DVM and backward flow of a central camera.
    Labels(LabelsArgs),
    /// Rectify an image with a backward flow map.
    Rectify(RectifyArgs),
    /// Score image pairs with PSNR and SSIM, one JSON line per pair.
    Evaluate(EvaluateArgs),
    /// Render fisheye images, rectify them with their ground-truth flow and report PSNR.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Master seed; required here or in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory of source images. Procedural sources are generated when omitted.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long)]
    pub deviation_prob: Option<f64>,
    #[arg(long)]
    pub free_frac: Option<f64>,
    #[arg(long)]
    pub resolution: Option<u32>,
    /// TOML file with coefficient intervals k1..k4.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write only the manifest, without rendering samples.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    /// Coefficients k1,k2,k3,k4.
    #[arg(long, value_delimiter = ',', required = true)]
    pub params: Vec<f64>,
    /// Take the frame size from this image.
    #[arg(long, conflicts_with_all = ["resolution", "height", "width"])]
    pub image: Option<PathBuf>,
    /// Square frame side.
    #[arg(long, conflicts_with_all = ["height", "width"])]
    pub resolution: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    /// Optical center x in the distorted frame (default: geometric center).
    #[arg(long, requires = "center_y")]
    pub center_x: Option<f64>,
    #[arg(long, requires = "center_x")]
    pub center_y: Option<f64>,
    #[arg(long)]
    pub dvm: Option<PathBuf>,
    #[arg(long)]
    pub flow: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// REFERENCE,TEST[,FLOW]; FLOW supplies the validity mask under --masked.
    #[arg(long = "pair", required = true)]
    pub pairs: Vec<String>,
    /// Restrict both metrics to pixels whose flow target is in range.
    #[arg(long)]
    pub masked: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Directory of source images. Procedural sources are generated when omitted.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub resolution: u32,
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const CONFIG: u8 = 1;
    pub const DATA: u8 = 2;
    pub const PARTIAL: u8 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: Self::DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<fisheye_core::Error> for Failure {
    fn from(e: fisheye_core::Error) -> Self {
        use fisheye_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::RejectionExhausted { .. } => Failure::config(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Failure::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synthesize(a) => commands::synthesize(a),
        Command::Labels(a) => commands::labels(a),
        Command::Rectify(a) => commands::rectify(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Roundtrip(a) => commands::roundtrip(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
