mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing::error;

use crate::config::parse_grid;

/// Manhattan wireframe reconstruction: synthetic scenes, heatmap encoding,
/// vectorization, 3D lifting and evaluation.
#[derive(Debug, Parser)]
#[command(name = "wf3d", version)]
pub struct Cli {
    /// Pipeline configuration (JSON); command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log level for the stderr log stream.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: tracing::Level,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Batch {
    /// First seed; sample i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Block grid as RxC.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes and their ground-truth wireframes.
    Gen(Batch),
    /// Encode a wireframe (with vanishing points) into WFHM heatmaps.
    Encode {
        #[arg(long)]
        wireframe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Training losses between two heatmap files.
    Loss {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heatmaps to a 2.5D wireframe.
    Vectorize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Vectorizer parameters (JSON), overriding the config file.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2.5D wireframe to 3D.
    Lift {
        #[arg(long = "in")]
        input: PathBuf,
        /// Heatmaps supplying the vanishing points; otherwise the wireframe's own.
        #[arg(long)]
        heatmaps: Option<PathBuf>,
        /// Known camera (JSON); otherwise calibrated from the vanishing points.
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        lambda_r: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted wireframes against ground truth, matched by file name.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lifted wireframe to OBJ.
    ExportObj {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lifted wireframe to an SVG drawing from a chosen viewpoint.
    RenderSvg {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        azimuth: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        elevation: Option<f64>,
        #[arg(long)]
        size: Option<u32>,
    },
    /// gen, encode, vectorize, lift and eval over a batch of seeds.
    Pipeline(Batch),
}

/// Validation failure.
const EXIT_INVALID: u8 = 1;
/// Input/output failure.
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<wireframe3d::Error>() {
            return match e {
                wireframe3d::Error::Io(_) => EXIT_IO,
                _ => EXIT_INVALID,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_INVALID };
        }
    }
    EXIT_INVALID
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .json()
        .with_max_level(cli.log_level)
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!(error = format!("{e:#}"), "command failed");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
