//! `polarct` command-line driver.
//!
//! Exit status: 0 on success, 1 on bad input or configuration, 2 on a
//! numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "polarct", version, about = "Polar/cylindrical grid tomography with on-the-fly ray tracing and MART")]
pub struct Cli {
    /// Worker threads for tracing, projection and metrics (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed recorded in every output sidecar.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a phantom field and its Cartesian companion raster.
    Phantom(PhantomArgs),
    /// Simulate projections of a field.
    Project(ProjectArgs),
    /// Reconstruct a field from projections.
    Reconstruct(ReconstructArgs),
    /// Convert a field file to one 16-bit PGM per slice.
    Map(MapArgs),
    /// Compare two rasters or fields.
    Metrics(MetricsArgs),
    /// Compare run time and stored state against the Cartesian baseline.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Image size N (even).
    #[arg(long)]
    pub n: Option<usize>,
    /// Radius of the outermost ring.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Half of the axial extent (3D only; default: the radius).
    #[arg(long)]
    pub half_height: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// shepp-logan-2d | shepp-logan-3d | raw-volume
    #[arg(long)]
    pub kind: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Custom ellipse/ellipsoid table replacing the bundled one.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Raw little-endian f32 volume `[slice][row][col]` for raw-volume.
    #[arg(long)]
    pub volume: Option<PathBuf>,
    /// Output field file.
    #[arg(long)]
    pub out: PathBuf,
    /// Cartesian companion raster (PGM); default `<out>.pgm`, slice files
    /// `<out>_sNNN.pgm` in 3D.
    #[arg(long)]
    pub companion: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Number of views over a full turn.
    #[arg(long)]
    pub views: Option<usize>,
    /// Source position `x,y[,z]` for the first view.
    #[arg(long)]
    pub source: Option<String>,
    /// Panel centre `x,y[,z]` for the first view.
    #[arg(long)]
    pub detector: Option<String>,
    /// Detector counts `U` or `U,V`.
    #[arg(long)]
    pub detectors: Option<String>,
    /// Detector pitch.
    #[arg(long)]
    pub spacing: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Input field file.
    #[arg(long)]
    pub field: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// binary | length-weighted
    #[arg(long, default_value = "binary")]
    pub model: String,
    /// Trace every panel line directly instead of mirroring one quadrant.
    #[arg(long)]
    pub no_symmetry: bool,
    /// Output projection file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Input projection file.
    #[arg(long)]
    pub projections: PathBuf,
    /// Grid to reconstruct on; defaults to the grid recorded with the
    /// projections.
    #[command(flatten)]
    pub grid: GridArgs,
    /// planar | volumetric (with --n)
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, default_value_t = 0.4)]
    pub beta: f64,
    /// Relative-change tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 30)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub f_init: f64,
    /// Computed-projection floor (default: 1e-12 x mean nonzero measurement).
    #[arg(long)]
    pub p_floor: Option<f64>,
    /// apply | skip: treatment of zero measurements.
    #[arg(long, default_value = "apply")]
    pub zero_lines: String,
    #[arg(long)]
    pub no_symmetry: bool,
    /// Output field file.
    #[arg(long)]
    pub out: PathBuf,
    /// Convergence report (key = value); default `<out>.report`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    /// Input field file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PGM; 3D fields write `<stem>_sNNN.pgm` next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Window lower bound (default: field minimum).
    #[arg(long)]
    pub window_min: Option<f64>,
    /// Window upper bound (default: field maximum).
    #[arg(long)]
    pub window_max: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Reference field or PGM.
    #[arg(long)]
    pub reference: PathBuf,
    /// Test field or PGM.
    #[arg(long)]
    pub test: PathBuf,
    /// SSIM dynamic range (default: reference max - min).
    #[arg(long)]
    pub range: Option<f64>,
    /// Also print the intensity profile of this row (first slice).
    #[arg(long)]
    pub row: Option<usize>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Image sizes, comma-separated.
    #[arg(long, default_value = "256")]
    pub sizes: String,
    /// View counts, comma-separated.
    #[arg(long, default_value = "10,50,100")]
    pub views: String,
    #[arg(long, default_value_t = 5)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.4)]
    pub beta: f64,
    /// Run both pipelines on the global thread pool.
    #[arg(long)]
    pub parallel: bool,
    /// Also time the stored-coefficient Cartesian solve.
    #[arg(long)]
    pub time_stored: bool,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = e.print();
            } else {
                let msg = e.to_string();
                eprintln!("error: {}", msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            }
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &polarct::Error) -> u8 {
    match e {
        polarct::Error::Numerical(_) => 2,
        _ => 1,
    }
}
