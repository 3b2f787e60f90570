use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Synthetic-lattice simulation, trace synthesis, global fitting and Creutz
/// ladder analysis. All outputs are files; phases are in radians.
#[derive(Debug, Parser)]
#[command(name = "synthlat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scattering-matrix sweep over detuning and loop phase.
    Simulate(SimulateArgs),
    /// Synthetic magnitude traces for every element and phase.
    Synth(SynthArgs),
    /// Two-stage global fit of a trace file.
    Fit(FitArgs),
    /// Bloch bands of the Creutz ladder.
    Bands(BandsArgs),
    /// Time-reversal, chiral and particle-hole deviations over the zone.
    Symmetry(BandsArgs),
    /// Position expectation of a plaquette state over time.
    Evolve(EvolveArgs),
    /// Eigenmodes of the closed-form plaquette scattering matrix.
    Plaquette(PlaquetteArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Omit the timestamp header line.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Preset {
    Full,
    Pairwise,
    Plaquette,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Comma-separated loop phases in radians.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    phases: Vec<f64>,
    /// Number of detuning points.
    #[arg(long, default_value_t = 401)]
    points: usize,
    /// Half-width of the detuning window in MHz.
    #[arg(long, default_value_t = 12.0)]
    span: f64,
    /// Phase offset of the loop link in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi_offset: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Lattice JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Gaussian magnitude noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Transmission scale factors: `device`, a number for every element, or
    /// a JSON matrix file. Defaults to `device` for four-mode lattices and 1
    /// otherwise.
    #[arg(long)]
    scale: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Lattice JSON file: topology, pumps and the default initial guess.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    /// Lattice JSON file used as the initial guess instead of --config.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Initial phase offset of the loop link in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi_offset: f64,
    /// Background traces dividing each trace with the same key.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Remove the reflection baseline slope (window from the trace file or 5).
    #[arg(long)]
    remove_slope: bool,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BandsArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    td: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tv: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    th: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
    phi: f64,
    /// Number of quasimomenta.
    #[arg(long, default_value_t = 1001)]
    k: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum StateName {
    Chi,
    A1,
    B1,
    A2,
    B2,
    ZeroLeft,
    ZeroRight,
    Upper,
    Lower,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[arg(long, value_enum)]
    state: StateName,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    tmax: f64,
    /// Number of time steps; the series has steps + 1 rows.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PlaquetteArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(synthlat::Error),
}

impl From<synthlat::Error> for CliError {
    fn from(e: synthlat::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SYNTHLAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("SYNTHLAT_THREADS must be a nonnegative integer, got {raw:?}")))?;
    if n > 0 {
        // a pool already built by an earlier call is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Synth(a) => commands::synth(a),
        Command::Fit(a) => commands::fit(a),
        Command::Bands(a) => commands::bands(a),
        Command::Symmetry(a) => commands::symmetry(a),
        Command::Evolve(a) => commands::evolve(a),
        Command::Plaquette(a) => commands::plaquette(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `synthlat --help` for usage.");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                synthlat::Error::FitNonConvergence { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn main() -> ExitCode {
    run(std::env::args_os())
}
