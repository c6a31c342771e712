use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use burnscan::breakdetect::CritvalSpec;
use burnscan::gapfill::FillMethod;
use burnscan::model::DetectorConfig;
use burnscan::pipeline::{
    cmd_assess, cmd_critvals, cmd_detect, cmd_map, cmd_simulate, AssessOptions, CritvalOptions,
    DetectOptions, MapOptions, SimulateOptions,
};
use burnscan::Error;

#[derive(Parser, Debug)]
#[command(name = "burnscan", version, about = "Trend-break detection and burn severity mapping for 16-day index stacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect trend breaks in every pixel's NDVI series.
    Detect(DetectArgs),
    /// Turn detected breaks into annual burned-area and severity maps.
    Map(MapArgs),
    /// Run a Monte Carlo grid, or regenerate critical values.
    Simulate(SimulateArgs),
    /// Overall accuracy of a burned map, whole and by data-quality stratum.
    Assess(AssessArgs),
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Bandwidth: MOSUM window and minimum segment as a fraction of n.
    #[arg(long, default_value_t = 0.15)]
    h: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "linear")]
    fill: FillMethod,
    #[arg(long, default_value_t = 2)]
    harmonics: usize,
    #[arg(long, default_value_t = 10)]
    max_breaks: usize,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `breaks.csv` from `detect`; maps are written here.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "linear")]
    fill: FillMethod,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct SimulateArgs {
    #[command(subcommand)]
    mode: Option<SimulateMode>,
    /// Grid config: path to a JSON file, or inline JSON.
    #[arg(long, required = true)]
    grid: Option<String>,
    #[arg(long, required = true)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum SimulateMode {
    /// Simulate OLS-MOSUM critical values.
    Critvals(CritvalArgs),
}

#[derive(Args, Debug)]
struct CritvalArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = CritvalSpec::default().replicates)]
    replicates: usize,
    #[arg(long, default_value_t = CritvalSpec::default().seed)]
    seed: u64,
    /// Series length the values are simulated for.
    #[arg(long, default_value_t = CritvalSpec::default().reference_length)]
    length: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct AssessArgs {
    /// Predicted burned plane (u8, non-zero = burned).
    #[arg(long)]
    pred: PathBuf,
    /// Reference burned plane (u8, non-zero = burned).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Missing-fraction plane (f32) written by `detect`.
    #[arg(long)]
    missing: PathBuf,
    /// Stratum bounds: JSON file or inline JSON.
    #[arg(long)]
    strata: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn run(cli: Cli) -> burnscan::Result<()> {
    match cli.command {
        Command::Detect(a) => {
            let config = DetectorConfig {
                bandwidth_h: a.h,
                significance_alpha: a.alpha,
                max_breaks: a.max_breaks,
                harmonic_order: a.harmonics,
                ..DetectorConfig::default()
            };
            cmd_detect(&DetectOptions {
                manifest: a.manifest,
                out_dir: a.out_dir,
                config,
                fill: a.fill,
                threads: a.threads,
            })?;
        }
        Command::Map(a) => {
            cmd_map(&MapOptions {
                manifest: a.manifest,
                out_dir: a.out_dir,
                fill: a.fill,
                threads: a.threads,
            })?;
        }
        Command::Simulate(SimulateArgs {
            mode: Some(SimulateMode::Critvals(c)),
            ..
        }) => {
            cmd_critvals(&CritvalOptions {
                spec: CritvalSpec {
                    bandwidths: c.h,
                    alphas: c.alpha,
                    reference_length: c.length,
                    replicates: c.replicates,
                    seed: c.seed,
                },
                out_dir: c.out_dir,
                threads: c.threads,
            })?;
        }
        Command::Simulate(a) => {
            cmd_simulate(&SimulateOptions {
                grid: a.grid.expect("required by clap"),
                out_dir: a.out_dir.expect("required by clap"),
                replicates: a.replicates,
                seed: a.seed,
                threads: a.threads,
            })?;
        }
        Command::Assess(a) => {
            cmd_assess(&AssessOptions {
                pred: a.pred,
                reference: a.reference,
                missing: a.missing,
                strata: a.strata,
                out_dir: a.out_dir,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("burnscan: {e}");
            match e {
                Error::Config(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
