//! `dualbeam`: design sweeps, tolerance analysis, stimulation protocols and
//! tagging statistics from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualbeam_core::Error as CoreError;

mod design_cmds;
mod output;
mod scenario;
mod signal_cmds;

/// Bad flags, malformed files or schema violations.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_NONCONVERGENCE: u8 = 4;
pub const EXIT_SAFETY: u8 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "dualbeam",
    version,
    about = "Dual-color laser diode fiber coupling and tagging toolkit"
)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo (output does not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    /// TOML scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in diode: blue-PL450B or red-HL63603TG.
    #[arg(long)]
    pub preset: Option<String>,
    /// Replaces the requirements with a single minimum coupled power.
    #[arg(long)]
    pub min_power_mw: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coupled power against pathway as CSV (pathway_mm, power_mW).
    Curve {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        start_mm: Option<f64>,
        #[arg(long)]
        end_mm: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Longest pathway meeting each requirement, as JSON.
    Pathway {
        #[command(flatten)]
        design: DesignArgs,
    },
    /// 81-corner tolerance sweep, as JSON.
    Corners {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        pathway_mm: Option<f64>,
    },
    /// Seeded tolerance Monte Carlo, as JSON.
    Montecarlo {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        pathway_mm: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Falls back to the scenario file, then DUALBEAM_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-draw CSV (index, theta_1_deg, theta_2_deg, dx_um, dy_um, power_mW).
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Illuminated-area overlap of two beam profile images.
    Overlap(signal_cmds::OverlapArgs),
    /// Stimulation pulse trains.
    Protocol {
        #[command(subcommand)]
        kind: signal_cmds::ProtocolKind,
    },
    /// Poisson tagging test of a unit against a pulse train.
    Tag(signal_cmds::TagArgs),
    /// Synthetic inhomogeneous-Poisson unit driven by a pulse train.
    Synth(signal_cmds::SynthArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::NoFeasibleDesign(_) | CoreError::Constraint { .. } => EXIT_INFEASIBLE,
                CoreError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                CoreError::Safety(_) => EXIT_SAFETY,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Curve {
            design,
            start_mm,
            end_mm,
            steps,
        } => design_cmds::curve(&design, start_mm, end_mm, steps),
        Command::Pathway { design } => design_cmds::pathway(&design),
        Command::Corners { design, pathway_mm } => design_cmds::corners(&design, pathway_mm),
        Command::Montecarlo {
            design,
            pathway_mm,
            samples,
            seed,
            samples_csv,
        } => design_cmds::montecarlo(&design, pathway_mm, samples, seed, samples_csv.as_deref()),
        Command::Overlap(args) => signal_cmds::overlap(&args),
        Command::Protocol { kind } => signal_cmds::protocol(&kind),
        Command::Tag(args) => signal_cmds::tag(&args),
        Command::Synth(args) => signal_cmds::synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
