//! `oog`: build manipulation plans from demonstrations, run them in the
//! tabletop simulator and inspect the results.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oog_core::policy::Convention;
use oog_core::sim::TaskKind;
use oog_core::tracks::CaptureMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "oog", version, about = "Object-graph manipulation plans from demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a demonstration bundle and list every violation.
    Validate { bundle: PathBuf },
    /// Build a plan from a demonstration bundle.
    Plan {
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Plan file to write.
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
    },
    /// Run a plan once in a simulated scene.
    Simulate {
        plan: PathBuf,
        scene: PathBuf,
        goal: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Observation noise, meters.
        #[arg(long)]
        noise: Option<f64>,
        /// Trace file to write.
        #[arg(long, default_value = "trace.json")]
        out: PathBuf,
    },
    /// Run a plan on randomized layouts of a task template.
    Eval {
        plan: PathBuf,
        template: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Observation noise, meters.
        #[arg(long)]
        noise: Option<f64>,
        /// Machine-readable results file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a plan's graphs, with a Graphviz rendering of each.
    Inspect {
        plan: PathBuf,
        /// Directory for `graph_<l>.dot` files instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic demonstration with its task template, a test scene
    /// and the goal.
    Synth {
        #[arg(value_parser = parse_task)]
        task: TaskKind,
        #[command(flatten)]
        common: Common,
        /// Tracking noise in the demonstration, meters.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Settings shared by the pipeline commands. Flags override `--config`.
#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Capture mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Which demonstrated keyframe anchors RGB end poses.
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// Contact threshold, meters.
    #[arg(long)]
    epsilon_contact: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Rgbd,
    Rgb,
}

impl From<ModeArg> for CaptureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rgbd => CaptureMode::Rgbd,
            ModeArg::Rgb => CaptureMode::Rgb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    Literal,
    NextKeyframe,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Literal => Convention::Literal,
            ConventionArg::NextKeyframe => Convention::NextKeyframe,
        }
    }
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}
