use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod checks;
mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(
    name = "dramakit",
    version,
    about = "Binaural rendering, metrics and generative kernel demos"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ignore unknown keys in JSON inputs instead of rejecting them.
    #[arg(long, global = true)]
    lax: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a mono WAV along a source trajectory into a binaural WAV.
    Render {
        mono: PathBuf,
        trajectory: PathBuf,
        output: PathBuf,
        /// Where to write render statistics (default: <output>.stats.json).
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        speed_of_sound: Option<f64>,
        #[arg(long)]
        head_shadow_strength: Option<f64>,
        #[arg(long)]
        reference_distance: Option<f64>,
    },
    /// IPD/ILD mean absolute error of a prediction against ground truth.
    Metrics {
        ground_truth: PathBuf,
        prediction: PathBuf,
        output: PathBuf,
        /// Ground-truth trajectory; with --pred-trajectory adds angle/distance scores.
        #[arg(long, requires = "pred_trajectory")]
        gt_trajectory: Option<PathBuf>,
        #[arg(long, requires = "gt_trajectory")]
        pred_trajectory: Option<PathBuf>,
        #[arg(long)]
        window_size: Option<usize>,
        #[arg(long)]
        hop_size: Option<usize>,
    },
    /// Per-ear radial velocity and Doppler factor at each trajectory sample.
    Doppler { trajectory: PathBuf, output: PathBuf },
    /// Split a script into single-speaker segments under a duration cap.
    Segment {
        script: PathBuf,
        output: PathBuf,
        #[arg(long)]
        max_duration: Option<f64>,
    },
    /// Run a seeded training demo and write its report.
    Demo {
        which: DemoKind,
        output: PathBuf,
        /// Override the number of training steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run an invariant suite; exits 1 if any check fails.
    Check {
        #[arg(default_value = "all")]
        suite: checks::Suite,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DemoKind {
    Flow,
    Pose,
}

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<dramakit::Error>())
        .any(dramakit::Error::is_numeric);
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = config::Config::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = commands::Context {
        cfg,
        seed,
        lax: cli.lax,
    };
    match cli.command {
        Command::Render {
            mono,
            trajectory,
            output,
            stats,
            speed_of_sound,
            head_shadow_strength,
            reference_distance,
        } => {
            let mut rc = ctx.cfg.render;
            rc.speed_of_sound = speed_of_sound.unwrap_or(rc.speed_of_sound);
            rc.head_shadow_strength = head_shadow_strength.unwrap_or(rc.head_shadow_strength);
            rc.reference_distance = reference_distance.unwrap_or(rc.reference_distance);
            let stats = stats.unwrap_or_else(|| output.with_extension("stats.json"));
            commands::render(&ctx, &rc, &mono, &trajectory, &output, &stats)?;
        }
        Command::Metrics {
            ground_truth,
            prediction,
            output,
            gt_trajectory,
            pred_trajectory,
            window_size,
            hop_size,
        } => {
            let mut dc = ctx.cfg.dsp;
            dc.window_size = window_size.unwrap_or(dc.window_size);
            dc.hop_size = hop_size.unwrap_or(dc.hop_size);
            let trajs = gt_trajectory.zip(pred_trajectory);
            commands::metrics(&ctx, &dc, &ground_truth, &prediction, trajs, &output)?;
        }
        Command::Doppler { trajectory, output } => commands::doppler(&ctx, &trajectory, &output)?,
        Command::Segment {
            script,
            output,
            max_duration,
        } => {
            let cap = max_duration.unwrap_or(ctx.cfg.segment.max_duration);
            commands::segment(&ctx, &script, &output, cap)?;
        }
        Command::Demo { which, output, steps } => match which {
            DemoKind::Flow => {
                let mut dc = ctx.cfg.demo.flow.clone();
                dc.steps = steps.unwrap_or(dc.steps);
                commands::demo_flow(&ctx, &dc, &output)?;
            }
            DemoKind::Pose => {
                let mut dc = ctx.cfg.demo.pose.clone();
                dc.steps = steps.unwrap_or(dc.steps);
                commands::demo_pose(&ctx, &dc, &output)?;
            }
        },
        Command::Check { suite } => {
            if !checks::run(suite, seed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
