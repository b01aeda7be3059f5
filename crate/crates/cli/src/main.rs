use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lyapctl::config::{InitialConditionConfig, RunConfig};
use lyapctl::pipeline::{run_pipeline, run_simulate, ExitKind, Through};

#[derive(Parser)]
#[command(
    name = "lyapctl",
    version,
    about = "Synthesize and certify optimal stabilizing feedback from Lyapunov measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: discretize, solve, certify, simulate.
    Run(Common),
    /// Build the transition matrices and the reachability report only.
    Discretize(Common),
    /// Discretize, solve and certify without simulating.
    Solve(Common),
    /// Roll out a stored policy on the original map.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Policy CSV written by `run` or `solve`.
        #[arg(long)]
        policy: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    config: PathBuf,
    /// Overrides the sampling seed (and the rollout seed, if any).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overwrite artifacts from a previous run.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
}

impl Common {
    fn load(&self) -> anyhow::Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.discretization.seed = seed;
            if let Some(sim) = cfg.simulate.as_mut() {
                if let InitialConditionConfig::SeededUniform { seed: s, .. } = &mut sim.initial_conditions {
                    *s = seed;
                }
            }
        }
        let dir = self.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
        Ok((cfg, dir))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Discretize(c) | Command::Solve(c) => c,
        Command::Simulate { common, .. } => common,
    };
    env_logger::Builder::new().filter_level(common.log_level).init();

    let (cfg, dir) = match common.load() {
        Ok(v) => v,
        Err(e) => {
            log::error!("config stage failed: {e:#}");
            return ExitCode::from(ExitKind::Config.code() as u8);
        }
    };
    let outcome = match &cli.command {
        Command::Run(_) => run_pipeline(&cfg, &dir, common.force, Through::Run).map(|s| s.exit),
        Command::Solve(_) => run_pipeline(&cfg, &dir, common.force, Through::Solve).map(|s| s.exit),
        Command::Discretize(_) => run_pipeline(&cfg, &dir, common.force, Through::Discretize).map(|s| s.exit),
        Command::Simulate { policy, .. } => run_simulate(&cfg, policy, &dir, common.force).map(|r| {
            log::info!("fraction stabilized: {:.4}", r.report.fraction_stabilized);
            ExitKind::Ok
        }),
    };
    match outcome {
        Ok(kind) => {
            if kind != ExitKind::Ok {
                log::error!("pipeline finished with {kind:?}");
            }
            ExitCode::from(kind.code() as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
