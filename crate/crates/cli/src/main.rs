use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use streampca_cli::spec::{ExperimentKind, ExperimentSpec, RealDataSpec};
use streampca_cli::{cmd_bias_probe, cmd_block_sweep, cmd_ou_ensemble, cmd_realdata, cmd_trajectory};

#[derive(Parser)]
#[command(name = "streampca", version, about = "Streaming PCA experiments on stationary time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the base seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated solver runs with per-iteration diagnostics.
    Trajectory(Common),
    /// Final accuracy over a grid of block sizes and base step sizes.
    Sweep(Common),
    /// Cross-replicate moments of one rescaled coordinate.
    Ou(Common),
    /// Monte Carlo conditional bias of block estimates against the closed form.
    Bias(Common),
    /// Streaming and batch principal subspaces of a recorded series.
    Realdata(Common),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (Command::Trajectory(c) | Command::Sweep(c) | Command::Ou(c) | Command::Bias(c) | Command::Realdata(c)) =
        &cli.command;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| dispatch(&cli.command))
}

fn experiment(c: &Common, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(&c.config)?;
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    spec.check(kind)?;
    Ok(spec)
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Trajectory(c) => {
            let o = cmd_trajectory(&experiment(c, ExperimentKind::Trajectory)?, &c.out)?;
            let s = &o.summary;
            println!(
                "{} replicates: {} with stages 1→2→3, {} with final tail ≤ {}",
                s.replicates, s.stages_in_order, s.converged, s.converged_threshold
            );
        }
        Command::Sweep(c) => {
            let o = cmd_block_sweep(&experiment(c, ExperimentKind::BlockSweep)?, &c.out)?;
            print!("{}", o.table_csv());
        }
        Command::Ou(c) => {
            let o = cmd_ou_ensemble(&experiment(c, ExperimentKind::OuEnsemble)?, &c.out)?;
            if let Some(last) = o.report.points.last() {
                println!(
                    "t = {:.4}: var ζ = {:.4} (O-U {:.4}), skew {:.3}, excess kurtosis {:.3}",
                    last.t,
                    last.zeta.var,
                    last.ou_var.unwrap_or(f64::NAN),
                    last.zeta.skew,
                    last.zeta.excess_kurtosis
                );
            }
        }
        Command::Bias(c) => {
            let o = cmd_bias_probe(&experiment(c, ExperimentKind::BiasProbe)?, &c.out)?;
            print!("{}", o.to_csv());
        }
        Command::Realdata(c) => {
            let mut spec = RealDataSpec::load(&c.config)?;
            if let Some(seed) = c.seed {
                spec.seed = seed;
            }
            let o = cmd_realdata(&spec, &c.out)?;
            println!("{} of {} rows kept", o.rows_kept, o.rows_read);
            for b in &o.per_h {
                println!("h = {:>3}: largest angle to batch {:.4} rad", b.h, b.angles_to_batch.last().unwrap_or(&0.0));
            }
        }
    }
    Ok(())
}
