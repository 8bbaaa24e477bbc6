//! Command-line front end: `train`, `eval`, `sweep`, and `baseline`
//! subcommands over the experiment harness.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmw_noma_drl::harness::{
    default_sweep_values, evaluate_checkpoint, run_baseline, run_sweep, run_training,
    ExperimentConfig, SweepParam, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "mmw-noma-drl",
    about = "mmWave-NOMA downlink simulator with DRL-based joint power allocation and hybrid beamforming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Built-in profile to start from (paper or desk).
    #[arg(long)]
    profile: Option<String>,
    /// Flat key=value config file applied on top of the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files and checkpoints.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy per seed; writes learning curves and checkpoints.
    Train(CommonArgs),
    /// Evaluate a trained checkpoint on fresh channels.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint file produced by `train` or `sweep`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train across a parameter grid and compare with the baselines.
    Sweep(CommonArgs),
    /// Evaluate the analytic baselines only (no training).
    Baseline(CommonArgs),
}

fn resolve_config(common: &CommonArgs) -> mmw_noma_drl::Result<ExperimentConfig> {
    let mut cfg = match &common.profile {
        Some(name) => ExperimentConfig::profile(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)?;
        cfg.apply_overrides(&text)?;
    }
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run() -> mmw_noma_drl::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(common) => {
            let cfg = resolve_config(&common)?;
            let outcomes = run_training(&cfg, &common.out)?;
            for o in &outcomes {
                println!(
                    "seed {}: final moving average {:.4} bits/s/Hz, wall clock {:.1}s, curve {}",
                    o.seed,
                    o.final_moving_avg,
                    o.wall_clock_secs,
                    o.curve_path.display()
                );
            }
        }
        Command::Eval { common, checkpoint } => {
            let cfg = resolve_config(&common)?;
            let report = evaluate_checkpoint(&checkpoint, &cfg, cfg.seeds[0])?;
            fs::create_dir_all(&common.out)?;
            let path = common.out.join("eval.csv");
            let mut file = BufWriter::new(fs::File::create(&path)?);
            report.write_csv(&mut file)?;
            println!(
                "mean sum-rate {:.4} ± {:.4} bits/s/Hz over {} samples",
                report.mean_sum_rate, report.stderr_sum_rate, report.n_samples
            );
            println!(
                "alpha-weighted reward {:.4} ± {:.4}, violation rate {:.4}",
                report.mean_reward, report.stderr_reward, report.violation_rate
            );
            println!("wrote {}", path.display());
        }
        Command::Sweep(common) => {
            let mut cfg = resolve_config(&common)?;
            if cfg.sweep.is_none() {
                cfg.sweep = Some(SweepSpec {
                    param: SweepParam::SnrDb,
                    values: default_sweep_values(SweepParam::SnrDb),
                });
            }
            let rows = run_sweep(&cfg, &common.out)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                common.out.join("sweep.csv").display()
            );
        }
        Command::Baseline(common) => {
            let cfg = resolve_config(&common)?;
            let rows = run_baseline(&cfg, &common.out, cfg.seeds[0])?;
            for r in &rows {
                println!(
                    "{}: mean sum-rate {:.4} ± {:.4} bits/s/Hz over {} samples",
                    r.method, r.mean_sum_rate, r.std_err, r.n_samples
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
