//! `emrl` — train, evaluate, resume, probe, and export experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or numerical
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use emrl_core::analysis::{
    behavior_stats, collect_probe_data, export_plot_data, linear_probe, load_trajectory_dir,
    ProbeFilter, ProbeSummary, APPROACH_LINE_X,
};
use emrl_core::env::{make_task, TaskConfig};
use emrl_core::harness::{
    build_learner, checkpoint_weights_path, evaluate_run, resume, run_experiment, trajectory_dir,
    ExperimentConfig, Manifest, ResumeOutcome,
};
use emrl_core::net::load_weights;
use emrl_core::Error;

#[derive(Parser)]
#[command(name = "emrl", version, about = "End-to-end RL engine and task simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Train {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Greedy evaluation of a finished run's checkpoint.
    Eval {
        run_dir: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        /// Evaluation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint episode to load (defaults to the latest).
        #[arg(long)]
        checkpoint: Option<usize>,
        /// Write per-episode trajectory dumps.
        #[arg(long)]
        dump: bool,
    },
    /// Continue an interrupted run from its latest checkpoint.
    Resume { run_dir: PathBuf },
    /// Fit a linear probe from hidden states to world quantities.
    Probe {
        run_dir: PathBuf,
        /// Greedy rollouts to collect probe rows from.
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Which steps enter the dataset.
        #[arg(long, value_enum, default_value_t = FilterArg::Invisible)]
        filter: FilterArg,
        /// Ridge regularization strength.
        #[arg(long, default_value_t = 1e-6)]
        ridge: f64,
        /// Checkpoint episode to load (defaults to the latest).
        #[arg(long)]
        checkpoint: Option<usize>,
    },
    /// Emit CSV learning curves, probe results, and trajectories.
    Export { run_dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Invisible,
    All,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config } => {
            let config = ExperimentConfig::load(&config)?;
            let run_dir = run_experiment(&config)?;
            println!("run complete: {}", run_dir.display());
            let manifest = Manifest::load(&run_dir)?;
            if let Some(episode) = manifest.latest_checkpoint {
                println!("latest checkpoint: episode {episode}");
            }
            Ok(())
        }
        Command::Eval {
            run_dir,
            episodes,
            seed,
            checkpoint,
            dump,
        } => {
            let stats = evaluate_run(&run_dir, episodes, seed, checkpoint, dump)?;
            println!(
                "episodes {}  success_rate {:.4}  mean_return {:.4}  mean_steps {:.2}",
                stats.episodes, stats.success_rate, stats.mean_return, stats.mean_steps
            );
            let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
            if matches!(config.task, TaskConfig::Capture(_)) && dump {
                let episode = checkpoint.or_else(|| {
                    Manifest::load(&run_dir).ok().and_then(|m| m.latest_checkpoint)
                });
                if let Some(episode) = episode {
                    let dir = trajectory_dir(&run_dir, &format!("eval_{episode:08}_s{seed}"));
                    if let Ok(trajs) = load_trajectory_dir(&dir) {
                        if let Ok(stats) = behavior_stats(&trajs, APPROACH_LINE_X) {
                            println!(
                                "waiting_y {:?}  capture_step {:?}  backward {:?}",
                                stats.mean_wait_y,
                                stats.mean_capture_step,
                                stats.backward_fraction
                            );
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Resume { run_dir } => match resume(&run_dir)? {
            ResumeOutcome::AlreadyComplete(dir) => {
                println!("run already complete, nothing to do: {}", dir.display());
                Ok(())
            }
            ResumeOutcome::Resumed(dir) => {
                println!("resumed and completed: {}", dir.display());
                Ok(())
            }
        },
        Command::Probe {
            run_dir,
            episodes,
            seed,
            filter,
            ridge,
            checkpoint,
        } => {
            let manifest = Manifest::load(&run_dir)?;
            let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
            let episode = match checkpoint {
                Some(e) => e,
                None => manifest
                    .latest_checkpoint
                    .ok_or_else(|| Error::NoData("run has no checkpoints".into()))?,
            };
            let net = load_weights(&checkpoint_weights_path(&run_dir, episode))?;
            let env = make_task(&config.task)?;
            let learner = build_learner(&config, env.as_ref())?;
            let filter = match filter {
                FilterArg::Invisible => ProbeFilter::InvisibleOnly,
                FilterArg::All => ProbeFilter::All,
            };
            let data = collect_probe_data(&net, &learner, &config.task, episodes, filter, seed)?;
            let fit = linear_probe(&data, ridge)?;

            // Permutation null: same rows, labels rotated out of register.
            let mut null_data = data.clone();
            let k = null_data.labels.len() / 2 + 1;
            null_data.labels.rotate_left(k);
            let null_fit = linear_probe(&null_data, ridge.max(1e-6))?;

            for (i, label) in fit.label_names.iter().enumerate() {
                println!(
                    "{label}: r2_train {:.4}  r2_holdout {:.4}  null {:.4}",
                    fit.r2_train[i], fit.r2_holdout[i], null_fit.r2_holdout[i]
                );
            }
            let filter_name = match filter {
                ProbeFilter::InvisibleOnly => "invisible",
                ProbeFilter::All => "all",
            };
            let summary = ProbeSummary::from_fit(
                &fit,
                null_fit.r2_holdout.clone(),
                episode,
                episodes,
                seed,
                ridge,
                filter_name,
            );
            let path = summary.save(&run_dir)?;
            println!("probe summary: {}", path.display());
            Ok(())
        }
        Command::Export { run_dir } => {
            let paths = export_plot_data(&run_dir)?;
            println!("export written to {}", paths.dir.display());
            Ok(())
        }
    }
}
