//! Config-driven experiment runner.
//!
//! One run is strictly sequential and fully determined by (config, seed):
//! the master seed splits into named streams (init / exploration /
//! environment), evaluations draw from seeds derived outside those streams,
//! and checkpoints capture both weights and stream positions so interrupted
//! runs resume onto byte-identical trajectories.

mod config;
mod rundir;

pub use config::{ExperimentConfig, NetworkConfig, RecurrentInitKind, RunConfig};
pub use rundir::{
    checkpoint_state_path, checkpoint_weights_path, read_jsonl, trajectory_dir,
    trajectory_episode_path, EpisodeLog, EvalRecord, JsonlWriter, Manifest, RunState, RunStatus,
    TrajectoryRecord, CHECKPOINT_DIR, CONFIG_FILE, EPISODES_FILE, EVALS_FILE, MANIFEST_FILE,
    TRAJECTORY_DIR,
};

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{make_task, Environment, Outcome, StepInfo, TaskConfig};
use crate::error::{Error, Result};
use crate::net::{
    init_random, load_weights, save_weights, EpisodeTrace, NetworkWeights, RnnState,
};
use crate::rl::{Learner, StepValues, Transition};
use crate::rng::{derive_seed, stream_rng, stream_rng_at};

/// Greedy evaluation summary plus per-episode results.
#[derive(Debug, Clone)]
pub struct EvalStats {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub results: Vec<EvalEpisode>,
}

#[derive(Debug, Clone)]
pub struct EvalEpisode {
    pub outcome: Outcome,
    pub ret: f64,
    pub steps: usize,
    /// Diagnostics of the last step (post-action).
    pub final_info: StepInfo,
}

/// What `resume` found.
#[derive(Debug, Clone, PartialEq)]
pub enum ResumeOutcome {
    /// The run had already finished; nothing was done.
    AlreadyComplete(PathBuf),
    /// Training continued to completion.
    Resumed(PathBuf),
}

pub fn success(outcome: Outcome) -> bool {
    matches!(outcome, Outcome::Capture | Outcome::Goal)
}

/// Build the learner for a task from the experiment config.
pub fn build_learner(config: &ExperimentConfig, env: &dyn Environment) -> Result<Learner> {
    Learner::new(
        config.learner.clone(),
        env.action_spec(),
        config.network.activation_spec(),
    )
}

/// Build and initialize the network for a task from the experiment config.
pub fn build_network(
    config: &ExperimentConfig,
    env: &dyn Environment,
    learner: &Learner,
    init_rng: &mut ChaCha8Rng,
) -> Result<NetworkWeights> {
    let mut layer_sizes = Vec::with_capacity(config.network.hidden.len() + 2);
    layer_sizes.push(env.observation_size());
    layer_sizes.extend_from_slice(&config.network.hidden);
    layer_sizes.push(learner.output_size());
    let mut net = init_random(
        &layer_sizes,
        config.network.recurrent_init(),
        config.network.activation_spec(),
        config.network.init_range,
        init_rng,
    )?;
    net.set_train_bias(config.network.train_bias);
    Ok(net)
}

/// Run the full experiment described by `config`. Returns the run directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PathBuf> {
    run_experiment_until(config, None)
}

/// Like [`run_experiment`] but stopping after `stop_after` episodes without
/// marking the run complete — the way an interrupted run looks on disk.
pub fn run_experiment_until(
    config: &ExperimentConfig,
    stop_after: Option<usize>,
) -> Result<PathBuf> {
    config.validate()?;
    let run_dir = config.run.out_dir.clone();
    if run_dir.join(MANIFEST_FILE).exists() {
        return Err(Error::Config(format!(
            "{} already contains a run; use resume or point out_dir elsewhere",
            run_dir.display()
        )));
    }
    fs::create_dir_all(run_dir.join(CHECKPOINT_DIR))?;
    fs::write(run_dir.join(CONFIG_FILE), config.to_canonical_toml())?;

    let manifest = Manifest::new(config.run.seed, config.run.episodes, config.sha256());
    manifest.save(&run_dir)?;

    let mut init_rng = stream_rng(config.run.seed, "init");
    let explore_rng = stream_rng(config.run.seed, "exploration");
    let env_rng = stream_rng(config.run.seed, "environment");

    let mut env = make_task(&config.task)?;
    let learner = build_learner(config, env.as_ref())?;
    let net = build_network(config, env.as_ref(), &learner, &mut init_rng)?;

    let mut session = TrainSession {
        run_dir: run_dir.clone(),
        config,
        manifest,
        net,
        learner,
        env: env.as_mut(),
        explore_rng,
        env_rng,
    };
    session.checkpoint(0)?;
    session.train(0, stop_after)?;
    Ok(run_dir)
}

/// Continue an interrupted run from its latest checkpoint. Logs written past
/// the checkpoint are truncated first, so the finished directory is
/// byte-identical to an uninterrupted run.
pub fn resume(run_dir: &Path) -> Result<ResumeOutcome> {
    let manifest = Manifest::load(run_dir)?;
    let config = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    if config.sha256() != manifest.config_sha256 {
        return Err(Error::Integrity(
            "config.toml does not match the hash recorded in the manifest".into(),
        ));
    }
    match manifest.status {
        RunStatus::Completed => return Ok(ResumeOutcome::AlreadyComplete(run_dir.to_path_buf())),
        RunStatus::Aborted => {
            return Err(Error::Lifecycle(
                "run aborted on a numerical failure and cannot be resumed".into(),
            ))
        }
        RunStatus::Running => {}
    }
    let episode = manifest.latest_checkpoint.ok_or_else(|| {
        Error::Integrity("manifest records no checkpoint to resume from".into())
    })?;
    let net = load_weights(&checkpoint_weights_path(run_dir, episode))?;
    let state = RunState::load(&checkpoint_state_path(run_dir, episode))?;
    if state.episode != episode {
        return Err(Error::Integrity(format!(
            "checkpoint state episode {} disagrees with manifest {episode}",
            state.episode
        )));
    }

    // Drop any records past the checkpoint; they will be regenerated
    // identically.
    rundir::truncate_jsonl(&run_dir.join(EPISODES_FILE), |v| {
        v["episode"].as_u64().is_some_and(|e| (e as usize) < episode)
    })?;
    rundir::truncate_jsonl(&run_dir.join(EVALS_FILE), |v| {
        v["episode"].as_u64().is_some_and(|e| (e as usize) <= episode)
    })?;

    let mut env = make_task(&config.task)?;
    let learner = build_learner(&config, env.as_ref())?;
    let explore_rng = stream_rng_at(config.run.seed, "exploration", state.explore_word_pos);
    let env_rng = stream_rng_at(config.run.seed, "environment", state.env_word_pos);

    let mut session = TrainSession {
        run_dir: run_dir.to_path_buf(),
        config: &config,
        manifest,
        net,
        learner,
        env: env.as_mut(),
        explore_rng,
        env_rng,
    };
    session.train(episode, None)?;
    Ok(ResumeOutcome::Resumed(run_dir.to_path_buf()))
}

struct TrainSession<'a> {
    run_dir: PathBuf,
    config: &'a ExperimentConfig,
    manifest: Manifest,
    net: NetworkWeights,
    learner: Learner,
    env: &'a mut dyn Environment,
    explore_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
}

impl TrainSession<'_> {
    fn train(&mut self, start_episode: usize, stop_after: Option<usize>) -> Result<()> {
        let total = self.config.run.episodes;
        for episode in start_episode..total {
            if stop_after.is_some_and(|s| episode >= s) {
                // Leave the run on disk exactly as an interruption would.
                return Ok(());
            }
            let log = match self.run_training_episode(episode) {
                Ok(log) => log,
                // Numerical blow-ups abort with a diagnostic checkpoint;
                // anything else propagates as-is.
                Err(Error::NonFinite(_)) => return self.abort(episode),
                Err(e) => return Err(e),
            };
            if self.net.check_finite().is_err() || !log.ret.is_finite() {
                return self.abort(episode);
            }
            let mut writer = JsonlWriter::append(&self.run_dir.join(EPISODES_FILE))?;
            writer.write(&log)?;

            let boundary = episode + 1;
            if boundary % self.config.run.eval_every == 0 || boundary == total {
                self.evaluate_and_checkpoint(boundary, boundary == total)?;
            }
        }
        self.manifest.status = RunStatus::Completed;
        self.manifest.touch();
        self.manifest.save(&self.run_dir)?;
        Ok(())
    }

    fn abort(&mut self, episode: usize) -> Result<()> {
        let diag = self
            .run_dir
            .join(CHECKPOINT_DIR)
            .join(format!("abort_{episode:08}.weights"));
        let _ = save_weights(&self.net, &diag);
        self.manifest.status = RunStatus::Aborted;
        self.manifest.touch();
        let _ = self.manifest.save(&self.run_dir);
        Err(Error::NonFinite(format!(
            "non-finite values at episode {episode}; diagnostic checkpoint at {}",
            diag.display()
        )))
    }

    fn evaluate_and_checkpoint(&mut self, boundary: usize, is_final: bool) -> Result<()> {
        let eval_episodes = if is_final {
            self.config
                .run
                .final_eval_episodes
                .unwrap_or(self.config.run.eval_episodes)
        } else {
            self.config.run.eval_episodes
        };
        let eval_seed = derive_seed(self.config.run.seed, "eval", boundary as u64);
        let traj_dir = (is_final && self.config.run.dump_trajectories)
            .then(|| trajectory_dir(&self.run_dir, "final"));
        let stats = evaluate(
            &self.net,
            &self.learner,
            &self.config.task,
            eval_episodes,
            eval_seed,
            traj_dir.as_deref(),
        )?;
        let mut writer = JsonlWriter::append(&self.run_dir.join(EVALS_FILE))?;
        writer.write(&EvalRecord {
            episode: boundary,
            episodes: stats.episodes,
            success_rate: stats.success_rate,
            mean_return: stats.mean_return,
            mean_steps: stats.mean_steps,
            seed: eval_seed,
        })?;
        self.checkpoint(boundary)
    }

    fn checkpoint(&mut self, episode: usize) -> Result<()> {
        save_weights(&self.net, &checkpoint_weights_path(&self.run_dir, episode))?;
        RunState {
            episode,
            explore_word_pos: self.explore_rng.get_word_pos(),
            env_word_pos: self.env_rng.get_word_pos(),
        }
        .save(&checkpoint_state_path(&self.run_dir, episode))?;
        self.manifest.latest_checkpoint = Some(episode);
        self.manifest.touch();
        self.manifest.save(&self.run_dir)
    }

    /// One on-policy training episode: act, build the masked training
    /// signal per step, update online (feedforward) or by one BPTT step at
    /// episode end (recurrent).
    fn run_training_episode(&mut self, episode: usize) -> Result<EpisodeLog> {
        let env_seed: u64 = self.env_rng.random();
        let reset = self.env.reset(env_seed)?;
        let mut obs = reset.observation;
        let mut state = self
            .net
            .is_recurrent()
            .then(|| RnnState::zeros(self.net.hidden_size()));
        let mut trace = EpisodeTrace::new();
        let mut ret = 0.0;
        let mut sum_abs_td = 0.0;
        let mut steps = 0usize;
        let outcome;

        loop {
            let (next_state, outputs) = match &state {
                Some(s) => {
                    let (h, o) = self.net.rnn_step(s, &obs)?;
                    (Some(h), o)
                }
                None => (None, self.net.forward_layered(&obs)?),
            };
            let decision = self.learner.decide(&outputs, episode, &mut self.explore_rng)?;
            let stepped = self.env.step(&decision.action)?;

            // Bootstrap values at the successor observation, under the
            // current weights. Recurrent networks peek one step ahead from
            // the new hidden state; the real transition repeats the same
            // computation next iteration.
            let next_outputs = if stepped.terminated {
                None
            } else {
                Some(match &next_state {
                    Some(h) => self.net.rnn_step(h, &stepped.observation)?.1,
                    None => self.net.forward_layered(&stepped.observation)?,
                })
            };
            let transition = Transition {
                observation: obs,
                action: decision.action,
                applied_noise: decision.applied_noise,
                reward: stepped.reward,
                next_observation: stepped.observation.clone(),
                terminal: stepped.terminated,
            };
            let delta = self.learner.learn_step(
                &mut self.net,
                Some(&mut trace),
                &transition,
                StepValues {
                    hidden_before: state.as_ref(),
                    outputs: &outputs,
                    next_outputs: next_outputs.as_deref(),
                },
            )?;

            ret += stepped.reward;
            sum_abs_td += delta.abs();
            steps += 1;
            obs = stepped.observation;
            state = next_state;
            if stepped.terminated || stepped.truncated {
                outcome = stepped.info.outcome.unwrap_or(Outcome::Timeout);
                break;
            }
        }
        self.learner.finish_episode(&mut self.net, &trace)?;

        Ok(EpisodeLog {
            episode,
            ret,
            outcome,
            steps,
            mean_abs_td: if steps > 0 {
                sum_abs_td / steps as f64
            } else {
                0.0
            },
        })
    }
}

/// Greedy (noise-free, epsilon = 0) evaluation of a network on a task.
/// Never mutates weights or training streams; all randomness comes from
/// `seed`. When `traj_dir` is given, each episode's rollout is dumped as a
/// line-delimited trajectory file.
pub fn evaluate(
    net: &NetworkWeights,
    learner: &Learner,
    task: &TaskConfig,
    episodes: usize,
    seed: u64,
    traj_dir: Option<&Path>,
) -> Result<EvalStats> {
    let mut env = make_task(task)?;
    if env.observation_size() != net.input_size() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} inputs but the task produces {}",
            net.input_size(),
            env.observation_size()
        )));
    }
    if learner.output_size() != net.output_size() {
        return Err(Error::Shape(format!(
            "checkpoint has {} outputs but the learner expects {}",
            net.output_size(),
            learner.output_size()
        )));
    }
    if let Some(dir) = traj_dir {
        fs::create_dir_all(dir)?;
    }
    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(episodes);
    for index in 0..episodes {
        let env_seed: u64 = eval_rng.random();
        let reset = env.reset(env_seed)?;
        let mut obs = reset.observation;
        let mut prev_info = reset.info;
        let mut state = net.is_recurrent().then(|| RnnState::zeros(net.hidden_size()));
        let mut records = Vec::new();
        let mut ret = 0.0;
        let mut steps = 0usize;
        let (outcome, final_info) = loop {
            let (next_state, outputs) = match &state {
                Some(s) => {
                    let (h, o) = net.rnn_step(s, &obs)?;
                    (Some(h), o)
                }
                None => (None, net.forward_layered(&obs)?),
            };
            let decision = learner.decide_greedy(&outputs)?;
            let stepped = env.step(&decision.action)?;
            if traj_dir.is_some() {
                // Record the pre-action world state together with the action
                // taken in it; episode outcomes ride on the final record.
                let mut info = prev_info.clone();
                info.outcome = stepped.info.outcome;
                records.push(TrajectoryRecord {
                    step: steps,
                    action: decision.action.clone(),
                    reward: stepped.reward,
                    info,
                });
            }
            ret += stepped.reward;
            steps += 1;
            obs = stepped.observation;
            prev_info = stepped.info.clone();
            state = next_state;
            if stepped.terminated || stepped.truncated {
                break (
                    stepped.info.outcome.unwrap_or(Outcome::Timeout),
                    stepped.info,
                );
            }
        };
        if let Some(dir) = traj_dir {
            let mut writer = JsonlWriter::append(&trajectory_episode_path(dir, index))?;
            for record in &records {
                writer.write(record)?;
            }
        }
        results.push(EvalEpisode {
            outcome,
            ret,
            steps,
            final_info,
        });
    }
    let n = results.len().max(1) as f64;
    Ok(EvalStats {
        episodes: results.len(),
        success_rate: results.iter().filter(|r| success(r.outcome)).count() as f64 / n,
        mean_return: results.iter().map(|r| r.ret).sum::<f64>() / n,
        mean_steps: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
        results,
    })
}

/// Evaluate a finished run from its latest (or a specific) checkpoint.
pub fn evaluate_run(
    run_dir: &Path,
    episodes: usize,
    seed: u64,
    checkpoint: Option<usize>,
    dump_trajectories: bool,
) -> Result<EvalStats> {
    let manifest = Manifest::load(run_dir)?;
    let config = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    let episode = match checkpoint {
        Some(e) => e,
        None => manifest
            .latest_checkpoint
            .ok_or_else(|| Error::NoData("run has no checkpoints".into()))?,
    };
    let net = load_weights(&checkpoint_weights_path(run_dir, episode))?;
    let env = make_task(&config.task)?;
    let learner = build_learner(&config, env.as_ref())?;
    let traj_dir = dump_trajectories
        .then(|| trajectory_dir(run_dir, &format!("eval_{episode:08}_s{seed}")));
    evaluate(
        &net,
        &learner,
        &config.task,
        episodes,
        seed,
        traj_dir.as_deref(),
    )
}
