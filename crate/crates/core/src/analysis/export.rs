//! CSV export of run artifacts for offline plotting.
//!
//! Schemas (all floats printed with 17 significant digits):
//!
//! - `learning_curve.csv`: episode, return, success, steps, mean_abs_td
//! - `probe_r2.csv`: label, r2_train, r2_holdout, rows_train, rows_holdout
//! - `trajectories.csv`: episode, step, agent_y, object_x, object_y,
//!   visible, action

use std::fs;
use std::path::{Path, PathBuf};

use crate::env::Outcome;
use crate::error::{Error, Result};
use crate::harness::{
    read_jsonl, EpisodeLog, Manifest, TrajectoryRecord, EPISODES_FILE, TRAJECTORY_DIR,
};
use crate::rl::HybridAction;

use super::behavior::load_trajectory_dir;
use super::probe::ProbeFit;

/// Full double precision: 17 significant digits round-trip any f64 exactly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportPaths {
    pub dir: PathBuf,
    pub learning_curve: PathBuf,
    pub probe_r2: PathBuf,
    pub trajectories: PathBuf,
}

/// Emit the CSV bundle for a run directory into `<run>/export/`.
///
/// Empty runs produce headers-only files; a directory without a manifest is
/// rejected as missing logs.
pub fn export_plot_data(run_dir: &Path) -> Result<ExportPaths> {
    Manifest::load(run_dir)?;
    let dir = run_dir.join("export");
    fs::create_dir_all(&dir)?;

    let learning_curve = dir.join("learning_curve.csv");
    let logs: Vec<EpisodeLog> = read_jsonl(&run_dir.join(EPISODES_FILE))?;
    let mut csv = String::from("episode,return,success,steps,mean_abs_td\n");
    for log in &logs {
        let success = matches!(log.outcome, Outcome::Capture | Outcome::Goal) as u8;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            log.episode,
            fmt_g17(log.ret),
            success,
            log.steps,
            fmt_g17(log.mean_abs_td)
        ));
    }
    fs::write(&learning_curve, csv)?;

    // Probe results are optional: present only after `probe` has run.
    let probe_r2 = dir.join("probe_r2.csv");
    let mut csv = String::from("label,r2_train,r2_holdout,rows_train,rows_holdout\n");
    let probe_json = run_dir.join("probe").join("probe.json");
    if probe_json.exists() {
        let text = fs::read_to_string(&probe_json)?;
        let summary: ProbeSummary = serde_json::from_str(&text)
            .map_err(|e| Error::Integrity(format!("probe.json parse: {e}")))?;
        for row in &summary.labels {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.label,
                fmt_g17(row.r2_train),
                fmt_g17(row.r2_holdout),
                summary.rows_train,
                summary.rows_holdout
            ));
        }
    }
    fs::write(&probe_r2, csv)?;

    // One combined trajectory table across every dumped evaluation episode.
    let trajectories = dir.join("trajectories.csv");
    let mut csv = String::from("episode,step,agent_y,object_x,object_y,visible,action\n");
    let traj_root = run_dir.join(TRAJECTORY_DIR);
    if traj_root.is_dir() {
        let mut labels: Vec<_> = fs::read_dir(&traj_root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        labels.sort();
        let mut episode_counter = 0usize;
        for label_dir in labels {
            for traj in load_trajectory_dir(&label_dir)? {
                for record in &traj {
                    csv.push_str(&trajectory_row(episode_counter, record));
                }
                episode_counter += 1;
            }
        }
    }
    fs::write(&trajectories, csv)?;

    Ok(ExportPaths {
        dir,
        learning_curve,
        probe_r2,
        trajectories,
    })
}

fn trajectory_row(episode: usize, record: &TrajectoryRecord) -> String {
    let action = match &record.action {
        HybridAction::Continuous(_) => "move".to_string(),
        HybridAction::Discrete(0) => "capture".to_string(),
        HybridAction::Discrete(i) => i.to_string(),
    };
    format!(
        "{},{},{},{},{},{},{}\n",
        episode,
        record.step,
        record.info.agent_y.map(fmt_g17).unwrap_or_default(),
        record.info.object_x.map(fmt_g17).unwrap_or_default(),
        record.info.object_y.map(fmt_g17).unwrap_or_default(),
        record.info.visible.map(|v| v as u8).unwrap_or_default(),
        action
    )
}

/// Probe summary persisted by the `probe` CLI subcommand.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSummary {
    pub checkpoint_episode: usize,
    pub probe_episodes: usize,
    pub seed: u64,
    pub ridge: f64,
    pub filter: String,
    pub rows_train: usize,
    pub rows_holdout: usize,
    pub labels: Vec<ProbeLabelRow>,
    /// Held-out R^2 with labels rotated across rows — the chance floor.
    pub null_r2_holdout: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeLabelRow {
    pub label: String,
    pub r2_train: f64,
    pub r2_holdout: f64,
}

impl ProbeSummary {
    pub fn from_fit(
        fit: &ProbeFit,
        null_r2_holdout: Vec<f64>,
        checkpoint_episode: usize,
        probe_episodes: usize,
        seed: u64,
        ridge: f64,
        filter: &str,
    ) -> Self {
        ProbeSummary {
            checkpoint_episode,
            probe_episodes,
            seed,
            ridge,
            filter: filter.to_string(),
            rows_train: fit.rows_train,
            rows_holdout: fit.rows_holdout,
            labels: fit
                .label_names
                .iter()
                .zip(fit.r2_train.iter().zip(fit.r2_holdout.iter()))
                .map(|(label, (&r2_train, &r2_holdout))| ProbeLabelRow {
                    label: label.clone(),
                    r2_train,
                    r2_holdout,
                })
                .collect(),
            null_r2_holdout,
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<PathBuf> {
        let dir = run_dir.join("probe");
        fs::create_dir_all(&dir)?;
        let path = dir.join("probe.json");
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
