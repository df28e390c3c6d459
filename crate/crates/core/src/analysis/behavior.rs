//! Behavioral statistics over greedy capture-task trajectories: where the
//! agent waits before the object approaches, when it captures, and whether
//! it tracks the object's lateral drift during the final approach.

use std::fs;
use std::path::Path;

use crate::env::Outcome;
use crate::error::{Error, Result};
use crate::harness::{read_jsonl, TrajectoryRecord};
use crate::rl::HybridAction;

/// Steps considered "the final approach" before a capture.
const APPROACH_WINDOW: usize = 5;
/// Velocities below this are treated as standing still.
const MOTION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStats {
    pub episodes: usize,
    /// Fraction of episodes ending in a successful capture.
    pub success_rate: f64,
    /// Mean agent position over all waiting steps (before the object first
    /// crosses the approach line), pooled across episodes. None when no
    /// episode had waiting steps.
    pub mean_wait_y: Option<f64>,
    /// Mean step index of successful captures.
    pub mean_capture_step: Option<f64>,
    /// Fraction of successful episodes whose final approach shows the agent
    /// moving with the object's lateral drift (matching velocity signs on a
    /// majority of moving steps).
    pub backward_fraction: Option<f64>,
}

/// Load one trajectory dump (one JSONL record per step).
pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    read_jsonl(path)
}

/// Load every `ep_*.jsonl` dump in a directory, sorted by file name so the
/// result is deterministic.
pub fn load_trajectory_dir(dir: &Path) -> Result<Vec<Vec<TrajectoryRecord>>> {
    if !dir.is_dir() {
        return Err(Error::NoData(format!(
            "{} is not a trajectory directory",
            dir.display()
        )));
    }
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "jsonl")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ep_"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| load_trajectory(p)).collect()
}

/// Compute capture-task behavior statistics over a set of trajectories.
/// `approach_x` splits waiting from approach (see
/// [`crate::analysis::APPROACH_LINE_X`] for the default).
pub fn behavior_stats(
    trajectories: &[Vec<TrajectoryRecord>],
    approach_x: f64,
) -> Result<BehaviorStats> {
    if trajectories.is_empty() {
        return Err(Error::NoData("no trajectories to analyze".into()));
    }
    let mut successes = 0usize;
    let mut wait_sum = 0.0;
    let mut wait_steps = 0usize;
    let mut capture_step_sum = 0.0;
    let mut backward_hits = 0usize;

    for traj in trajectories {
        let outcome = traj.last().and_then(|r| r.info.outcome);
        let captured = outcome == Some(Outcome::Capture);
        if captured {
            successes += 1;
            capture_step_sum += (traj.len().saturating_sub(1)) as f64;
        }

        // Waiting phase: steps whose pre-action object position is still
        // short of the approach line.
        for record in traj {
            match (record.info.object_x, record.info.agent_y) {
                (Some(ox), Some(ay)) if ox < approach_x => {
                    wait_sum += ay;
                    wait_steps += 1;
                }
                (Some(_), Some(_)) => break,
                _ => break,
            }
        }

        if captured && is_backward_tracking(traj) {
            backward_hits += 1;
        }
    }

    let episodes = trajectories.len();
    Ok(BehaviorStats {
        episodes,
        success_rate: successes as f64 / episodes as f64,
        mean_wait_y: (wait_steps > 0).then(|| wait_sum / wait_steps as f64),
        mean_capture_step: (successes > 0).then(|| capture_step_sum / successes as f64),
        backward_fraction: (successes > 0).then(|| backward_hits as f64 / successes as f64),
    })
}

/// Over the last move steps before the capture, compare the sign of the
/// agent's per-step displacement with the object's lateral velocity. Counts
/// only steps where both actually move; a majority of matches flags the
/// episode as tracking.
fn is_backward_tracking(traj: &[TrajectoryRecord]) -> bool {
    if traj.len() < 2 {
        return false;
    }
    // The last record is the capture action itself; walk backwards over the
    // preceding move steps.
    let end = traj.len() - 1;
    let start = end.saturating_sub(APPROACH_WINDOW);
    let mut matches = 0usize;
    let mut counted = 0usize;
    for t in start..end {
        let (Some(y0), Some(y1)) = (traj[t].info.agent_y, traj[t + 1].info.agent_y) else {
            continue;
        };
        if !matches!(traj[t].action, HybridAction::Continuous(_)) {
            continue;
        }
        let Some(vy) = traj[t].info.object_vy else {
            continue;
        };
        let dy = y1 - y0;
        if dy.abs() <= MOTION_EPS || vy.abs() <= MOTION_EPS {
            continue;
        }
        counted += 1;
        if dy.signum() == vy.signum() {
            matches += 1;
        }
    }
    counted > 0 && 2 * matches >= counted
}
