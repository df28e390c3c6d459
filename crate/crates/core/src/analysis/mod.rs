//! Post-hoc analysis of finished runs: linear decoding probes over hidden
//! states, behavioral statistics over greedy trajectories, and CSV export
//! for plotting. Everything here is read-only over run artifacts.

mod behavior;
mod export;
mod probe;

pub use behavior::{behavior_stats, load_trajectory, load_trajectory_dir, BehaviorStats};
pub use export::{export_plot_data, fmt_g17, ExportPaths, ProbeLabelRow, ProbeSummary};
pub use probe::{collect_probe_data, linear_probe, ProbeDataset, ProbeFilter, ProbeFit};

/// Object-x coordinate past which the approach phase begins; steps before
/// the object first crosses it count as "waiting".
pub const APPROACH_LINE_X: f64 = 2.5;
