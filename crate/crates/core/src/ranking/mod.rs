//! Correlation statistics and cross-checkpoint trajectory analysis.

mod correlation;
mod report;
mod trajectory;

pub use correlation::{kendall_tau, pearson};
pub use report::{
    render_component_table, render_csv, render_markdown, ComponentCells, ComponentColumn,
};
pub use trajectory::{
    analyze_trajectory, argmax_first, CheckpointMeasurement, CheckpointSummary, ComponentTrend,
    Correlation, TrajectoryReport,
};
