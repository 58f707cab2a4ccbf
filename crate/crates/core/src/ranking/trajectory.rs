use serde::{Deserialize, Serialize};

use super::correlation::{kendall_tau, pearson};
use crate::error::{Error, Result};
use crate::feature_store::Manifest;

/// What the per-checkpoint analysis produced. Missing fields were not
/// requested or failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeasurement {
    pub epoch: u64,
    pub fe_accuracy: Option<f64>,
    pub main_accuracy: Option<f64>,
    pub residual_accuracy: Option<f64>,
    pub k: Option<usize>,
    pub energy_ratio: Option<f64>,
    pub logme: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub epoch: u64,
    pub source_accuracy: f64,
    pub fe_accuracy: Option<f64>,
    pub main_accuracy: Option<f64>,
    pub residual_accuracy: Option<f64>,
    pub k: Option<usize>,
    pub energy_ratio: Option<f64>,
    pub logme: Option<f64>,
    pub ft_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Pearson and Kendall correlation between two per-checkpoint series,
/// over the checkpoints where both are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    pub count: usize,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrend {
    pub main_kendall_vs_epoch: Option<f64>,
    pub residual_kendall_vs_epoch: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub name: String,
    pub per_checkpoint: Vec<CheckpointSummary>,
    pub best_fe_epoch: u64,
    pub best_fe_index: usize,
    pub best_ft_epoch: Option<u64>,
    pub interior_peak: bool,
    pub correlations: Vec<Correlation>,
    pub component_trend: ComponentTrend,
}

/// Index of the maximum; ties go to the earliest position.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if *v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

fn correlate(
    rows: &[CheckpointSummary],
    x_name: &str,
    x: impl Fn(&CheckpointSummary) -> Option<f64>,
    y_name: &str,
    y: impl Fn(&CheckpointSummary) -> Option<f64>,
) -> Correlation {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((x(r)?, y(r)?)))
        .unzip();
    let defined = xs.len() >= 2;
    Correlation {
        x: x_name.to_string(),
        y: y_name.to_string(),
        count: xs.len(),
        pearson: if defined { pearson(&xs, &ys).ok() } else { None },
        kendall: if defined { kendall_tau(&xs, &ys).ok() } else { None },
    }
}

fn trend_vs_epoch(rows: &[CheckpointSummary], f: impl Fn(&CheckpointSummary) -> Option<f64>) -> Option<f64> {
    let (epochs, values): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.epoch as f64, f(r)?)))
        .unzip();
    if epochs.len() < 2 {
        return None;
    }
    kendall_tau(&epochs, &values).ok()
}

/// Joins manifest records with measurements (by epoch) and derives the
/// cross-checkpoint statistics.
pub fn analyze_trajectory(
    manifest: &Manifest,
    measurements: &[CheckpointMeasurement],
) -> Result<TrajectoryReport> {
    let mut per_checkpoint = Vec::with_capacity(manifest.checkpoints.len());
    for rec in &manifest.checkpoints {
        let m = measurements.iter().find(|m| m.epoch == rec.epoch);
        per_checkpoint.push(CheckpointSummary {
            epoch: rec.epoch,
            source_accuracy: rec.source_accuracy,
            fe_accuracy: m.and_then(|m| m.fe_accuracy),
            main_accuracy: m.and_then(|m| m.main_accuracy),
            residual_accuracy: m.and_then(|m| m.residual_accuracy),
            k: m.and_then(|m| m.k),
            energy_ratio: m.and_then(|m| m.energy_ratio),
            logme: m.and_then(|m| m.logme),
            ft_accuracy: rec.ft_accuracy,
            error: match m {
                Some(m) => m.error.clone(),
                None => Some("no measurement".into()),
            },
        });
    }

    let usable: Vec<(usize, f64)> = per_checkpoint
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.fe_accuracy.map(|a| (i, a)))
        .collect();
    if usable.len() < 2 {
        return Err(Error::invalid(format!(
            "trajectory analysis needs at least 2 checkpoints with FE accuracy, found {}",
            usable.len()
        )));
    }
    let fe: Vec<f64> = usable.iter().map(|u| u.1).collect();
    let best = argmax_first(&fe).expect("non-empty");
    let best_fe_index = usable[best].0;
    let interior_peak = best != 0 && best != usable.len() - 1;

    let ft: Vec<(u64, f64)> = per_checkpoint
        .iter()
        .filter_map(|c| c.ft_accuracy.map(|a| (c.epoch, a)))
        .collect();
    let best_ft_epoch = argmax_first(&ft.iter().map(|f| f.1).collect::<Vec<_>>()).map(|i| ft[i].0);

    let correlations = vec![
        correlate(&per_checkpoint, "logme", |c| c.logme, "fe_accuracy", |c| c.fe_accuracy),
        correlate(&per_checkpoint, "logme", |c| c.logme, "ft_accuracy", |c| c.ft_accuracy),
        correlate(
            &per_checkpoint,
            "source_accuracy",
            |c| Some(c.source_accuracy),
            "fe_accuracy",
            |c| c.fe_accuracy,
        ),
        correlate(
            &per_checkpoint,
            "source_accuracy",
            |c| Some(c.source_accuracy),
            "ft_accuracy",
            |c| c.ft_accuracy,
        ),
    ];

    let component_trend = ComponentTrend {
        main_kendall_vs_epoch: trend_vs_epoch(&per_checkpoint, |c| c.main_accuracy),
        residual_kendall_vs_epoch: trend_vs_epoch(&per_checkpoint, |c| c.residual_accuracy),
        count: per_checkpoint
            .iter()
            .filter(|c| c.main_accuracy.is_some() && c.residual_accuracy.is_some())
            .count(),
    };

    Ok(TrajectoryReport {
        name: manifest.name.clone(),
        best_fe_epoch: per_checkpoint[best_fe_index].epoch,
        best_fe_index,
        best_ft_epoch,
        interior_peak,
        per_checkpoint,
        correlations,
        component_trend,
    })
}
