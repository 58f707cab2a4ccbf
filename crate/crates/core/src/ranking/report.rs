//! Text renderings of trajectory results: the FE/FT × {overall, F_m, F_r}
//! component table, a markdown report and a CSV of per-checkpoint curves.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::trajectory::{CheckpointSummary, TrajectoryReport};

const MISSING: &str = "—";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentCells {
    pub overall: Option<f64>,
    pub main: Option<f64>,
    pub residual: Option<f64>,
}

/// One checkpoint column of the component table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentColumn {
    pub epoch: u64,
    pub source_accuracy: Option<f64>,
    pub fe: ComponentCells,
    pub ft: ComponentCells,
}

impl From<&CheckpointSummary> for ComponentColumn {
    fn from(c: &CheckpointSummary) -> Self {
        Self {
            epoch: c.epoch,
            source_accuracy: Some(c.source_accuracy),
            fe: ComponentCells {
                overall: c.fe_accuracy,
                main: c.main_accuracy,
                residual: c.residual_accuracy,
            },
            // only the overall FT accuracy is ever supplied externally
            ft: ComponentCells {
                overall: c.ft_accuracy,
                main: None,
                residual: None,
            },
        }
    }
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => MISSING.to_string(),
    }
}

fn column_title(c: &ComponentColumn) -> String {
    let unit = if c.epoch == 1 { "epoch" } else { "epochs" };
    match c.source_accuracy {
        Some(sa) => format!("{} {unit} ({})", c.epoch, pct(Some(sa))),
        None => format!("{} {unit}", c.epoch),
    }
}

/// Markdown table with rows FE/FT × {overall, F_m, F_r} and one column per
/// checkpoint, titled by pre-training epoch and source accuracy.
pub fn render_component_table(columns: &[ComponentColumn]) -> String {
    let mut out = String::new();
    out.push_str("| Task | Component |");
    for c in columns {
        let _ = write!(out, " {} |", column_title(c));
    }
    out.push_str("\n| :--- | :--- |");
    for _ in columns {
        out.push_str(" ---: |");
    }
    out.push('\n');
    type Cell = fn(&ComponentColumn) -> Option<f64>;
    let rows: [(&str, &str, Cell); 6] = [
        ("FE", "overall", |c| c.fe.overall),
        ("FE", "F_m", |c| c.fe.main),
        ("FE", "F_r", |c| c.fe.residual),
        ("FT", "overall", |c| c.ft.overall),
        ("FT", "F_m", |c| c.ft.main),
        ("FT", "F_r", |c| c.ft.residual),
    ];
    for (task, comp, get) in rows {
        let _ = write!(out, "| {task} | {comp} |");
        for c in columns {
            let _ = write!(out, " {} |", pct(get(c)));
        }
        out.push('\n');
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| MISSING.to_string())
}

pub fn render_markdown(report: &TrajectoryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Trajectory report: {}\n", report.name);
    let _ = writeln!(
        out,
        "Best FE checkpoint: epoch {} (index {}, {} peak)",
        report.best_fe_epoch,
        report.best_fe_index,
        if report.interior_peak { "interior" } else { "boundary" }
    );
    if let Some(e) = report.best_ft_epoch {
        let _ = writeln!(out, "Best FT checkpoint: epoch {e}");
    }
    out.push('\n');

    out.push_str("## Checkpoints\n\n");
    out.push_str("| epoch | source | FE | F_m | F_r | k | energy | LogME | FT |\n");
    out.push_str("| ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: |\n");
    for c in &report.per_checkpoint {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            c.epoch,
            pct(Some(c.source_accuracy)),
            pct(c.fe_accuracy),
            pct(c.main_accuracy),
            pct(c.residual_accuracy),
            c.k.map(|k| k.to_string()).unwrap_or_else(|| MISSING.to_string()),
            num(c.energy_ratio),
            num(c.logme),
            pct(c.ft_accuracy),
        );
    }
    let failed: Vec<_> = report.per_checkpoint.iter().filter(|c| c.error.is_some()).collect();
    if !failed.is_empty() {
        out.push_str("\nFailed checkpoints:\n\n");
        for c in failed {
            let _ = writeln!(out, "- epoch {}: {}", c.epoch, c.error.as_deref().unwrap_or(""));
        }
    }

    out.push_str("\n## Correlations\n\n");
    out.push_str("| x | y | n | Pearson | Kendall τ |\n");
    out.push_str("| :--- | :--- | ---: | ---: | ---: |\n");
    for c in &report.correlations {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            c.x,
            c.y,
            c.count,
            num(c.pearson),
            num(c.kendall)
        );
    }

    let t = &report.component_trend;
    out.push_str("\n## Component trends\n\n");
    let _ = writeln!(
        out,
        "Kendall τ vs epoch over {} checkpoints: F_m {}, F_r {}",
        t.count,
        num(t.main_kendall_vs_epoch),
        num(t.residual_kendall_vs_epoch)
    );

    if report.per_checkpoint.len() == 2 {
        out.push_str("\n## Spectral components\n\n");
        let cols: Vec<ComponentColumn> = report.per_checkpoint.iter().map(Into::into).collect();
        out.push_str(&render_component_table(&cols));
    }
    out
}

/// One row per checkpoint; empty cells for missing values.
pub fn render_csv(report: &TrajectoryReport) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from(
        "epoch,source_accuracy,fe_accuracy,main_accuracy,residual_accuracy,k,energy_ratio,logme,ft_accuracy\n",
    );
    for c in &report.per_checkpoint {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.epoch,
            c.source_accuracy,
            opt(c.fe_accuracy),
            opt(c.main_accuracy),
            opt(c.residual_accuracy),
            c.k.map(|k| k.to_string()).unwrap_or_default(),
            opt(c.energy_ratio),
            opt(c.logme),
            opt(c.ft_accuracy),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_with_dashes() {
        let col = ComponentColumn {
            epoch: 5,
            source_accuracy: Some(0.7024),
            fe: ComponentCells {
                overall: Some(0.9647),
                main: Some(0.8824),
                residual: None,
            },
            ft: ComponentCells::default(),
        };
        let t = render_component_table(&[col]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "| Task | Component | 5 epochs (70.24%) |");
        assert_eq!(lines[2], "| FE | overall | 96.47% |");
        assert_eq!(lines[4], "| FE | F_r | — |");
        assert_eq!(lines[5], "| FT | overall | — |");
        assert_eq!(lines.len(), 8);
    }
}
