use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ResultsTable};
use crate::evaluation::Metric;

/// Summary of one metric over the repetitions of a cell group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding in the sum can leave the mean a hair outside the range.
        Some(Self {
            mean: mean.clamp(min, max),
            sd,
            count: values.len(),
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(ExperimentError::Config(format!("unknown table format `{other}`"))),
        }
    }
}

fn io(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(e.to_string())
}

fn number(v: Option<f64>) -> String {
    v.map_or_else(|| "n.a.".to_string(), |v| v.to_string())
}

/// One row per record. Wall time is left out so reruns compare equal.
pub fn write_results_csv<W: Write>(table: &ResultsTable, writer: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "family",
        "method",
        "theta",
        "repetition",
        "mise",
        "mise_r",
        "pe",
        "bs",
        "hyperparameters",
        "status",
    ])
    .map_err(io)?;
    for r in table.records() {
        let hp = r
            .hyperparameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let status = r.error.as_ref().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}"));
        w.write_record([
            r.family.name().to_string(),
            r.method.name().to_string(),
            r.theta.to_string(),
            r.repetition.to_string(),
            number(r.report.mise),
            number(r.report.mise_r),
            number(r.report.pe),
            number(r.report.bs),
            hp,
            status,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Per-cell wall times, merged strata and failures.
pub fn write_run_log<W: Write>(table: &ResultsTable, mut writer: W) -> Result<(), ExperimentError> {
    for c in &table.cells {
        writeln!(
            writer,
            "cell family={} theta={} repetition={} wall_time={:.3}s",
            c.cell.family, c.cell.theta, c.cell.repetition, c.wall_time
        )
        .map_err(io)?;
        for r in &c.records {
            writeln!(writer, "  {} {:.3}s", r.method, r.wall_time).map_err(io)?;
        }
        for note in &c.notes {
            writeln!(writer, "  note: {note}").map_err(io)?;
        }
    }
    Ok(())
}

/// Methods × bias levels of mean `metric`, one block per curve family.
/// Values are rounded to three decimals; the lowest value of each column
/// is flagged, in bold for markdown and with a trailing `*` in CSV.
pub fn emit_table(table: &ResultsTable, metric: Metric, format: TableFormat) -> Result<String, ExperimentError> {
    if table.cells.is_empty() {
        return Err(ExperimentError::Config("no results to tabulate".into()));
    }
    let methods = table.methods();
    let levels = table.bias_levels();
    let mut out = String::new();
    for family in table.families() {
        let cells: Vec<Vec<Option<String>>> = methods
            .iter()
            .map(|&m| {
                levels
                    .iter()
                    .map(|&t| {
                        if !metric.applies_to(m) {
                            return None;
                        }
                        table.aggregate(family, m, t, metric).map(|a| format!("{:.3}", a.mean))
                    })
                    .collect()
            })
            .collect();
        let best: Vec<Option<f64>> = (0..levels.len())
            .map(|j| {
                cells
                    .iter()
                    .filter_map(|row| row[j].as_ref().and_then(|s| s.parse::<f64>().ok()))
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            })
            .collect();
        let render = |j: usize, cell: &Option<String>, markdown: bool| -> String {
            match cell {
                None => "n.a.".to_string(),
                Some(s) if best[j] == s.parse::<f64>().ok() => {
                    if markdown {
                        format!("**{s}**")
                    } else {
                        format!("{s}*")
                    }
                }
                Some(s) => s.clone(),
            }
        };
        let failures: Vec<String> = table
            .failures()
            .into_iter()
            .filter(|r| r.family == family)
            .map(|r| format!("{} theta={} rep={}", r.method, r.theta, r.repetition))
            .collect();
        match format {
            TableFormat::Markdown => {
                let _ = writeln!(out, "### {} on {}\n", metric.label(), family);
                let header: Vec<String> = levels.iter().map(|t| format!("θ={t}")).collect();
                let _ = writeln!(out, "| Model | {} |", header.join(" | "));
                let _ = writeln!(out, "|---|{}", "---|".repeat(levels.len()));
                for (m, row) in methods.iter().zip(&cells) {
                    let body: Vec<String> = row.iter().enumerate().map(|(j, c)| render(j, c, true)).collect();
                    let _ = writeln!(out, "| {} | {} |", m.label(), body.join(" | "));
                }
                if !failures.is_empty() {
                    let _ = writeln!(out, "\nFailed cells: {}", failures.join(", "));
                }
                out.push('\n');
            }
            TableFormat::Csv => {
                let header: Vec<String> = levels.iter().map(|t| t.to_string()).collect();
                let _ = writeln!(out, "family,model,{}", header.join(","));
                for (m, row) in methods.iter().zip(&cells) {
                    let body: Vec<String> = row.iter().enumerate().map(|(j, c)| render(j, c, false)).collect();
                    let _ = writeln!(out, "{},{},{}", family.name(), m.name(), body.join(","));
                }
                for f in failures {
                    let _ = writeln!(out, "# failed: {f}");
                }
            }
        }
    }
    Ok(out)
}
