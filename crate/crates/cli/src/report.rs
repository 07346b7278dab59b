//! Per-cell aggregates over runs.

use std::io::Write;

use anyhow::Result;

use collusion_core::sim::RunSummary;

use crate::runner::{describe_cell, PreparedCell};

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub count: usize,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Moments> {
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
        Some(Moments {
            mean,
            sd,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub cell: usize,
    pub overrides: String,
    pub runs: usize,
    pub converged: usize,
    pub converged_at_mean: Option<f64>,
    /// Mean collusion index over all runs.
    pub delta_all: Option<Moments>,
    /// Same, restricted to runs that converged.
    pub delta_converged: Option<Moments>,
    pub nash: Vec<f64>,
    pub monopoly: Vec<f64>,
}

impl CellReport {
    pub fn new(prepared: &PreparedCell, runs: &[RunSummary<f64>]) -> Self {
        let converged_at: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.converged_at)
            .map(|t| t as f64)
            .collect();
        let deltas = |only_converged: bool| -> Vec<f64> {
            runs.iter()
                .filter(|r| !only_converged || r.converged_at.is_some())
                .filter_map(|r| r.delta_mean)
                .collect()
        };
        CellReport {
            cell: prepared.cell.index,
            overrides: describe_cell(&prepared.cell),
            runs: runs.len(),
            converged: converged_at.len(),
            converged_at_mean: Moments::of(&converged_at).map(|m| m.mean),
            delta_all: Moments::of(&deltas(false)),
            delta_converged: Moments::of(&deltas(true)),
            nash: prepared.benchmarks.nash.prices.0.clone(),
            monopoly: prepared.benchmarks.monopoly.prices.0.clone(),
        }
    }

    pub fn converged_fraction(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.converged as f64 / self.runs as f64
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn report_header(firms: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "cell",
        "overrides",
        "runs",
        "converged",
        "converged_fraction",
        "converged_at_mean",
        "delta_mean_all",
        "delta_sd_all",
        "delta_mean_converged",
        "delta_sd_converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..firms).map(|i| format!("nash_{i}")));
    h.extend((0..firms).map(|i| format!("monopoly_{i}")));
    h
}

pub fn write_report<W: Write>(out: W, firms: usize, reports: &[CellReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(report_header(firms))?;
    for r in reports {
        let mut rec = vec![
            r.cell.to_string(),
            r.overrides.clone(),
            r.runs.to_string(),
            r.converged.to_string(),
            format!("{:.16e}", r.converged_fraction()),
            opt(r.converged_at_mean),
            opt(r.delta_all.as_ref().map(|m| m.mean)),
            opt(r.delta_all.as_ref().map(|m| m.sd)),
            opt(r.delta_converged.as_ref().map(|m| m.mean)),
            opt(r.delta_converged.as_ref().map(|m| m.sd)),
        ];
        rec.extend(r.nash.iter().map(|p| format!("{p:.16e}")));
        rec.extend(r.monopoly.iter().map(|p| format!("{p:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table for the terminal.
pub fn render(reports: &[CellReport]) -> String {
    let mut s = String::new();
    let fmt = |m: &Option<Moments>| match m {
        Some(m) => format!("{:.3} ± {:.3}", m.mean, m.sd),
        None => "n/a".into(),
    };
    for r in reports {
        s += &format!(
            "cell {:>3}  [{}]\n  runs {}  converged {} ({:.0}%){}\n  Δ all runs {}  Δ converged {}\n  Nash {:?}  monopoly {:?}\n",
            r.cell,
            r.overrides,
            r.runs,
            r.converged,
            100.0 * r.converged_fraction(),
            r.converged_at_mean
                .map(|t| format!("  mean convergence stage {t:.0}"))
                .unwrap_or_default(),
            fmt(&r.delta_all),
            fmt(&r.delta_converged),
            r.nash.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>(),
            r.monopoly.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>(),
        );
    }
    s
}
