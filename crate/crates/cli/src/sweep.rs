//! Refinement sweeps over the momentum grid or the time step.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use topoquench_core::Error as CoreError;

use crate::config::{RunConfig, Scenario, MIN_GRID};
use crate::error::RunError;
use crate::run::{self, RunOutput};
use crate::summary::{Cell, RunSummary, Table};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_HEADER: &[&str] = &[
    "value",
    "exit_code",
    "constant",
    "min_overlap",
    "gamma_inf",
    "gamma_inf_error",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Grid,
    Dt,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grid" => Ok(Axis::Grid),
            "dt" => Ok(Axis::Dt),
            other => Err(format!("unknown axis {other:?} (expected grid or dt)")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Grid => "grid",
            Axis::Dt => "dt",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub exit_code: i32,
    /// The scenario's index series was constant and admissible.
    pub constant: Option<bool>,
    pub min_overlap: Option<f64>,
    pub gamma_inf: Option<f64>,
    pub gamma_inf_error: Option<f64>,
    pub error: Option<String>,
    pub summary: Option<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    /// Smallest grid size whose run produced a constant, admissible series.
    pub n_star: Option<usize>,
    /// Self-convergence orders of γ_∞ from three consecutive time steps,
    /// `log(d_i / d_{i+1}) / log(dt_i / dt_{i+1})` with `d_i = γ(dt_i) − γ(dt_{i+1})`.
    /// Exact for geometric step sequences; the analytic error also carries
    /// the finite-window bias and does not resolve the order.
    pub observed_orders: Vec<f64>,
}

impl SweepReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(SWEEP_HEADER);
        for e in &self.entries {
            t.push(vec![
                Cell::Real(e.value),
                Cell::Int(e.exit_code as i64),
                e.constant.map_or(Cell::Empty, Cell::Bool),
                e.min_overlap.into(),
                e.gamma_inf.into(),
                e.gamma_inf_error.into(),
                e.error.clone().map_or(Cell::Empty, Cell::Text),
            ]);
        }
        t
    }
}

/// Parse a comma-separated value list and check it is strictly monotone.
pub fn parse_values(axis: Axis, text: &str) -> Result<Vec<f64>, RunError> {
    let values = text
        .split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| RunError::Usage(format!("bad sweep value {v:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(RunError::Usage("empty sweep".into()));
    }
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(RunError::Usage("sweep values must be strictly monotone".into()));
    }
    for &v in &values {
        match axis {
            Axis::Grid if v.fract() != 0.0 || v < MIN_GRID as f64 => {
                return Err(RunError::Usage(format!(
                    "grid sizes must be integers >= {MIN_GRID}, got {v}"
                )));
            }
            Axis::Dt if v <= 0.0 => return Err(RunError::Usage(format!("time steps must be positive, got {v}"))),
            _ => {}
        }
    }
    Ok(values)
}

fn configure(base: &RunConfig, axis: Axis, value: f64) -> Result<RunConfig, RunError> {
    let mut c = base.clone();
    match axis {
        Axis::Grid => {
            let n = value as usize;
            if c.scenario == Scenario::Lz {
                c.grid.nl = n;
            } else {
                if matches!(c.scenario, Scenario::Z2Quench | Scenario::Verify) && !n.is_multiple_of(2) {
                    return Err(RunError::Usage(format!("half-zone Z2 needs even grids, got {n}")));
                }
                c.grid.nx = n;
                c.grid.ny = n;
            }
        }
        Axis::Dt => {
            if value > c.time.t1 - c.time.t0 {
                return Err(RunError::Usage(format!("dt = {value} exceeds the window")));
            }
            let n_steps = ((c.time.t1 - c.time.t0) / value).round() as usize;
            if c.time.samples > n_steps + 1 {
                return Err(RunError::Usage(format!("dt = {value} leaves fewer steps than samples")));
            }
            c.time.dt = value;
        }
    }
    c.output_dir = base.output_dir.join(format!("{axis}-{value}"));
    Ok(c)
}

fn constant_flag(summary: &RunSummary) -> Option<bool> {
    let r = &summary.results;
    match summary.scenario {
        Scenario::ChernQuench => r.chern_constant,
        Scenario::BhzQuench => r.z2_spin_constant,
        Scenario::Z2Quench => r.z2_constant,
        _ => None,
    }
}

fn entry(value: f64, result: Result<RunOutput, RunError>) -> SweepEntry {
    match result {
        Ok(out) => SweepEntry {
            value,
            exit_code: 0,
            constant: constant_flag(&out.summary),
            min_overlap: out.summary.admissibility.as_ref().map(|a| a.min_overlap),
            gamma_inf: out.summary.results.gamma_inf,
            gamma_inf_error: out.summary.results.gamma_inf_error,
            error: None,
            summary: Some(out.summary),
        },
        Err(e) => {
            let min_overlap = match &e {
                RunError::Core(CoreError::InadmissibleGrid { overlap, .. }) => Some(*overlap),
                RunError::NotConstant { worst, .. } => Some(worst.overlap),
                _ => e
                    .summary()
                    .and_then(|s| s.admissibility.as_ref().map(|a| a.min_overlap)),
            };
            SweepEntry {
                value,
                exit_code: e.exit_code(),
                constant: match &e {
                    RunError::NotConstant { .. } => Some(false),
                    RunError::Core(c) if c.is_inadmissible() => Some(false),
                    _ => None,
                },
                min_overlap,
                gamma_inf: None,
                gamma_inf_error: None,
                error: Some(e.to_string()),
                summary: e.summary().cloned(),
            }
        }
    }
}

/// Run `base` once per value. Per-run failures are recorded and the sweep
/// continues; each run writes into `<output.dir>/<axis>-<value>/`.
pub fn sweep(base: &RunConfig, axis: Axis, values: &[f64]) -> Result<SweepReport, RunError> {
    let mut entries = Vec::with_capacity(values.len());
    for &value in values {
        let result = configure(base, axis, value).and_then(|c| run::run(&c));
        entries.push(entry(value, result));
    }
    let n_star = match axis {
        Axis::Grid => entries
            .iter()
            .filter(|e| e.exit_code == 0 && e.constant == Some(true))
            .map(|e| e.value as usize)
            .min(),
        Axis::Dt => None,
    };
    let observed_orders = match axis {
        Axis::Dt => entries
            .windows(3)
            .filter_map(|w| {
                let (a, b, c) = (w[0].gamma_inf?, w[1].gamma_inf?, w[2].gamma_inf?);
                Some(((a - b) / (b - c)).abs().ln() / (w[0].value / w[1].value).ln())
            })
            .collect(),
        Axis::Grid => Vec::new(),
    };
    Ok(SweepReport {
        axis,
        values: values.to_vec(),
        entries,
        n_star,
        observed_orders,
    })
}

/// Write `sweep.csv` and `sweep.json` into the base output directory.
pub fn emit(report: &SweepReport, dir: &Path) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Write { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join(SWEEP_CSV);
    std::fs::write(&csv, report.table().to_csv()).map_err(io(&csv))?;
    let json = dir.join(SWEEP_JSON);
    let mut text = serde_json::to_string_pretty(report).expect("sweep serializes");
    text.push('\n');
    std::fs::write(&json, text).map_err(io(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_parse_and_order() {
        assert_eq!(parse_values(Axis::Grid, "12, 24,48").unwrap(), vec![12.0, 24.0, 48.0]);
        assert_eq!(
            parse_values(Axis::Dt, "4e-2,2e-2,1e-2").unwrap(),
            vec![0.04, 0.02, 0.01]
        );
        assert!(parse_values(Axis::Grid, "12,12").is_err());
        assert!(parse_values(Axis::Grid, "12,48,24").is_err());
        assert!(parse_values(Axis::Grid, "4").is_err());
        assert!(parse_values(Axis::Grid, "12.5").is_err());
        assert!(parse_values(Axis::Dt, "0").is_err());
        assert!(parse_values(Axis::Dt, "x").is_err());
    }
}
