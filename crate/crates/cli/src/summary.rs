//! Run summaries and the CSV series written next to them.

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;
use topoquench_core::{Grid, InvariantSeries, MomentumPoint, SymmetryReport, WorstLink};

use crate::config::{RunConfig, Scenario};

/// Headline numbers of a run. Absent entries do not apply to the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_inf_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_within_tolerance: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern_constant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2_constant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2_spin_constant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2_spin: Option<u8>,
    /// `C↑ + C↓ = 0` at every sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_pairing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pairing_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_unitarity_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub grid: Grid,
    pub floor: f64,
    pub min_overlap: f64,
    pub worst_k: MomentumPoint,
    pub worst_direction: usize,
    pub worst_t: f64,
}

impl Admissibility {
    pub fn from_worst(grid: Grid, worst: WorstLink) -> Self {
        Self {
            grid,
            floor: topoquench_core::geometry::ADMISSIBILITY_FLOOR,
            min_overlap: worst.overlap,
            worst_k: worst.k,
            worst_direction: worst.direction,
            worst_t: worst.time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub results: Headline,
    pub checks: Vec<SymmetryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<Admissibility>,
    /// Not serialized: summaries are bit-reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunSummary {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            scenario: config.scenario,
            config: config.clone(),
            results: Headline::default(),
            checks: Vec::new(),
            admissibility: None,
            wall_clock: Duration::ZERO,
        }
    }

    pub fn failed_checks(&self) -> Vec<&SymmetryReport> {
        self.checks.iter().filter(|r| !r.pass).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Real(x) => write!(out, "{x:.16e}").unwrap(),
            Cell::Int(n) => write!(out, "{n}").unwrap(),
            Cell::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::Text(t) if t.contains([',', '"', '\n']) => write!(out, "\"{}\"", t.replace('"', "\"\"")).unwrap(),
            Cell::Text(t) => out.push_str(t),
            Cell::Empty => {}
        }
    }
}

impl From<Option<i64>> for Cell {
    fn from(v: Option<i64>) -> Self {
        v.map_or(Cell::Empty, Cell::Int)
    }
}

impl From<Option<u8>> for Cell {
    fn from(v: Option<u8>) -> Self {
        v.map_or(Cell::Empty, |x| Cell::Int(x as i64))
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

pub const LZ_HEADER: &[&str] = &["t", "re_a", "im_a", "re_b", "im_b", "gamma", "gamma_rate"];
pub const CHERN_HEADER: &[&str] = &["t", "chern", "min_overlap"];
pub const SPIN_HEADER: &[&str] = &["t", "c_up", "c_down", "z2_spin", "min_overlap"];
pub const Z2_HEADER: &[&str] = &[
    "t",
    "z2",
    "z2_spin",
    "c_up",
    "c_down",
    "pairing_residual",
    "min_overlap",
];
pub const CHECK_HEADER: &[&str] = &[
    "check",
    "max_residual",
    "tolerance",
    "pass",
    "worst_kx",
    "worst_ky",
    "worst_t",
];

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn checks(reports: &[SymmetryReport]) -> Self {
        let mut t = Table::new(CHECK_HEADER);
        for r in reports {
            let (kx, ky) = match r.worst_k {
                Some(k) if k.dims() == 1 => (Cell::Real(k.get(0)), Cell::Empty),
                Some(k) => (Cell::Real(k.kx()), Cell::Real(k.ky())),
                None => (Cell::Empty, Cell::Empty),
            };
            t.push(vec![
                Cell::Text(r.check.clone()),
                Cell::Real(r.max_residual),
                Cell::Real(r.tolerance),
                Cell::Bool(r.pass),
                kx,
                ky,
                r.worst_t.into(),
            ]);
        }
        t
    }
}

fn min_overlap_cell(w: Option<WorstLink>) -> Cell {
    w.map_or(Cell::Empty, |w| Cell::Real(w.overlap))
}

pub fn chern_table(series: &InvariantSeries) -> Table {
    let mut t = Table::new(CHERN_HEADER);
    for s in &series.samples {
        t.push(vec![Cell::Real(s.time), s.chern.into(), min_overlap_cell(s.worst_link)]);
    }
    t
}

pub fn spin_table(series: &InvariantSeries) -> Table {
    let mut t = Table::new(SPIN_HEADER);
    for s in &series.samples {
        t.push(vec![
            Cell::Real(s.time),
            s.c_up.into(),
            s.c_down.into(),
            s.z2_spin.into(),
            min_overlap_cell(s.worst_link),
        ]);
    }
    t
}

pub fn z2_table(series: &InvariantSeries) -> Table {
    let mut t = Table::new(Z2_HEADER);
    for s in &series.samples {
        t.push(vec![
            Cell::Real(s.time),
            s.z2.into(),
            s.z2_spin.into(),
            s.c_up.into(),
            s.c_down.into(),
            s.pairing_residual.into(),
            min_overlap_cell(s.worst_link),
        ]);
    }
    t
}
