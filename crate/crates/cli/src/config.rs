//! Run configuration: a flat, sectioned key-value format.
//!
//! ```text
//! # comment
//! scenario = chern-quench
//!
//! [model]
//! m_initial = -1
//! m_final = 3
//!
//! [grid]
//! nx = 40
//! ny = 40
//!
//! time.t1 = 5        # dotted keys work outside sections too
//! ```
//!
//! A line is blank, a comment, a `[section]` header, or `key = value`.
//! Keys inside a section are prefixed with `section.`. Values are bare
//! tokens or double-quoted strings; everything after an unquoted `#` is
//! ignored. Every key may appear at most once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use topoquench_core::{QuenchKind, QuenchProtocol};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Lz,
    ChernQuench,
    BhzQuench,
    Z2Quench,
    Verify,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Lz => "lz",
            Scenario::ChernQuench => "chern-quench",
            Scenario::BhzQuench => "bhz-quench",
            Scenario::Z2Quench => "z2-quench",
            Scenario::Verify => "verify",
        }
    }

    pub fn is_lattice(&self) -> bool {
        !matches!(self, Scenario::Lz)
    }

    /// Scenarios whose index is the half-zone Z2, which needs even grids.
    fn needs_even_grid(&self) -> bool {
        matches!(self, Scenario::Z2Quench | Scenario::Verify)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lz" => Ok(Scenario::Lz),
            "chern-quench" => Ok(Scenario::ChernQuench),
            "bhz-quench" => Ok(Scenario::BhzQuench),
            "z2-quench" => Ok(Scenario::Z2Quench),
            "verify" => Ok(Scenario::Verify),
            _ => Err("expected one of lz, chern-quench, bhz-quench, z2-quench, verify".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub v: f64,
    pub g: f64,
    pub m_initial: f64,
    pub m_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParams {
    pub nl: usize,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeParams {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub samples: usize,
}

/// Tolerances applied to reported checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    /// Absolute bound on `|γ_∞ − 2π(1 − e^{−πg²/v})|`.
    pub gamma: f64,
    /// Static and quench time-reversal residuals.
    pub trs: f64,
    pub propagator: f64,
    pub spectrum: f64,
    pub eigenvector: f64,
    pub auxiliary_trs: f64,
    pub unitarity: f64,
    pub hellmann_feynman: f64,
    pub lipschitz: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        use topoquench_core::symmetry as s;
        Self {
            gamma: 1e-3 * 2.0 * std::f64::consts::PI,
            trs: s::STATIC_TRS_TOLERANCE,
            propagator: s::PROPAGATOR_TRS_TOLERANCE,
            spectrum: s::SPECTRUM_TOLERANCE,
            eigenvector: s::EIGENVECTOR_TOLERANCE,
            auxiliary_trs: s::AUXILIARY_TRS_TOLERANCE,
            unitarity: s::UNITARITY_TOLERANCE,
            hellmann_feynman: 1e-3,
            lipschitz: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: ModelParams,
    pub quench: QuenchProtocol,
    pub grid: GridParams,
    pub time: TimeParams,
    pub output_dir: PathBuf,
    pub tol: Tolerances,
}

pub const DEFAULT_DT: f64 = 1e-2;
pub const DEFAULT_NL: usize = 256;
pub const DEFAULT_N: usize = 40;
pub const DEFAULT_OUTPUT_DIR: &str = "topoquench-out";
pub const MIN_GRID: usize = 8;

const KEYS: &[&str] = &[
    "scenario",
    "model.v",
    "model.g",
    "model.m_initial",
    "model.m_final",
    "quench.kind",
    "quench.t_start",
    "quench.t_end",
    "quench.width",
    "grid.nl",
    "grid.nx",
    "grid.ny",
    "time.t0",
    "time.t1",
    "time.dt",
    "time.samples",
    "output.dir",
    "tol.gamma",
    "tol.trs",
    "tol.propagator",
    "tol.spectrum",
    "tol.eigenvector",
    "tol.auxiliary_trs",
    "tol.unitarity",
    "tol.hellmann_feynman",
    "tol.lipschitz",
];

struct Entry {
    value: String,
    line: usize,
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?;
            if !is_ident(name) || name.contains('.') {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("bad section name {name:?}"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got {body:?}"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !is_ident(key) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("bad key {key:?}"),
            });
        }
        let value = if let Some(inner) = value.strip_prefix('"') {
            inner
                .strip_suffix('"')
                .filter(|v| !v.contains('"'))
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated string".into(),
                })?
                .to_string()
        } else if value.is_empty() || value.contains(char::is_whitespace) || value.contains('"') {
            return Err(ConfigError::Syntax {
                line,
                message: format!("bad value {value:?} for {key}"),
            });
        } else {
            value.to_string()
        };
        let full = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        if !KEYS.contains(&full.as_str()) {
            return Err(ConfigError::UnknownKey { key: full, line });
        }
        if let Some(prev) = entries.get(&full) {
            return Err(ConfigError::DuplicateKey {
                key: full,
                line,
                first: prev.line,
            });
        }
        entries.insert(full, Entry { value, line });
    }
    Ok(entries)
}

struct Fields(BTreeMap<String, Entry>);

impl Fields {
    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| ConfigError::Value {
                key: key.into(),
                line: e.line,
                message: err.to_string(),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.parse::<f64>(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(ConfigError::Range {
                    key: key.into(),
                    message: format!("must be finite, got {x}"),
                });
            }
        }
        Ok(v)
    }

    fn required<T>(&self, key: &str, v: Option<T>, why: &str) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing {
            key: key.into(),
            reason: why.into(),
        })
    }
}

fn range(key: &str, ok: bool, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key: key.into(),
            message: message.into(),
        })
    }
}

/// Parse and validate a configuration, filling documented defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let f = Fields(tokenize(text)?);
    let scenario: Scenario = f.required("scenario", f.parse("scenario")?, "every config names a scenario")?;
    let lattice = scenario.is_lattice();

    let (v, g) = if lattice {
        (f.real("model.v")?.unwrap_or(1.0), f.real("model.g")?.unwrap_or(0.0))
    } else {
        (
            f.required("model.v", f.real("model.v")?, "the lz scenario needs a sweep rate")?,
            f.required("model.g", f.real("model.g")?, "the lz scenario needs a coupling")?,
        )
    };
    range("model.v", v > 0.0, format!("must be positive, got {v}"))?;
    range("model.g", g >= 0.0, format!("must be non-negative, got {g}"))?;
    let model = ModelParams {
        v,
        g,
        m_initial: f.real("model.m_initial")?.unwrap_or(-1.0),
        m_final: f.real("model.m_final")?.unwrap_or(3.0),
    };

    let grid = GridParams {
        nl: f.parse("grid.nl")?.unwrap_or(DEFAULT_NL),
        nx: f.parse("grid.nx")?.unwrap_or(DEFAULT_N),
        ny: f.parse("grid.ny")?.unwrap_or(DEFAULT_N),
    };
    for (key, n) in [("grid.nl", grid.nl), ("grid.nx", grid.nx), ("grid.ny", grid.ny)] {
        range(key, n >= MIN_GRID, format!("must be at least {MIN_GRID}, got {n}"))?;
    }
    if scenario.needs_even_grid() {
        for (key, n) in [("grid.nx", grid.nx), ("grid.ny", grid.ny)] {
            range(
                key,
                n % 2 == 0,
                format!("must be even for the half-zone Z2 index, got {n}"),
            )?;
        }
    }

    let (t0, t1) = if lattice {
        (f.real("time.t0")?.unwrap_or(0.0), f.real("time.t1")?.unwrap_or(5.0))
    } else {
        (
            f.required("time.t0", f.real("time.t0")?, "the lz scenario needs a window")?,
            f.required("time.t1", f.real("time.t1")?, "the lz scenario needs a window")?,
        )
    };
    range("time.t1", t1 > t0, format!("must exceed time.t0 = {t0}, got {t1}"))?;
    let dt = f.real("time.dt")?.unwrap_or(DEFAULT_DT);
    range("time.dt", dt > 0.0, format!("must be positive, got {dt}"))?;
    range("time.dt", dt <= t1 - t0, format!("{dt} exceeds the window length"))?;
    let samples = f.parse("time.samples")?.unwrap_or(if lattice { 11 } else { 401 });
    range(
        "time.samples",
        samples >= 2,
        format!("need at least 2 samples, got {samples}"),
    )?;
    let n_steps = ((t1 - t0) / dt).round() as usize;
    range(
        "time.samples",
        samples <= n_steps + 1,
        format!("{samples} samples exceed the {n_steps} time steps"),
    )?;
    let time = TimeParams { t0, t1, dt, samples };

    let kind: QuenchKind = f.parse("quench.kind")?.unwrap_or(QuenchKind::Sudden);
    let t_start = f.real("quench.t_start")?.unwrap_or(t0);
    let quench = match kind {
        QuenchKind::Sudden => QuenchProtocol::sudden(t_start),
        QuenchKind::LinearRamp | QuenchKind::SmoothTanh => {
            let t_end = f.required("quench.t_end", f.real("quench.t_end")?, "ramps need an end time")?;
            range(
                "quench.t_end",
                t_end > t_start,
                format!("must exceed quench.t_start = {t_start}"),
            )?;
            if kind == QuenchKind::LinearRamp {
                QuenchProtocol::linear_ramp(t_start, t_end)
            } else {
                let width = f.real("quench.width")?.unwrap_or(0.25 * (t_end - t_start));
                range("quench.width", width > 0.0, format!("must be positive, got {width}"))?;
                QuenchProtocol::smooth_tanh(t_start, t_end, width)
            }
        }
    };

    let mut tol = Tolerances::default();
    for (key, slot) in [
        ("tol.gamma", &mut tol.gamma),
        ("tol.trs", &mut tol.trs),
        ("tol.propagator", &mut tol.propagator),
        ("tol.spectrum", &mut tol.spectrum),
        ("tol.eigenvector", &mut tol.eigenvector),
        ("tol.auxiliary_trs", &mut tol.auxiliary_trs),
        ("tol.unitarity", &mut tol.unitarity),
        ("tol.hellmann_feynman", &mut tol.hellmann_feynman),
        ("tol.lipschitz", &mut tol.lipschitz),
    ] {
        if let Some(x) = f.real(key)? {
            range(key, x > 0.0, format!("must be positive, got {x}"))?;
            *slot = x;
        }
    }

    let output_dir = PathBuf::from(
        f.parse::<String>("output.dir")?
            .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.to_string()),
    );

    Ok(RunConfig {
        scenario,
        model,
        quench,
        grid,
        time,
        output_dir,
        tol,
    })
}

impl RunConfig {
    /// Time-grid steps of the evenly spaced samples, endpoints included.
    pub fn sample_steps(&self) -> Vec<usize> {
        let n_steps = ((self.time.t1 - self.time.t0) / self.time.dt).round() as usize;
        let last = self.time.samples - 1;
        let mut steps: Vec<usize> = (0..=last)
            .map(|i| ((i * n_steps) as f64 / last as f64).round() as usize)
            .collect();
        steps.dedup();
        steps
    }
}
