use thiserror::Error;

use crate::grid::MomentumPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate spectrum at k = {k}: gap {gap:.3e} between bands {band} and {}", band + 1)]
    DegenerateSpectrum { k: MomentumPoint, band: usize, gap: f64 },

    /// Neighbouring states are (nearly) orthogonal; the grid must be refined.
    #[error(
        "inadmissible grid{}: link overlap {overlap:.3e} at k = {k} along direction {direction} \
         (floor {floor:.1e}); a denser discretization is required",
        time.map(|t| format!(" at t = {t}")).unwrap_or_default()
    )]
    InadmissibleGrid {
        k: MomentumPoint,
        direction: usize,
        overlap: f64,
        floor: f64,
        time: Option<f64>,
    },

    #[error("inadmissible loop resolution: link {link} has phase increment {increment:.6} (|Δ| ≥ π) or overlap {overlap:.3e}")]
    InadmissibleLoop { link: usize, increment: f64, overlap: f64 },

    #[error(
        "symmetry violation: {check} residual {residual:.3e}{}",
        k.map(|k| format!(" at k = {k}")).unwrap_or_default()
    )]
    SymmetryViolation {
        check: String,
        residual: f64,
        k: Option<MomentumPoint>,
    },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid propagator: {0}")]
    InvalidPropagator(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Attach a time stamp to an inadmissibility failure.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::InadmissibleGrid {
                k,
                direction,
                overlap,
                floor,
                time: None,
            } => Error::InadmissibleGrid {
                k,
                direction,
                overlap,
                floor,
                time: Some(t),
            },
            other => other,
        }
    }

    pub fn is_inadmissible(&self) -> bool {
        matches!(self, Error::InadmissibleGrid { .. } | Error::InadmissibleLoop { .. })
    }

    pub fn is_symmetry_violation(&self) -> bool {
        matches!(self, Error::SymmetryViolation { .. })
    }
}
