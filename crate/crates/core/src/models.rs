//! Hamiltonian zoo and quench protocols.
//!
//! Every model maps a momentum point and a time to a Hermitian matrix and
//! supplies analytic parameter derivatives `∂H/∂k_μ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MomentumPoint;
use crate::linalg::{self, block_diag, conj, pauli, CMatrix};

/// Symmetries a model declares about itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SymmetryTags {
    /// `u_T H*(k) u_T† = H(-k)`.
    pub trs_even: bool,
    /// `u_T H*(k, t) u_T† = -H(-k, t)`.
    pub trs_odd: bool,
    /// Block-diagonal in a two-valued spin index (spin outermost).
    pub block_diagonal_spin: bool,
}

/// A momentum-space Bloch Hamiltonian `H(k, t)`.
///
/// Implementations must be pure: evaluation has no side effects and may be
/// called concurrently from any thread.
pub trait BlochModel: Send + Sync + fmt::Debug {
    /// Matrix size.
    fn dimension(&self) -> usize;

    /// 1 for loop models, 2 for lattice models on the torus.
    fn spatial_dims(&self) -> usize;

    fn evaluate(&self, k: MomentumPoint, t: f64) -> CMatrix;

    /// Analytic `∂H/∂k_direction` at `(k, t)`.
    fn gradient(&self, k: MomentumPoint, t: f64, direction: usize) -> CMatrix;

    fn symmetry_tags(&self) -> SymmetryTags {
        SymmetryTags::default()
    }

    /// `(h0, hx, hy, hz)` of a 2×2 model `h0 + h·σ`, when available without
    /// building the matrix.
    fn pauli_vector(&self, _k: MomentumPoint, _t: f64) -> Option<[f64; 4]> {
        None
    }
}

pub type ModelRef = Arc<dyn BlochModel>;

fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")))
    }
}

/// Antiunitary time-reversal operator `T = u_T 𝒦`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsOperator {
    u: CMatrix,
}

impl TrsOperator {
    pub fn new(u: CMatrix) -> Result<Self> {
        Self::within(u, 1e-12)
    }

    pub(crate) fn within(u: CMatrix, tol: f64) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::InvalidParameter("u_T must be square".into()));
        }
        let r = linalg::unitarity_residual(&u);
        if !(r < tol) {
            return Err(Error::InvalidParameter(format!(
                "u_T is not unitary (residual {r:.3e})"
            )));
        }
        Ok(Self { u })
    }

    /// Spinless time reversal, `u_T = 1`.
    pub fn spinless(dimension: usize) -> Self {
        Self {
            u: linalg::identity(dimension),
        }
    }

    /// `u_T = iσ_y ⊗ 1_orbitals` with spin as the outer index.
    pub fn spinful(orbitals: usize) -> Self {
        let isy = linalg::sigma_y().map(|z| z * linalg::I);
        Self {
            u: linalg::kron(&isy, &linalg::identity(orbitals)),
        }
    }

    pub fn unitary_part(&self) -> &CMatrix {
        &self.u
    }

    pub fn dimension(&self) -> usize {
        self.u.nrows()
    }

    /// `T H T⁻¹ = u_T H* u_T†`.
    pub fn conjugate(&self, h: &CMatrix) -> CMatrix {
        &self.u * conj(h) * self.u.adjoint()
    }

    /// `T ψ = u_T ψ*`, column by column.
    pub fn apply(&self, states: &CMatrix) -> CMatrix {
        &self.u * conj(states)
    }

    /// `u_T u_T*`; equals `-1` for Kramers (fermionic) time reversal.
    pub fn square(&self) -> CMatrix {
        &self.u * conj(&self.u)
    }
}

/// `H = v t σz + g (σx cos λ − σy sin λ)` on the loop `λ ∈ [−π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzLoop {
    pub v: f64,
    pub g: f64,
}

pub fn build_lz_parameterized(v: f64, g: f64) -> Result<LzLoop> {
    require_finite("v", v)?;
    require_finite("g", g)?;
    if v <= 0.0 {
        return Err(Error::InvalidParameter(format!("sweep rate v must be > 0, got {v}")));
    }
    if g < 0.0 {
        return Err(Error::InvalidParameter(format!("coupling g must be >= 0, got {g}")));
    }
    Ok(LzLoop { v, g })
}

impl BlochModel for LzLoop {
    fn dimension(&self) -> usize {
        2
    }

    fn spatial_dims(&self) -> usize {
        1
    }

    fn evaluate(&self, k: MomentumPoint, t: f64) -> CMatrix {
        let [h0, hx, hy, hz] = self.pauli_vector(k, t).expect("2×2");
        pauli(h0, hx, hy, hz)
    }

    fn pauli_vector(&self, k: MomentumPoint, t: f64) -> Option<[f64; 4]> {
        let (s, c) = k.get(0).sin_cos();
        Some([0.0, self.g * c, -self.g * s, self.v * t])
    }

    fn gradient(&self, k: MomentumPoint, _t: f64, direction: usize) -> CMatrix {
        assert_eq!(direction, 0, "loop model has a single direction");
        let (s, c) = k.get(0).sin_cos();
        pauli(0.0, -self.g * s, -self.g * c, 0.0)
    }
}

/// Two-band lattice model `sin kx σx + sin ky σy + (m + cos kx + cos ky) σz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBandChern {
    pub m: f64,
}

pub fn build_two_band_chern(m: f64) -> Result<TwoBandChern> {
    require_finite("m", m)?;
    Ok(TwoBandChern { m })
}

impl TwoBandChern {
    /// The d-vector `(dx, dy, dz)` at `k`.
    pub fn d_vector(&self, k: MomentumPoint) -> [f64; 3] {
        let (sx, cx) = k.kx().sin_cos();
        let (sy, cy) = k.ky().sin_cos();
        [sx, sy, self.m + cx + cy]
    }
}

impl BlochModel for TwoBandChern {
    fn dimension(&self) -> usize {
        2
    }

    fn spatial_dims(&self) -> usize {
        2
    }

    fn evaluate(&self, k: MomentumPoint, _t: f64) -> CMatrix {
        let [dx, dy, dz] = self.d_vector(k);
        pauli(0.0, dx, dy, dz)
    }

    fn pauli_vector(&self, k: MomentumPoint, _t: f64) -> Option<[f64; 4]> {
        let [dx, dy, dz] = self.d_vector(k);
        Some([0.0, dx, dy, dz])
    }

    fn gradient(&self, k: MomentumPoint, _t: f64, direction: usize) -> CMatrix {
        match direction {
            0 => pauli(0.0, k.kx().cos(), 0.0, -k.kx().sin()),
            1 => pauli(0.0, 0.0, k.ky().cos(), -k.ky().sin()),
            _ => panic!("direction {direction} out of range"),
        }
    }
}

/// Four-band model `diag(h↑(k), h↑*(−k))` built on [`TwoBandChern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bhz {
    pub up: TwoBandChern,
}

pub fn build_bhz(m: f64) -> Result<Bhz> {
    Ok(Bhz {
        up: build_two_band_chern(m)?,
    })
}

impl Bhz {
    /// The time-reversal operator the construction respects.
    pub fn trs(&self) -> TrsOperator {
        TrsOperator::spinful(2)
    }
}

impl BlochModel for Bhz {
    fn dimension(&self) -> usize {
        4
    }

    fn spatial_dims(&self) -> usize {
        2
    }

    fn evaluate(&self, k: MomentumPoint, t: f64) -> CMatrix {
        let up = self.up.evaluate(k, t);
        let down = conj(&self.up.evaluate(k.neg(), t));
        block_diag(&up, &down)
    }

    fn gradient(&self, k: MomentumPoint, t: f64, direction: usize) -> CMatrix {
        let up = self.up.gradient(k, t, direction);
        // ∂_k [h*(−k)] = −(∂h)*(−k)
        let down = -conj(&self.up.gradient(k.neg(), t, direction));
        block_diag(&up, &down)
    }

    fn symmetry_tags(&self) -> SymmetryTags {
        SymmetryTags {
            trs_even: true,
            trs_odd: false,
            block_diagonal_spin: true,
        }
    }
}

/// `H ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroModel {
    pub dimension: usize,
    pub spatial_dims: usize,
}

impl BlochModel for ZeroModel {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn spatial_dims(&self) -> usize {
        self.spatial_dims
    }

    fn evaluate(&self, _k: MomentumPoint, _t: f64) -> CMatrix {
        linalg::zeros(self.dimension, self.dimension)
    }

    fn gradient(&self, _k: MomentumPoint, _t: f64, _direction: usize) -> CMatrix {
        linalg::zeros(self.dimension, self.dimension)
    }

    fn symmetry_tags(&self) -> SymmetryTags {
        SymmetryTags {
            trs_even: true,
            trs_odd: true,
            block_diagonal_spin: self.dimension.is_multiple_of(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuenchKind {
    Sudden,
    LinearRamp,
    SmoothTanh,
}

impl std::str::FromStr for QuenchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sudden" => Ok(QuenchKind::Sudden),
            "linear_ramp" => Ok(QuenchKind::LinearRamp),
            "smooth_tanh" => Ok(QuenchKind::SmoothTanh),
            other => Err(Error::InvalidParameter(format!(
                "unknown quench kind {other:?} (expected sudden, linear_ramp or smooth_tanh)"
            ))),
        }
    }
}

/// Switching schedule `s(t) ∈ [0, 1]` from the initial to the final Hamiltonian.
///
/// * `Sudden`: `s = 0` for `t ≤ t_start`, `1` afterwards.
/// * `LinearRamp`: linear on `[t_start, t_end]`.
/// * `SmoothTanh`: a tanh step of width `width` centred on the middle of
///   `[t_start, t_end]`, affinely rescaled so that it is exactly 0 at
///   `t_start` and exactly 1 at `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub kind: QuenchKind,
    pub t_start: f64,
    pub t_end: f64,
    pub width: f64,
}

impl QuenchProtocol {
    pub fn sudden(t_start: f64) -> Self {
        Self {
            kind: QuenchKind::Sudden,
            t_start,
            t_end: t_start,
            width: 0.0,
        }
    }

    pub fn linear_ramp(t_start: f64, t_end: f64) -> Self {
        Self {
            kind: QuenchKind::LinearRamp,
            t_start,
            t_end,
            width: 0.0,
        }
    }

    pub fn smooth_tanh(t_start: f64, t_end: f64, width: f64) -> Self {
        Self {
            kind: QuenchKind::SmoothTanh,
            t_start,
            t_end,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("quench.t_start", self.t_start)?;
        require_finite("quench.t_end", self.t_end)?;
        require_finite("quench.width", self.width)?;
        match self.kind {
            QuenchKind::Sudden => Ok(()),
            QuenchKind::LinearRamp if self.t_end > self.t_start => Ok(()),
            QuenchKind::SmoothTanh if self.t_end > self.t_start && self.width > 0.0 => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "ramp needs t_end > t_start (and width > 0 for tanh): {self:?}"
            ))),
        }
    }

    /// Interpolation weight of the final Hamiltonian at time `t`.
    pub fn weight(&self, t: f64) -> f64 {
        match self.kind {
            QuenchKind::Sudden => {
                if t > self.t_start {
                    1.0
                } else {
                    0.0
                }
            }
            QuenchKind::LinearRamp => ((t - self.t_start) / (self.t_end - self.t_start)).clamp(0.0, 1.0),
            QuenchKind::SmoothTanh => {
                if t <= self.t_start {
                    return 0.0;
                }
                if t >= self.t_end {
                    return 1.0;
                }
                let centre = 0.5 * (self.t_start + self.t_end);
                let step = |x: f64| ((x - centre) / self.width).tanh();
                let lo = step(self.t_start);
                let hi = step(self.t_end);
                ((step(t) - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        }
    }
}

/// `H(k, t) = (1 − s(t)) H_initial(k, t) + s(t) H_final(k, t)`.
#[derive(Debug, Clone)]
pub struct Quench {
    initial: ModelRef,
    final_: ModelRef,
    protocol: QuenchProtocol,
}

pub fn build_quench(initial: ModelRef, final_: ModelRef, protocol: QuenchProtocol) -> Result<Quench> {
    if initial.dimension() != final_.dimension() {
        return Err(Error::InvalidComposition(format!(
            "dimension mismatch: initial {} vs final {}",
            initial.dimension(),
            final_.dimension()
        )));
    }
    if initial.spatial_dims() != final_.spatial_dims() {
        return Err(Error::InvalidComposition(format!(
            "spatial dimension mismatch: initial {} vs final {}",
            initial.spatial_dims(),
            final_.spatial_dims()
        )));
    }
    protocol.validate()?;
    Ok(Quench {
        initial,
        final_,
        protocol,
    })
}

impl Quench {
    pub fn protocol(&self) -> &QuenchProtocol {
        &self.protocol
    }

    pub fn initial(&self) -> &ModelRef {
        &self.initial
    }

    pub fn final_model(&self) -> &ModelRef {
        &self.final_
    }

    fn mix(&self, t: f64, a: impl FnOnce() -> CMatrix, b: impl FnOnce() -> CMatrix) -> CMatrix {
        let s = self.protocol.weight(t);
        if s == 0.0 {
            a()
        } else if s == 1.0 {
            b()
        } else {
            a().scale(1.0 - s) + b().scale(s)
        }
    }
}

impl BlochModel for Quench {
    fn dimension(&self) -> usize {
        self.initial.dimension()
    }

    fn spatial_dims(&self) -> usize {
        self.initial.spatial_dims()
    }

    fn evaluate(&self, k: MomentumPoint, t: f64) -> CMatrix {
        self.mix(t, || self.initial.evaluate(k, t), || self.final_.evaluate(k, t))
    }

    fn gradient(&self, k: MomentumPoint, t: f64, direction: usize) -> CMatrix {
        self.mix(
            t,
            || self.initial.gradient(k, t, direction),
            || self.final_.gradient(k, t, direction),
        )
    }

    fn pauli_vector(&self, k: MomentumPoint, t: f64) -> Option<[f64; 4]> {
        let s = self.protocol.weight(t);
        if s == 0.0 {
            self.initial.pauli_vector(k, t)
        } else if s == 1.0 {
            self.final_.pauli_vector(k, t)
        } else {
            let a = self.initial.pauli_vector(k, t)?;
            let b = self.final_.pauli_vector(k, t)?;
            Some(std::array::from_fn(|i| a[i] * (1.0 - s) + b[i] * s))
        }
    }

    fn symmetry_tags(&self) -> SymmetryTags {
        let a = self.initial.symmetry_tags();
        let b = self.final_.symmetry_tags();
        SymmetryTags {
            trs_even: a.trs_even && b.trs_even,
            trs_odd: a.trs_odd && b.trs_odd,
            block_diagonal_spin: a.block_diagonal_spin && b.block_diagonal_spin,
        }
    }
}

/// Amplitude schedule `f(t)` of a TRS-odd quench generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    Constant(f64),
    Ramp(QuenchProtocol),
}

impl Amplitude {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Amplitude::Constant(f) => *f,
            Amplitude::Ramp(p) => p.weight(t),
        }
    }
}

/// Quench generator `diag(f(t) v(k), −f(t) v*(−k))`.
///
/// With `u_T = iσ_y ⊗ 1` this satisfies `u_T H*(k, t) u_T† = −H(−k, t)`, so
/// `T U_k(t) T⁻¹ = U_{−k}(t)` and time-reversal pairing of the evolved states
/// survives the quench.
#[derive(Debug, Clone)]
pub struct TrsOddBlockQuench {
    v_up: ModelRef,
    amplitude: Amplitude,
}

pub fn build_trs_odd_quench(base: &dyn BlochModel, v_up: ModelRef, amplitude: Amplitude) -> Result<TrsOddBlockQuench> {
    let tags = base.symmetry_tags();
    if !tags.block_diagonal_spin || base.dimension() != 4 {
        return Err(Error::InvalidComposition(
            "base model must be a 4-band block-diagonal spin model".into(),
        ));
    }
    if v_up.dimension() != 2 || v_up.spatial_dims() != base.spatial_dims() {
        return Err(Error::InvalidComposition(format!(
            "v_up must be a 2x2 map over {} momentum components",
            base.spatial_dims()
        )));
    }
    let probe = 12;
    for i in 0..probe {
        for j in 0..probe {
            let kx = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64 + 0.37) / probe as f64;
            let ky = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64 + 0.61) / probe as f64;
            let k = if base.spatial_dims() == 1 {
                MomentumPoint::new1(kx)
            } else {
                MomentumPoint::new2(kx, ky)
            };
            let h = v_up.evaluate(k, 0.0);
            let r = linalg::hermiticity_residual(&h);
            if !linalg::is_finite(&h) || r > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "v_up is not Hermitian at k = {k} (residual {r:.3e})"
                )));
            }
        }
    }
    if let Amplitude::Ramp(p) = &amplitude {
        p.validate()?;
    } else if let Amplitude::Constant(f) = amplitude {
        require_finite("amplitude", f)?;
    }
    Ok(TrsOddBlockQuench { v_up, amplitude })
}

impl TrsOddBlockQuench {
    pub fn amplitude(&self) -> &Amplitude {
        &self.amplitude
    }
}

impl BlochModel for TrsOddBlockQuench {
    fn dimension(&self) -> usize {
        4
    }

    fn spatial_dims(&self) -> usize {
        self.v_up.spatial_dims()
    }

    fn evaluate(&self, k: MomentumPoint, t: f64) -> CMatrix {
        let f = self.amplitude.value(t);
        if f == 0.0 {
            return linalg::zeros(4, 4);
        }
        let up = self.v_up.evaluate(k, t).scale(f);
        let down = conj(&self.v_up.evaluate(k.neg(), t)).scale(-f);
        block_diag(&up, &down)
    }

    fn gradient(&self, k: MomentumPoint, t: f64, direction: usize) -> CMatrix {
        let f = self.amplitude.value(t);
        if f == 0.0 {
            return linalg::zeros(4, 4);
        }
        let up = self.v_up.gradient(k, t, direction).scale(f);
        // ∂_k [−f v*(−k)] = f (∂v)*(−k)
        let down = conj(&self.v_up.gradient(k.neg(), t, direction)).scale(f);
        block_diag(&up, &down)
    }

    fn symmetry_tags(&self) -> SymmetryTags {
        SymmetryTags {
            trs_even: false,
            trs_odd: true,
            block_diagonal_spin: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};
    use std::f64::consts::PI;

    fn m2(entries: [(f64, f64); 4]) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &entries.map(|(re, im)| c(re, im)))
    }

    #[test]
    fn lz_examples() {
        let lz = build_lz_parameterized(1.0, 1.0).unwrap();
        let h = lz.evaluate(MomentumPoint::new1(0.0), 0.0);
        assert!(max_abs_diff(&h, &m2([(0., 0.), (1., 0.), (1., 0.), (0., 0.)])) < 1e-15);
        let h = lz.evaluate(MomentumPoint::new1(PI / 2.0), 0.0);
        assert!(max_abs_diff(&h, &m2([(0., 0.), (0., 1.), (0., -1.), (0., 0.)])) < 1e-15);

        let free = build_lz_parameterized(1.0, 0.0).unwrap();
        for lam in [-2.0, 0.3, 1.9] {
            let h = free.evaluate(MomentumPoint::new1(lam), 2.0);
            assert!(max_abs_diff(&h, &m2([(2., 0.), (0., 0.), (0., 0.), (-2., 0.)])) < 1e-15);
        }
    }

    #[test]
    fn lz_rejects_bad_parameters() {
        assert!(matches!(
            build_lz_parameterized(f64::NAN, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_lz_parameterized(1.0, f64::INFINITY),
            Err(Error::InvalidParameter(_))
        ));
        assert!(build_lz_parameterized(0.0, 1.0).is_err());
        assert!(build_lz_parameterized(1.0, -0.5).is_err());
    }

    #[test]
    fn lz_gradient_closed_form() {
        let lz = build_lz_parameterized(1.0, 0.7).unwrap();
        let lam = 0.9_f64;
        let expected = (linalg::sigma_x().scale(-lam.sin()) - linalg::sigma_y().scale(lam.cos())).scale(0.7);
        let got = lz.gradient(MomentumPoint::new1(lam), 3.0, 0);
        assert!(max_abs_diff(&got, &expected) < 1e-15);
    }

    #[test]
    fn two_band_examples() {
        let m0 = build_two_band_chern(0.0).unwrap();
        let h = m0.evaluate(MomentumPoint::new2(0.0, 0.0), 0.0);
        assert!(max_abs_diff(&h, &linalg::sigma_z().scale(2.0)) < 1e-15);

        let m1 = build_two_band_chern(-1.0).unwrap();
        let h = m1.evaluate(MomentumPoint::new2(PI / 2.0, PI / 2.0), 0.0);
        let expected = linalg::sigma_x() + linalg::sigma_y() - linalg::sigma_z();
        assert!(max_abs_diff(&h, &expected) < 1e-15);
        assert!(build_two_band_chern(f64::NAN).is_err());
    }

    #[test]
    fn bhz_at_gamma() {
        let bhz = build_bhz(-1.0).unwrap();
        let h = bhz.evaluate(MomentumPoint::new2(0.0, 0.0), 0.0);
        let expected = block_diag(&linalg::sigma_z(), &linalg::sigma_z());
        assert!(max_abs_diff(&h, &expected) < 1e-15);
        let tags = bhz.symmetry_tags();
        assert!(tags.trs_even && tags.block_diagonal_spin);
    }

    #[test]
    fn quench_requires_matching_dimensions() {
        let a: ModelRef = Arc::new(build_two_band_chern(-1.0).unwrap());
        let b: ModelRef = Arc::new(build_bhz(3.0).unwrap());
        let err = build_quench(a, b, QuenchProtocol::sudden(0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidComposition(_)));
    }

    #[test]
    fn sudden_quench_switches_after_t_start() {
        let a: ModelRef = Arc::new(build_two_band_chern(-1.0).unwrap());
        let b: ModelRef = Arc::new(build_two_band_chern(3.0).unwrap());
        let q = build_quench(a.clone(), b.clone(), QuenchProtocol::sudden(0.0)).unwrap();
        let k = MomentumPoint::new2(0.4, -1.3);
        assert_eq!(q.evaluate(k, -1.0), a.evaluate(k, -1.0));
        assert_eq!(q.evaluate(k, 0.0), a.evaluate(k, 0.0));
        assert_eq!(q.evaluate(k, 1.0), b.evaluate(k, 1.0));
    }

    #[test]
    fn linear_ramp_midpoint_is_mean_parameter() {
        let a: ModelRef = Arc::new(build_two_band_chern(-1.0).unwrap());
        let b: ModelRef = Arc::new(build_two_band_chern(3.0).unwrap());
        let q = build_quench(a, b, QuenchProtocol::linear_ramp(0.0, 1.0)).unwrap();
        let mid = build_two_band_chern(1.0).unwrap();
        let k = MomentumPoint::new2(2.1, 0.3);
        assert!(max_abs_diff(&q.evaluate(k, 0.5), &mid.evaluate(k, 0.5)) < 1e-15);
    }

    #[test]
    fn tanh_endpoints_exact_and_narrow_limit_is_a_step() {
        let p = QuenchProtocol::smooth_tanh(0.0, 2.0, 0.3);
        assert_eq!(p.weight(0.0), 0.0);
        assert_eq!(p.weight(-5.0), 0.0);
        assert_eq!(p.weight(2.0), 1.0);
        assert!((p.weight(1.0) - 0.5).abs() < 1e-15);
        let w = |width: f64, t: f64| QuenchProtocol::smooth_tanh(0.0, 2.0, width).weight(t);
        for t in [0.5, 0.9, 1.1, 1.7] {
            let step = QuenchProtocol::sudden(1.0).weight(t);
            let errs: Vec<f64> = [0.1, 0.03, 0.01].iter().map(|&wd| (w(wd, t) - step).abs()).collect();
            assert!(errs[2] < 1e-3, "t={t} errs={errs:?}");
            assert!(errs[0] >= errs[1] && errs[1] >= errs[2]);
        }
    }

    #[test]
    fn trs_odd_quench_rejects_non_hermitian() {
        #[derive(Debug)]
        struct Skew;
        impl BlochModel for Skew {
            fn dimension(&self) -> usize {
                2
            }
            fn spatial_dims(&self) -> usize {
                2
            }
            fn evaluate(&self, _k: MomentumPoint, _t: f64) -> CMatrix {
                m2([(0., 0.), (1., 0.), (0., 0.), (0., 0.)])
            }
            fn gradient(&self, _k: MomentumPoint, _t: f64, _d: usize) -> CMatrix {
                linalg::zeros(2, 2)
            }
        }
        let base = build_bhz(-1.0).unwrap();
        let err = build_trs_odd_quench(&base, Arc::new(Skew), Amplitude::Constant(1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn trs_operator_requires_unitary() {
        let bad = linalg::identity(2).scale(2.0);
        assert!(TrsOperator::new(bad).is_err());
        let t = TrsOperator::spinful(2);
        assert!(max_abs_diff(&t.square(), &(-linalg::identity(4))) < 1e-15);
    }
}
