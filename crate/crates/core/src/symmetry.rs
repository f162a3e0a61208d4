//! Time-reversal checks and the auxiliary-Hamiltonian picture of quenched
//! states.
//!
//! The auxiliary Hamiltonian `H^a_k(t) = U_k(t) H⁰_k U_k(t)†` has the evolved
//! states as eigenvectors and the spectrum of `H⁰`. When `H⁰` is
//! time-reversal even, `T_a = U_{−k} u₀ U_kᵀ 𝒦` is a time reversal for it.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Propagator, StateField, Trajectory};
use crate::grid::MomentumPoint;
use crate::linalg::{self, CMatrix};
use crate::models::{BlochModel, TrsOperator};

pub const STATIC_TRS_TOLERANCE: f64 = 1e-10;
pub const QUENCH_TRS_TOLERANCE: f64 = 1e-10;
pub const PROPAGATOR_TRS_TOLERANCE: f64 = 1e-8;
pub const SPECTRUM_TOLERANCE: f64 = 1e-9;
pub const EIGENVECTOR_TOLERANCE: f64 = 1e-8;
pub const AUXILIARY_TRS_TOLERANCE: f64 = 1e-8;
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Outcome of one residual check. `pass` is `max_residual < tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub check: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_k: Option<MomentumPoint>,
    pub worst_t: Option<f64>,
}

impl SymmetryReport {
    fn from_residuals(
        check: &str,
        tolerance: f64,
        residuals: impl IntoIterator<Item = (f64, Option<MomentumPoint>, Option<f64>)>,
    ) -> Self {
        let mut report = SymmetryReport {
            check: check.to_string(),
            max_residual: 0.0,
            tolerance,
            pass: true,
            worst_k: None,
            worst_t: None,
        };
        for (r, k, t) in residuals {
            // NaN counts as worst.
            if !(r <= report.max_residual) {
                report.max_residual = r;
                report.worst_k = k;
                report.worst_t = t;
            }
        }
        report.pass = report.max_residual < tolerance;
        report
    }

    /// Re-judge the same residual against another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.max_residual < tolerance;
        self
    }

    /// Build a report from precomputed `(residual, k, t)` triples.
    pub fn from_samples(
        check: &str,
        tolerance: f64,
        residuals: impl IntoIterator<Item = (f64, Option<MomentumPoint>, Option<f64>)>,
    ) -> Self {
        Self::from_residuals(check, tolerance, residuals)
    }

    /// Convert a failed report into a symmetry-violation error.
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::SymmetryViolation {
                check: self.check,
                residual: self.max_residual,
                k: self.worst_k,
            })
        }
    }
}

/// Deterministic momentum samples: a generic offset lattice plus the
/// time-reversal-invariant momenta.
pub fn sample_points(spatial_dims: usize) -> Vec<MomentumPoint> {
    use std::f64::consts::PI;
    let n = 12;
    let axis = |i: usize| -PI + 2.0 * PI * (i as f64 + 0.29) / n as f64;
    let mut out = Vec::new();
    if spatial_dims == 1 {
        out.extend((0..n).map(|i| MomentumPoint::new1(axis(i))));
        out.extend([0.0, -PI].map(MomentumPoint::new1));
    } else {
        for j in 0..n {
            for i in 0..n {
                out.push(MomentumPoint::new2(axis(i), axis(j) * 0.97));
            }
        }
        for kx in [0.0, -PI] {
            for ky in [0.0, -PI] {
                out.push(MomentumPoint::new2(kx, ky));
            }
        }
    }
    out
}

fn trs_residuals(
    model: &dyn BlochModel,
    trs: &TrsOperator,
    times: &[f64],
    sign: f64,
) -> Vec<(f64, Option<MomentumPoint>, Option<f64>)> {
    let points = sample_points(model.spatial_dims());
    let pairs: Vec<(MomentumPoint, f64)> = times
        .iter()
        .flat_map(|&t| points.iter().map(move |&k| (k, t)))
        .collect();
    pairs
        .par_iter()
        .map(|&(k, t)| {
            let lhs = trs.conjugate(&model.evaluate(k, t));
            let rhs = model.evaluate(k.neg(), t).scale(sign);
            (linalg::max_abs_diff(&lhs, &rhs), Some(k), Some(t))
        })
        .collect()
}

fn dimension_mismatch(check: &str, model: &dyn BlochModel, trs: &TrsOperator) -> Option<SymmetryReport> {
    (model.dimension() != trs.dimension()).then(|| SymmetryReport {
        check: format!("{check} (dimension mismatch)"),
        max_residual: f64::INFINITY,
        tolerance: 0.0,
        pass: false,
        worst_k: None,
        worst_t: None,
    })
}

/// `max_k |u_T H*(k, t) u_T† − H(−k, t)|` over the sample points.
pub fn check_trs_static(model: &dyn BlochModel, trs: &TrsOperator, t: f64) -> SymmetryReport {
    const NAME: &str = "trs_static";
    if let Some(r) = dimension_mismatch(NAME, model, trs) {
        return r;
    }
    SymmetryReport::from_residuals(NAME, STATIC_TRS_TOLERANCE, trs_residuals(model, trs, &[t], 1.0))
}

/// `max_{k,t} |u_T H*(k, t) u_T† + H(−k, t)|` over the sample points and `times`.
pub fn check_trs_quench(model: &dyn BlochModel, trs: &TrsOperator, times: &[f64]) -> SymmetryReport {
    const NAME: &str = "trs_quench_odd";
    if let Some(r) = dimension_mismatch(NAME, model, trs) {
        return r;
    }
    SymmetryReport::from_residuals(NAME, QUENCH_TRS_TOLERANCE, trs_residuals(model, trs, times, -1.0))
}

fn point_key(k: MomentumPoint) -> (i64, i64) {
    let w = k.wrapped();
    let q = |x: f64| (x * 1e9).round() as i64;
    // −π and π are the same sample.
    let fold = |x: i64| {
        if x == q(std::f64::consts::PI) {
            q(-std::f64::consts::PI)
        } else {
            x
        }
    };
    (fold(q(w.get(0))), fold(q(w.get(1))))
}

/// `max_k |u_T U_k* u_T† − U_{−k}|` for propagators sampled on a point set
/// closed under `k → −k`.
pub fn check_propagator_trs(
    points: &[MomentumPoint],
    propagators: &[Propagator],
    trs: &TrsOperator,
    t: Option<f64>,
) -> Result<SymmetryReport> {
    if points.len() != propagators.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} propagators",
            points.len(),
            propagators.len()
        )));
    }
    let index: HashMap<(i64, i64), usize> = points.iter().enumerate().map(|(i, &k)| (point_key(k), i)).collect();
    let mut residuals = Vec::with_capacity(points.len());
    for (k, u) in points.iter().zip(propagators) {
        let Some(&p) = index.get(&point_key(k.neg())) else {
            return Err(Error::InvalidGrid(format!(
                "grid is not symmetric: no partner for k = {k}"
            )));
        };
        if u.matrix().nrows() != trs.dimension() {
            return Err(Error::InvalidInput("propagator and TRS dimensions differ".into()));
        }
        let r = linalg::max_abs_diff(&trs.conjugate(u.matrix()), propagators[p].matrix());
        residuals.push((r, Some(*k), t));
    }
    Ok(SymmetryReport::from_residuals(
        "propagator_trs",
        PROPAGATOR_TRS_TOLERANCE,
        residuals,
    ))
}

fn require_unitary(u: &CMatrix) -> Result<()> {
    let r = linalg::unitarity_residual(u);
    if !(r < UNITARITY_TOLERANCE) {
        return Err(Error::InvalidPropagator(format!("unitarity residual {r:.3e}")));
    }
    Ok(())
}

/// `H^a = U H⁰ U†`.
pub fn auxiliary_hamiltonian(u: &Propagator, h0: &CMatrix) -> Result<CMatrix> {
    require_unitary(u.matrix())?;
    if u.matrix().nrows() != h0.nrows() || !h0.is_square() {
        return Err(Error::InvalidInput(
            "propagator and Hamiltonian dimensions differ".into(),
        ));
    }
    let h = u.matrix() * h0 * u.matrix().adjoint();
    // Remove roundoff anti-Hermitian part.
    Ok((&h + h.adjoint()).scale(0.5))
}

/// `T_a = U_{−k} u₀ U_kᵀ 𝒦`.
pub fn auxiliary_trs(u_plus: &Propagator, u_minus: &Propagator, t0: &TrsOperator) -> Result<TrsOperator> {
    require_unitary(u_plus.matrix())?;
    require_unitary(u_minus.matrix())?;
    let u = u_minus.matrix() * t0.unitary_part() * u_plus.matrix().transpose();
    TrsOperator::within(u, UNITARITY_TOLERANCE).map_err(|e| Error::InvalidPropagator(e.to_string()))
}

/// Auxiliary-Hamiltonian checks for one trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct AuxiliaryReports {
    pub spectrum: SymmetryReport,
    pub eigenvectors: SymmetryReport,
    /// Present when the initial Hamiltonian's time reversal was supplied.
    pub auxiliary_trs: Option<SymmetryReport>,
}

impl AuxiliaryReports {
    pub fn all(&self) -> Vec<&SymmetryReport> {
        let mut out = vec![&self.spectrum, &self.eigenvectors];
        out.extend(self.auxiliary_trs.as_ref());
        out
    }

    pub fn pass(&self) -> bool {
        self.all().iter().all(|r| r.pass)
    }
}

/// Check `eig(H^a) = eig(H⁰)`, `H^a ψ_n(t) = ε_n ψ_n(t)` and, with `trs0`,
/// the auxiliary time reversal at every grid point and sample of `trajectory`.
///
/// `initial` holds eigenvectors of `H⁰_k = initial_model(k, t_initial)`.
pub fn check_auxiliary(
    initial_model: &dyn BlochModel,
    t_initial: f64,
    initial: &StateField,
    trajectory: &Trajectory,
    trs0: Option<&TrsOperator>,
) -> Result<AuxiliaryReports> {
    let grid = initial.grid();
    if trajectory.fields.iter().any(|f| f.grid() != grid) {
        return Err(Error::InvalidTrajectory(
            "trajectory grid differs from the initial field".into(),
        ));
    }
    let h0: Vec<CMatrix> = (0..grid.len())
        .map(|idx| initial_model.evaluate(grid.point(idx), t_initial))
        .collect();
    let spectra0: Vec<Vec<f64>> = h0
        .par_iter()
        .map(|h| linalg::eigh(h).map(|(v, _)| v))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    // Rayleigh quotients of the initial columns.
    let energies: Vec<Vec<f64>> = (0..grid.len())
        .map(|idx| {
            let psi = initial.at(idx);
            let e = psi.adjoint() * &h0[idx] * psi;
            (0..psi.ncols()).map(|n| e[(n, n)].re).collect()
        })
        .collect();

    let mut spectrum = Vec::new();
    let mut eigen = Vec::new();
    let mut aux = Vec::new();
    for (field, props) in trajectory.fields.iter().zip(&trajectory.propagators) {
        let t = field.time();
        let per_point: Vec<Result<(f64, f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let ha = auxiliary_hamiltonian(&props[idx], &h0[idx])?;
                let (values, _) = linalg::eigh(&ha)?;
                let d_spec = linalg::spectrum_distance(&values, &spectra0[idx]);
                let psi = field.at(idx);
                let mut d_vec = 0.0_f64;
                let hpsi = &ha * psi;
                for (n, &e) in energies[idx].iter().enumerate() {
                    let r = hpsi.column(n) - psi.column(n) * linalg::c(e, 0.0);
                    d_vec = d_vec.max(r.iter().fold(0.0, |a, z| a.max(z.norm())));
                }
                let d_trs = match trs0 {
                    Some(t0) => {
                        let partner = grid.partner(idx);
                        let ta = auxiliary_trs(&props[idx], &props[partner], t0)?;
                        let ha_minus = auxiliary_hamiltonian(&props[partner], &h0[partner])?;
                        linalg::max_abs_diff(&ta.conjugate(&ha), &ha_minus)
                    }
                    None => 0.0,
                };
                Ok((d_spec, d_vec, d_trs))
            })
            .collect();
        for (idx, r) in per_point.into_iter().enumerate() {
            let (s, v, a) = r?;
            let k = Some(grid.point(idx));
            spectrum.push((s, k, Some(t)));
            eigen.push((v, k, Some(t)));
            aux.push((a, k, Some(t)));
        }
    }
    Ok(AuxiliaryReports {
        spectrum: SymmetryReport::from_residuals("auxiliary_spectrum", SPECTRUM_TOLERANCE, spectrum),
        eigenvectors: SymmetryReport::from_residuals("auxiliary_eigenvectors", EIGENVECTOR_TOLERANCE, eigen),
        auxiliary_trs: trs0.map(|_| SymmetryReport::from_residuals("auxiliary_trs", AUXILIARY_TRS_TOLERANCE, aux)),
    })
}

/// Propagator time reversal at every sample of a trajectory on a grid.
pub fn check_trajectory_propagator_trs(trajectory: &Trajectory, trs: &TrsOperator) -> Result<SymmetryReport> {
    let Some(first) = trajectory.fields.first() else {
        return Err(Error::InvalidTrajectory("empty trajectory".into()));
    };
    let points = first.grid().points();
    let mut residuals = Vec::new();
    for (field, props) in trajectory.fields.iter().zip(&trajectory.propagators) {
        let r = check_propagator_trs(&points, props, trs, Some(field.time()))?;
        residuals.push((r.max_residual, r.worst_k, r.worst_t));
    }
    Ok(SymmetryReport::from_residuals(
        "propagator_trs",
        PROPAGATOR_TRS_TOLERANCE,
        residuals,
    ))
}
