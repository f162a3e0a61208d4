//! Berry connection, geometric phase and the Hellmann-Feynman relation
//! `d𝒜/dt = ⟨ψ|∂H/∂λ|ψ⟩`.
//!
//! Conventions: `𝒜 = i⟨ψ|∂_λ ψ⟩` (traced over occupied bands). On a grid the
//! connection lives on links, `𝒜_link = −arg det⟨ψ(λ)|ψ(λ+δ)⟩ / δ`, and the
//! loop phase is `γ = ∮ 𝒜 dλ = −Σ arg det⟨ψ_i|ψ_{i+1}⟩`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{evolve_trajectory, expm_step, fix_phase, Propagator, StateField, TimeGrid};
use crate::grid::{wrap_angle, Grid, MomentumPoint};
use crate::linalg::{self, CMatrix};
use crate::models::{build_lz_parameterized, BlochModel};

/// Smallest link-overlap magnitude for which lattice quantities are trusted.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-6;

/// `det(a† b)` over the occupied columns.
pub fn link_overlap(a: &CMatrix, b: &CMatrix) -> Complex64 {
    linalg::det(&(a.adjoint() * b))
}

fn admissible_link(field: &StateField, idx: usize, direction: usize) -> Result<Complex64> {
    let grid = field.grid();
    let o = link_overlap(field.at(idx), field.at(grid.neighbor(idx, direction, 1)));
    if !(o.norm() > ADMISSIBILITY_FLOOR) {
        return Err(Error::InadmissibleGrid {
            k: grid.point(idx),
            direction,
            overlap: o.norm(),
            floor: ADMISSIBILITY_FLOOR,
            time: Some(field.time()),
        });
    }
    Ok(o)
}

fn check_direction(grid: Grid, direction: usize) -> Result<()> {
    if direction >= grid.spatial_dims() {
        return Err(Error::InvalidInput(format!(
            "direction {direction} out of range for a {}-dimensional grid",
            grid.spatial_dims()
        )));
    }
    Ok(())
}

/// Link-centred Berry connection along one direction.
///
/// `values[idx]` belongs to the link from grid point `idx` to its `+direction`
/// neighbour and approximates `𝒜` at the link midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionGrid {
    pub grid: Grid,
    pub time: f64,
    pub direction: usize,
    pub values: Vec<f64>,
}

impl ConnectionGrid {
    /// Average of the two links adjacent to each grid point.
    pub fn point_centred(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|idx| {
                let prev = self.grid.neighbor(idx, self.direction, -1);
                0.5 * (self.values[idx] + self.values[prev])
            })
            .collect()
    }
}

pub fn berry_connection(field: &StateField, direction: usize) -> Result<ConnectionGrid> {
    let grid = field.grid();
    check_direction(grid, direction)?;
    let delta = grid.spacing(direction);
    let values = (0..grid.len())
        .map(|idx| Ok(-admissible_link(field, idx, direction)?.arg() / delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectionGrid {
        grid,
        time: field.time(),
        direction,
        values,
    })
}

/// `ε = Σ_n ⟨ψ_n|∂H/∂k_direction|ψ_n⟩` at every grid point.
pub fn hamiltonian_energy(model: &dyn BlochModel, field: &StateField, direction: usize, t: f64) -> Result<Vec<f64>> {
    let grid = field.grid();
    check_direction(grid, direction)?;
    if model.dimension() != field.dimension() {
        return Err(Error::InvalidInput("model and field dimensions differ".into()));
    }
    Ok((0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let psi = field.at(idx);
            let dh = model.gradient(grid.point(idx), t, direction);
            (psi.adjoint() * dh * psi).trace().re
        })
        .collect())
}

fn check_trajectory(fields: &[StateField]) -> Result<f64> {
    if fields.len() < 3 {
        return Err(Error::InvalidTrajectory(format!(
            "need at least 3 snapshots, got {}",
            fields.len()
        )));
    }
    let grid = fields[0].grid();
    if fields
        .iter()
        .any(|f| f.grid() != grid || f.n_occupied() != fields[0].n_occupied())
    {
        return Err(Error::InvalidTrajectory("snapshots live on different grids".into()));
    }
    let dt = fields[1].time() - fields[0].time();
    if !(dt > 0.0) {
        return Err(Error::InvalidTrajectory("snapshot times must increase".into()));
    }
    for w in fields.windows(2) {
        let step = w[1].time() - w[0].time();
        if (step - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::InvalidTrajectory(format!(
                "unequal snapshot spacing: {step} vs {dt}"
            )));
        }
    }
    Ok(dt)
}

/// Largest `|d𝒜/dt − ε|` over links and interior snapshots.
///
/// `d𝒜/dt` is the central difference across neighbouring snapshots, taken
/// from the phase of the overlap ratio so branch cuts never enter; `ε` is the
/// link average of the Hamiltonian energy at the middle snapshot.
pub fn hellmann_feynman_residual(model: &dyn BlochModel, trajectory: &[StateField], direction: usize) -> Result<f64> {
    let dt = check_trajectory(trajectory)?;
    let grid = trajectory[0].grid();
    check_direction(grid, direction)?;
    let delta = grid.spacing(direction);
    let mut worst = 0.0_f64;
    for s in 1..trajectory.len() - 1 {
        let (before, mid, after) = (&trajectory[s - 1], &trajectory[s], &trajectory[s + 1]);
        let eps = hamiltonian_energy(model, mid, direction, mid.time())?;
        let residuals = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let next = grid.neighbor(idx, direction, 1);
                let o_before = admissible_link(before, idx, direction)?;
                let o_after = admissible_link(after, idx, direction)?;
                let rate = -(o_after * o_before.conj()).arg() / (delta * 2.0 * dt);
                let eps_link = 0.5 * (eps[idx] + eps[next]);
                Ok((rate - eps_link).abs())
            })
            .collect::<Vec<Result<f64>>>();
        for r in residuals {
            worst = worst.max(r?);
        }
    }
    Ok(worst)
}

/// Evolve `field0` across `time_grid` and take the worst Hellmann-Feynman
/// residual over snapshot triples `(t_c − δt, t_c, t_c + δt)` at each centre.
///
/// Only the triples are stored, so long fine-step runs stay cheap in memory.
pub fn hellmann_feynman_scan(
    model: &dyn BlochModel,
    field0: &StateField,
    time_grid: &TimeGrid,
    centres: &[f64],
    direction: usize,
) -> Result<f64> {
    let dt = time_grid.dt();
    let mut steps = Vec::with_capacity(centres.len());
    for &c in centres {
        let s = time_grid.step_of(c)?;
        if s == 0 || s >= time_grid.n_steps() {
            return Err(Error::InvalidTrajectory(format!(
                "centre t = {c} has no neighbouring steps"
            )));
        }
        steps.push(s);
    }
    steps.sort_unstable();
    steps.dedup();
    let times: Vec<f64> = steps
        .iter()
        .flat_map(|&s| [s - 1, s, s + 1])
        .map(|s| time_grid.time(s))
        .collect();
    let trajectory = evolve_trajectory(model, field0, time_grid, &times)?;
    let mut worst = 0.0_f64;
    for triple in trajectory.fields.chunks(3) {
        // Snapshot times come from the grid, so spacing is exactly δt up to roundoff.
        debug_assert!((triple[2].time() - triple[0].time() - 2.0 * dt).abs() < 1e-9);
        worst = worst.max(hellmann_feynman_residual(model, triple, direction)?);
    }
    Ok(worst)
}

fn loop_increment(field: &StateField, link: usize) -> Result<f64> {
    let grid = field.grid();
    let o = link_overlap(field.at(link), field.at(grid.neighbor(link, 0, 1)));
    let increment = -o.arg();
    if !(o.norm() > ADMISSIBILITY_FLOOR) || increment.abs() >= PI {
        return Err(Error::InadmissibleLoop {
            link,
            increment,
            overlap: o.norm(),
        });
    }
    Ok(increment)
}

/// Unwrapped phase accumulated along the links `start..end` of a loop field.
/// Link `i` joins samples `i` and `i + 1` (mod n).
pub fn arc_phase(field: &StateField, start: usize, end: usize) -> Result<f64> {
    let Grid::Loop { n } = field.grid() else {
        return Err(Error::InvalidInput("geometric phase needs a loop field".into()));
    };
    if start > end || end > n {
        return Err(Error::InvalidInput(format!("bad arc {start}..{end} on a loop of {n}")));
    }
    (start..end).map(|link| loop_increment(field, link)).sum()
}

/// Unwrapped geometric phase around the closed loop, `γ = ∮ 𝒜 dλ`.
pub fn geometric_phase_loop(field: &StateField) -> Result<f64> {
    let Grid::Loop { n } = field.grid() else {
        return Err(Error::InvalidInput("geometric phase needs a loop field".into()));
    };
    arc_phase(field, 0, n)
}

/// Principal value of a phase in `[0, 2π)`.
pub fn principal_phase(gamma: f64) -> f64 {
    gamma.rem_euclid(2.0 * PI)
}

/// `2π (1 − exp(−π g²/v))`, the `t → ∞` loop phase of the Landau-Zener sweep.
pub fn lz_gamma_limit(v: f64, g: f64) -> f64 {
    2.0 * PI * (1.0 - (-PI * g * g / v).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LzSample {
    pub t: f64,
    pub a: Complex64,
    pub b: Complex64,
    /// `2π |b|²`
    pub gamma: f64,
    /// `4π g Im(b* a)`
    pub gamma_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LzRun {
    pub v: f64,
    pub g: f64,
    pub samples: Vec<LzSample>,
    /// `2π` times the population of the instantaneous ground state at the
    /// final time: the estimate of `lim γ(t)` free of the `O(g/vt)`
    /// interference ripple still present in `2π|b(t)|²` at finite `t`.
    pub gamma_asymptotic: f64,
}

impl LzRun {
    pub fn gamma_final(&self) -> f64 {
        self.samples.last().map(|s| s.gamma).unwrap_or(0.0)
    }

    /// Largest `|Δγ/Δt − γ_rate|` with `Δγ/Δt` the central difference.
    pub fn rate_residual(&self) -> f64 {
        self.samples
            .windows(3)
            .map(|w| {
                let fd = (w[2].gamma - w[0].gamma) / (w[2].t - w[0].t);
                (fd - w[1].gamma_rate).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Landau-Zener sweep `H = v t σz + g σx` from the instantaneous ground state
/// at `t0` (which tends to `(1, 0)` as `t0 → −∞`).
pub fn lz_run(v: f64, g: f64, t0: f64, t1: f64, dt: f64) -> Result<LzRun> {
    let model = build_lz_parameterized(v, g)?;
    let min_lead = 20.0 * g.max(1.0) / v;
    if !(t0 <= -min_lead) {
        return Err(Error::InvalidWindow(format!(
            "t0 = {t0} is not adiabatic; need t0 <= -{min_lead}"
        )));
    }
    let grid = TimeGrid::with_step(t0, t1, dt)?;
    let k = MomentumPoint::new1(0.0);
    let ground = |t: f64| -> Result<CMatrix> {
        let (_, vecs) = linalg::eigh(&model.evaluate(k, t))?;
        let mut v = vecs.columns(0, 1).into_owned();
        fix_phase(&mut v);
        Ok(v)
    };
    let mut psi = ground(t0)?;
    let sample = |t: f64, psi: &CMatrix| {
        let (a, b) = (psi[(0, 0)], psi[(1, 0)]);
        LzSample {
            t,
            a,
            b,
            gamma: 2.0 * PI * b.norm_sqr(),
            gamma_rate: 4.0 * PI * g * (b.conj() * a).im,
        }
    };
    let mut samples = Vec::with_capacity(grid.n_steps() + 1);
    samples.push(sample(t0, &psi));
    for i in 1..=grid.n_steps() {
        let step = expm_step(&model.evaluate(k, grid.midpoint(i)), grid.dt())?;
        psi = step * psi;
        samples.push(sample(grid.time(i), &psi));
    }
    let overlap = (ground(t1)?.adjoint() * &psi)[(0, 0)];
    Ok(LzRun {
        v,
        g,
        samples,
        gamma_asymptotic: 2.0 * PI * overlap.norm_sqr(),
    })
}

/// Measured geometric-phase rate against the continuity bound
/// `𝓜 = max_t ∮ |ε_λ| dλ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub measured: f64,
    pub bound: f64,
}

impl LipschitzReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.measured <= self.bound + tolerance
    }
}

pub fn phase_lipschitz_bound(model: &dyn BlochModel, trajectory: &[StateField]) -> Result<LipschitzReport> {
    if trajectory.len() < 2 {
        return Err(Error::InvalidTrajectory("need at least 2 snapshots".into()));
    }
    let Grid::Loop { .. } = trajectory[0].grid() else {
        return Err(Error::InvalidInput("Lipschitz bound needs loop fields".into()));
    };
    let delta = trajectory[0].grid().spacing(0);
    let phases = trajectory
        .iter()
        .map(geometric_phase_loop)
        .collect::<Result<Vec<_>>>()?;
    let mut measured = 0.0_f64;
    for (w, f) in phases.windows(2).zip(trajectory.windows(2)) {
        let jump = w[1] - w[0];
        if jump.abs() >= PI {
            return Err(Error::InvalidTrajectory(format!(
                "phase step {jump} between t = {} and {} is not resolved",
                f[0].time(),
                f[1].time()
            )));
        }
        measured = measured.max(jump.abs() / (f[1].time() - f[0].time()));
    }
    let mut bound = 0.0_f64;
    for f in trajectory {
        let eps = hamiltonian_energy(model, f, 0, f.time())?;
        bound = bound.max(eps.iter().map(|e| e.abs() * delta).sum());
    }
    Ok(LipschitzReport { measured, bound })
}

/// Largest deviation from `𝒜(k, t) = 𝒜(k) + i tr⟨ψ⁰|U†∂U|ψ⁰⟩` with `∂U` by
/// central differences over the grid.
pub fn connection_decomposition_check(
    field0: &StateField,
    propagators: &[Propagator],
    field_t: &StateField,
    direction: usize,
) -> Result<f64> {
    let grid = field0.grid();
    if propagators.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} propagators for a grid of {} points",
            propagators.len(),
            grid.len()
        )));
    }
    if field_t.grid() != grid {
        return Err(Error::InvalidInput("fields live on different grids".into()));
    }
    let delta = grid.spacing(direction);
    // Each link phase is only defined mod 2π; compare the links before
    // averaging them onto points.
    let mut shift = berry_connection(field_t, direction)?;
    let a0 = berry_connection(field0, direction)?;
    for (t, z) in shift.values.iter_mut().zip(&a0.values) {
        *t = wrap_angle((*t - z) * delta) / delta;
    }
    let shift = shift.point_centred();
    let worst = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let next = grid.neighbor(idx, direction, 1);
            let prev = grid.neighbor(idx, direction, -1);
            let du = (propagators[next].matrix() - propagators[prev].matrix()).scale(0.5 / delta);
            let psi = field0.at(idx);
            let term = (psi.adjoint() * propagators[idx].matrix().adjoint() * du * psi).trace() * linalg::I;
            (shift[idx] - term.re).abs()
        })
        .collect::<Vec<_>>();
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::ground_state_field;
    use crate::models::{build_two_band_chern, ZeroModel};

    fn spinor_loop(n: usize, theta: f64) -> StateField {
        let grid = Grid::loop_of(n).unwrap();
        let states = grid
            .points()
            .iter()
            .map(|k| {
                let lam = k.get(0);
                CMatrix::from_column_slice(
                    2,
                    1,
                    &[linalg::c(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), -lam)],
                )
            })
            .collect();
        StateField::new(grid, 0.0, states).unwrap()
    }

    #[test]
    fn constant_field_has_no_connection() {
        let grid = Grid::loop_of(16).unwrap();
        let v = CMatrix::from_column_slice(2, 1, &[linalg::c(0.6, 0.0), linalg::c(0.0, 0.8)]);
        let field = StateField::new(grid, 0.0, vec![v; 16]).unwrap();
        let a = berry_connection(&field, 0).unwrap();
        assert!(a.values.iter().all(|x| x.abs() < 1e-15));
        assert_eq!(geometric_phase_loop(&field).unwrap(), 0.0);
    }

    #[test]
    fn spinor_connection_is_sin_squared() {
        let theta = 0.6_f64;
        let exact = theta.sin().powi(2);
        let err = |n: usize| {
            berry_connection(&spinor_loop(n, theta), 0)
                .unwrap()
                .values
                .iter()
                .map(|a| (a - exact).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 1e-3, "{e1}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn rephasing_by_lambda_shifts_connection_by_minus_one() {
        let field = spinor_loop(32, 0.9);
        let grid = field.grid();
        // θ(λ) = λ is single-valued only up to the seam, where the jump is 2π.
        let shifted = field.rephased(|idx, _| grid.point(idx).get(0));
        let a = berry_connection(&field, 0).unwrap();
        let b = berry_connection(&shifted, 0).unwrap();
        for idx in 0..grid.len() - 1 {
            assert!((b.values[idx] - a.values[idx] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_phase_matches_two_pi_b_squared() {
        // |b|² = 1/4
        let field = spinor_loop(256, PI / 6.0);
        let gamma = geometric_phase_loop(&field).unwrap();
        assert!((gamma - 2.0 * PI * 0.25).abs() < 1e-4, "{gamma}");
    }

    #[test]
    fn arcs_add_up_to_the_loop() {
        let field = spinor_loop(100, 1.1);
        let whole = geometric_phase_loop(&field).unwrap();
        let split = arc_phase(&field, 0, 37).unwrap() + arc_phase(&field, 37, 100).unwrap();
        assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn coarse_loop_is_inadmissible() {
        let grid = Grid::loop_of(4).unwrap();
        let up = CMatrix::from_column_slice(2, 1, &[linalg::ONE, linalg::ZERO]);
        let down = CMatrix::from_column_slice(2, 1, &[linalg::ZERO, linalg::ONE]);
        let field = StateField::new(grid, 0.0, vec![up.clone(), down, up.clone(), up]).unwrap();
        assert!(matches!(
            geometric_phase_loop(&field),
            Err(Error::InadmissibleLoop { .. })
        ));
        assert!(matches!(
            berry_connection(&field, 0),
            Err(Error::InadmissibleGrid { .. })
        ));
    }

    #[test]
    fn static_eigenstate_energy_is_band_slope() {
        let model = build_two_band_chern(-1.0).unwrap();
        let field = ground_state_field(&model, Grid::torus(12, 12).unwrap(), 0.0, 1).unwrap();
        let h = 1e-6;
        for direction in 0..2 {
            let eps = hamiltonian_energy(&model, &field, direction, 0.0).unwrap();
            for (idx, e) in eps.iter().enumerate() {
                let k = field.grid().point(idx);
                let energy = |k: MomentumPoint| linalg::eigh(&model.evaluate(k, 0.0)).unwrap().0[0];
                let slope = (energy(k.shifted(direction, h)) - energy(k.shifted(direction, -h))) / (2.0 * h);
                assert!((e - slope).abs() < 1e-8, "{e} vs {slope}");
            }
        }
    }

    #[test]
    fn zero_model_energy_vanishes() {
        let zero = ZeroModel {
            dimension: 2,
            spatial_dims: 1,
        };
        let field = spinor_loop(16, 0.3);
        assert!(hamiltonian_energy(&zero, &field, 0, 0.0)
            .unwrap()
            .iter()
            .all(|&e| e == 0.0));
    }

    #[test]
    fn lz_run_window_and_trivial_coupling() {
        assert!(matches!(
            lz_run(1.0, 1.0, -5.0, 5.0, 0.01),
            Err(Error::InvalidWindow(_))
        ));
        let run = lz_run(1.0, 0.0, -20.0, 20.0, 0.01).unwrap();
        assert!(run.samples.iter().all(|s| s.gamma == 0.0 && s.gamma_rate == 0.0));
    }

    #[test]
    fn lz_rate_matches_finite_difference() {
        let coarse = lz_run(1.0, 1.0, -20.0, 10.0, 1e-3).unwrap().rate_residual();
        let fine = lz_run(1.0, 1.0, -20.0, 10.0, 5e-4).unwrap().rate_residual();
        assert!(coarse < 1e-3, "{coarse}");
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "{coarse} {fine}");
    }

    #[test]
    fn trajectory_validation() {
        let f = spinor_loop(8, 0.2);
        let zero = ZeroModel {
            dimension: 2,
            spatial_dims: 1,
        };
        assert!(matches!(
            hellmann_feynman_residual(&zero, &[f.clone(), f.clone()], 0),
            Err(Error::InvalidTrajectory(_))
        ));
        let other = spinor_loop(16, 0.2);
        let shift = |f: &StateField, t: f64| StateField::new(f.grid(), t, f.states().to_vec()).unwrap();
        assert!(matches!(
            hellmann_feynman_residual(&zero, &[shift(&f, 0.0), shift(&other, 1.0), shift(&f, 2.0)], 0),
            Err(Error::InvalidTrajectory(_))
        ));
        let r = hellmann_feynman_residual(&zero, &[shift(&f, 0.0), shift(&f, 1.0), shift(&f, 2.0)], 0).unwrap();
        assert!(r < 1e-12);
    }
}
