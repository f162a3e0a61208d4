//! Time evolution by a product of short-time exponentials.
//!
//! `U_k(t) = ∏_{i=N}^{1} exp(−i H_k(t_i) δt)` with the midpoint rule
//! `t_i = t0 + (i − 1/2) δt`. Each factor is the exact exponential of a
//! Hermitian matrix, so propagators are unitary up to roundoff.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, MomentumPoint};
use crate::linalg::{self, CMatrix};
use crate::models::BlochModel;

/// Minimum gap to the first unoccupied band accepted by [`ground_state_field`].
pub const MIN_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidTimeGrid(format!("need finite t1 > t0, got [{t0}, {t1}]")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidTimeGrid("n_steps must be positive".into()));
        }
        Ok(Self { t0, t1, n_steps })
    }

    /// Grid with step as close to `dt` as divides the window evenly.
    pub fn with_step(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {dt}")));
        }
        let n = ((t1 - t0) / dt).round().max(1.0) as usize;
        Self::new(t0, t1, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    /// Time after `step` steps.
    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t1
        } else {
            self.t0 + step as f64 * self.dt()
        }
    }

    /// Quadrature point of step `i` (1-based).
    pub fn midpoint(&self, i: usize) -> f64 {
        self.t0 + (i as f64 - 0.5) * self.dt()
    }

    /// Step index whose time equals `t`; `t` must lie on the grid.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt();
        let n = x.round();
        let tol = 1e-9 * (1.0 + self.n_steps as f64);
        if !(0.0..=self.n_steps as f64).contains(&n) || (x - n).abs() > tol {
            return Err(Error::InvalidTimeGrid(format!(
                "sample time {t} is not a step of [{}, {}] with dt {}",
                self.t0,
                self.t1,
                self.dt()
            )));
        }
        Ok(n as usize)
    }
}

/// Accumulated unitary `U_k(t)` at one momentum point.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    matrix: CMatrix,
}

impl Propagator {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: linalg::identity(n),
        }
    }

    pub fn from_matrix(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.matrix)
    }
}

/// Occupied-band states sampled on a closed parameter grid at one time.
///
/// Each entry is a `dimension x n_occupied` matrix of orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: Grid,
    time: f64,
    states: Vec<CMatrix>,
}

impl StateField {
    pub fn new(grid: Grid, time: f64, states: Vec<CMatrix>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} states for a grid of {} points",
                states.len(),
                grid.len()
            )));
        }
        let shape = states[0].shape();
        if shape.1 == 0 || shape.1 > shape.0 {
            return Err(Error::InvalidInput(format!("bad state block shape {shape:?}")));
        }
        if states.iter().any(|s| s.shape() != shape) {
            return Err(Error::InvalidInput("state blocks differ in shape".into()));
        }
        Ok(Self { grid, time, states })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dimension(&self) -> usize {
        self.states[0].nrows()
    }

    pub fn n_occupied(&self) -> usize {
        self.states[0].ncols()
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn at(&self, idx: usize) -> &CMatrix {
        &self.states[idx]
    }

    /// `max_k max |ψ†ψ − 1|`.
    pub fn orthonormality_residual(&self) -> f64 {
        self.states.iter().map(linalg::unitarity_residual).fold(0.0, f64::max)
    }

    /// Multiply every occupied column at grid point `idx` by `exp(i phases(idx, n))`.
    pub fn rephased(&self, mut phase: impl FnMut(usize, usize) -> f64) -> Self {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(idx, s)| {
                let mut s = s.clone();
                for (n, mut col) in s.column_iter_mut().enumerate() {
                    let z = num_complex::Complex64::from_polar(1.0, phase(idx, n));
                    col *= z;
                }
                s
            })
            .collect();
        Self {
            grid: self.grid,
            time: self.time,
            states,
        }
    }

    /// Single-band field made of occupied column `band`.
    pub fn band(&self, band: usize) -> Self {
        Self {
            grid: self.grid,
            time: self.time,
            states: self.states.iter().map(|s| s.columns(band, 1).into_owned()).collect(),
        }
    }
}

/// `exp(−i H δt)` through the eigendecomposition `H = Q Λ Q†`.
pub fn expm_step(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    if !dt.is_finite() {
        return Err(Error::Numeric(format!("non-finite time step {dt}")));
    }
    if !linalg::is_finite(h) {
        return Err(Error::Numeric("non-finite Hamiltonian entry".into()));
    }
    if h.nrows() == 2 {
        return Ok(expm_step_2x2(h, dt));
    }
    let (values, q) = linalg::eigh(h)?;
    let mut scaled = q.clone();
    for (n, mut col) in scaled.column_iter_mut().enumerate() {
        col *= num_complex::Complex64::from_polar(1.0, -values[n] * dt);
    }
    Ok(scaled * q.adjoint())
}

fn expm_step_2x2(h: &CMatrix, dt: f64) -> CMatrix {
    let (h0, hx, hy, hz) = linalg::pauli_components(h);
    CMatrix::from_row_slice(2, 2, &expm_pauli([h0, hx, hy, hz], dt))
}

/// Closed-form spectral exponential of `h0 + h·σ`, row-major:
/// `e^{−i h0 δt} (cos(|h|δt) − i sin(|h|δt) ĥ·σ)`.
fn expm_pauli([h0, hx, hy, hz]: [f64; 4], dt: f64) -> [Complex64; 4] {
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let theta = r * dt;
    let cos = theta.cos();
    // sin(rδt)/r, finite at r = 0
    let sinc = if theta.abs() < 1e-8 {
        dt * (1.0 - theta * theta / 6.0)
    } else {
        theta.sin() / r
    };
    let phase = num_complex::Complex64::from_polar(1.0, -h0 * dt);
    let a = linalg::c(cos, -sinc * hz);
    let d = linalg::c(cos, sinc * hz);
    // −i sinc (hx ∓ i hy)
    let upper = linalg::c(-sinc * hy, -sinc * hx);
    let lower = linalg::c(sinc * hy, -sinc * hx);
    [a * phase, upper * phase, lower * phase, d * phase]
}

/// [`propagate`] for models that expose their Pauli vector, on the stack.
fn propagate_pauli(
    model: &dyn BlochModel,
    k: MomentumPoint,
    grid: &TimeGrid,
    record: &[usize],
) -> Option<Vec<CMatrix>> {
    let dt = grid.dt();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut u = [one, zero, zero, one];
    let mut out = Vec::with_capacity(record.len());
    let mut next = 0;
    let store = |u: &[Complex64; 4]| CMatrix::from_row_slice(2, 2, u);
    while next < record.len() && record[next] == 0 {
        out.push(store(&u));
        next += 1;
    }
    let mut cache: Option<([f64; 4], [Complex64; 4])> = None;
    for i in 1..=grid.n_steps() {
        if next == record.len() {
            break;
        }
        let h = model.pauli_vector(k, grid.midpoint(i))?;
        let v = match cache {
            Some((h_prev, v_prev)) if h_prev == h => v_prev,
            _ => {
                if !h.iter().all(|x| x.is_finite()) {
                    return None;
                }
                let v = expm_pauli(h, dt);
                cache = Some((h, v));
                v
            }
        };
        u = [
            v[0] * u[0] + v[1] * u[2],
            v[0] * u[1] + v[1] * u[3],
            v[2] * u[0] + v[3] * u[2],
            v[2] * u[1] + v[3] * u[3],
        ];
        while next < record.len() && record[next] == i {
            out.push(store(&u));
            next += 1;
        }
    }
    Some(out)
}

/// Propagators at the requested steps for one momentum point.
fn propagate(model: &dyn BlochModel, k: MomentumPoint, grid: &TimeGrid, record: &[usize]) -> Result<Vec<CMatrix>> {
    let dim = model.dimension();
    if dim == 2 {
        // Falls through on a non-finite entry so the general path reports it.
        if let Some(out) = propagate_pauli(model, k, grid, record) {
            return Ok(out);
        }
    }
    let dt = grid.dt();
    let mut u = linalg::identity(dim);
    let mut out = Vec::with_capacity(record.len());
    let mut next = 0;
    while next < record.len() && record[next] == 0 {
        out.push(u.clone());
        next += 1;
    }
    // Piecewise-constant stretches reuse the previous step exponential.
    let mut cache: Option<(CMatrix, CMatrix)> = None;
    for i in 1..=grid.n_steps() {
        if next == record.len() {
            break;
        }
        let h = model.evaluate(k, grid.midpoint(i));
        let v = match &cache {
            Some((h_prev, v_prev)) if *h_prev == h => v_prev.clone(),
            _ => {
                let v = expm_step(&h, dt)?;
                cache = Some((h, v.clone()));
                v
            }
        };
        u = v * u;
        while next < record.len() && record[next] == i {
            out.push(u.clone());
            next += 1;
        }
    }
    Ok(out)
}

/// Evolve the orthonormal columns `psi0` at momentum `k` across `grid`.
pub fn evolve_point(
    model: &dyn BlochModel,
    k: MomentumPoint,
    psi0: &CMatrix,
    grid: &TimeGrid,
) -> Result<(CMatrix, Propagator)> {
    if psi0.nrows() != model.dimension() {
        return Err(Error::InvalidInput(format!(
            "state has {} components, model dimension is {}",
            psi0.nrows(),
            model.dimension()
        )));
    }
    let u = propagate(model, k, grid, &[grid.n_steps()])?
        .pop()
        .expect("final step recorded");
    Ok((&u * psi0, Propagator::from_matrix(u)))
}

/// States and per-point propagators at a sequence of sample times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub fields: Vec<StateField>,
    /// `propagators[s][idx]` is `U_k(t_s)` at grid point `idx`.
    pub propagators: Vec<Vec<Propagator>>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(StateField::time).collect()
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.propagators
            .iter()
            .flatten()
            .map(Propagator::unitarity_residual)
            .fold(0.0, f64::max)
    }
}

fn sample_steps(grid: &TimeGrid, sample_times: &[f64]) -> Result<Vec<usize>> {
    let steps = sample_times
        .iter()
        .map(|&t| grid.step_of(t))
        .collect::<Result<Vec<_>>>()?;
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTimeGrid("sample times must be monotone".into()));
    }
    Ok(steps)
}

/// Evolve every grid point of `field0` and keep propagators at the samples.
///
/// Grid points never couple, so points are evolved independently (in
/// parallel) and the result does not depend on scheduling.
pub fn evolve_trajectory(
    model: &dyn BlochModel,
    field0: &StateField,
    grid: &TimeGrid,
    sample_times: &[f64],
) -> Result<Trajectory> {
    if field0.dimension() != model.dimension() {
        return Err(Error::InvalidInput(format!(
            "field dimension {} does not match model dimension {}",
            field0.dimension(),
            model.dimension()
        )));
    }
    if field0.grid().spatial_dims() != model.spatial_dims() {
        return Err(Error::InvalidInput(
            "field grid and model disagree on spatial dimension".into(),
        ));
    }
    let steps = sample_steps(grid, sample_times)?;
    let kgrid = field0.grid();
    let per_point: Vec<Vec<CMatrix>> = (0..kgrid.len())
        .into_par_iter()
        .map(|idx| propagate(model, kgrid.point(idx), grid, &steps))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let mut fields = Vec::with_capacity(steps.len());
    let mut propagators = Vec::with_capacity(steps.len());
    for (s, &step) in steps.iter().enumerate() {
        let us: Vec<Propagator> = per_point
            .iter()
            .map(|p| Propagator::from_matrix(p[s].clone()))
            .collect();
        let states = us
            .iter()
            .zip(field0.states())
            .map(|(u, psi)| u.matrix() * psi)
            .collect();
        fields.push(StateField {
            grid: kgrid,
            time: grid.time(step),
            states,
        });
        propagators.push(us);
    }
    Ok(Trajectory { fields, propagators })
}

/// One evolved field per sample time.
pub fn evolve_field(
    model: &dyn BlochModel,
    field0: &StateField,
    grid: &TimeGrid,
    sample_times: &[f64],
) -> Result<Vec<StateField>> {
    Ok(evolve_trajectory(model, field0, grid, sample_times)?.fields)
}

/// Make the largest-magnitude component of `v` real and positive.
pub fn fix_phase(v: &mut CMatrix) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, z) in col.iter().enumerate() {
            // Ties resolve to the lowest index, with slack for roundoff.
            if z.norm() > best_norm * (1.0 + 1e-12) {
                best = i;
                best_norm = z.norm();
            }
        }
        if best_norm > 0.0 {
            let z = col[best];
            col *= z.conj() / z.norm();
        }
    }
}

/// Lowest `n_occupied` eigenvectors of `H(k, t)` at every grid point.
pub fn ground_state_field(model: &dyn BlochModel, grid: Grid, t: f64, n_occupied: usize) -> Result<StateField> {
    let dim = model.dimension();
    if n_occupied == 0 || n_occupied > dim {
        return Err(Error::InvalidInput(format!(
            "n_occupied must be in 1..={dim}, got {n_occupied}"
        )));
    }
    if grid.spatial_dims() != model.spatial_dims() {
        return Err(Error::InvalidInput(
            "grid and model disagree on spatial dimension".into(),
        ));
    }
    let states = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let k = grid.point(idx);
            let (values, vectors) = linalg::eigh(&model.evaluate(k, t))?;
            if n_occupied < dim {
                let gap = values[n_occupied] - values[n_occupied - 1];
                if !(gap > MIN_GAP) {
                    return Err(Error::DegenerateSpectrum {
                        k,
                        band: n_occupied,
                        gap,
                    });
                }
            }
            let mut occ = vectors.columns(0, n_occupied).into_owned();
            fix_phase(&mut occ);
            Ok(occ)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    StateField::new(grid, t, states)
}

/// Eigenvalues of `H(k, t)` at every grid point, ascending.
pub fn spectra(model: &dyn BlochModel, grid: Grid, t: f64) -> Result<Vec<Vec<f64>>> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| Ok(linalg::eigh(&model.evaluate(grid.point(idx), t))?.0))
        .collect()
}
