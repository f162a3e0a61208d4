//! Lattice topological indexes and their time series under quench.
//!
//! Chern numbers use normalized link variables `U_μ(k) = det⟨ψ(k)|ψ(k+δ_μ)⟩/|·|`
//! and plaquette fluxes `F_p = −arg(U_x(k) U_y(k+x) U_x(k+y)* U_y(k)*)`, which
//! sum to `2π C` exactly. The Z2 index is evaluated on the half zone
//! `ky ∈ [−π, 0]` with the Kramers gauge `ψ(−k) = Tψ(k)` imposed on its two
//! time-reversal-invariant rows and a Kramers-pair basis at the invariant
//! momenta.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{evolve_trajectory, fix_phase, StateField, TimeGrid, Trajectory};
use crate::geometry::{link_overlap, ADMISSIBILITY_FLOOR};
use crate::grid::{Grid, MomentumPoint};
use crate::linalg::{self, CMatrix};
use crate::models::{BlochModel, TrsOperator};
use crate::symmetry::check_trs_quench;

/// Tolerance for dynamical time-reversal pairing of occupied subspaces.
pub const PAIRING_TOLERANCE: f64 = 1e-8;

/// Smallest link overlap of a field and the link it sits on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstLink {
    pub overlap: f64,
    pub k: MomentumPoint,
    pub direction: usize,
    pub time: f64,
}

impl WorstLink {
    fn from_error(e: &Error) -> Option<Self> {
        match *e {
            Error::InadmissibleGrid {
                k,
                direction,
                overlap,
                time,
                ..
            } => Some(WorstLink {
                overlap,
                k,
                direction,
                time: time.unwrap_or(f64::NAN),
            }),
            _ => None,
        }
    }

    fn lower(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.overlap < x.overlap { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

/// Link variables and plaquette fluxes of a torus field.
#[derive(Debug, Clone)]
pub struct PlaquetteField {
    pub grid: Grid,
    pub time: f64,
    /// Normalized `U_x` on the link leaving each grid point in `+x`.
    pub link_x: Vec<Complex64>,
    pub link_y: Vec<Complex64>,
    /// Flux of the plaquette whose lower-left corner is each grid point.
    pub flux: Vec<f64>,
    /// Smallest un-normalized link magnitude.
    pub worst_link: WorstLink,
}

impl PlaquetteField {
    /// `Σ_p F_p / 2π` before rounding, summed in grid order.
    pub fn total_flux(&self) -> f64 {
        self.flux.iter().sum::<f64>() / (2.0 * PI)
    }
}

fn require_torus(grid: Grid) -> Result<(usize, usize)> {
    match grid {
        Grid::Torus { nx, ny } => Ok((nx, ny)),
        Grid::Loop { .. } => Err(Error::InvalidInput("lattice index needs a torus field".into())),
    }
}

/// Links of `field` along both directions, failing on the worst
/// inadmissible link.
fn links(field: &StateField) -> Result<(Vec<Complex64>, Vec<Complex64>, WorstLink)> {
    let grid = field.grid();
    let raw: Vec<(Complex64, Complex64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let psi = field.at(idx);
            (
                link_overlap(psi, field.at(grid.neighbor(idx, 0, 1))),
                link_overlap(psi, field.at(grid.neighbor(idx, 1, 1))),
            )
        })
        .collect();
    let mut worst = (f64::INFINITY, 0, 0);
    for (idx, (ox, oy)) in raw.iter().enumerate() {
        for (direction, o) in [(0, ox), (1, oy)] {
            if o.norm() < worst.0 {
                worst = (o.norm(), idx, direction);
            }
        }
    }
    if !(worst.0 > ADMISSIBILITY_FLOOR) {
        return Err(Error::InadmissibleGrid {
            k: grid.point(worst.1),
            direction: worst.2,
            overlap: worst.0,
            floor: ADMISSIBILITY_FLOOR,
            time: Some(field.time()),
        });
    }
    let (lx, ly) = raw.into_iter().map(|(x, y)| (x / x.norm(), y / y.norm())).unzip();
    let worst = WorstLink {
        overlap: worst.0,
        k: grid.point(worst.1),
        direction: worst.2,
        time: field.time(),
    };
    Ok((lx, ly, worst))
}

fn plaquette_flux(grid: Grid, lx: &[Complex64], ly: &[Complex64], idx: usize) -> f64 {
    let right = grid.neighbor(idx, 0, 1);
    let up = grid.neighbor(idx, 1, 1);
    -(lx[idx] * ly[right] * lx[up].conj() * ly[idx].conj()).arg()
}

pub fn plaquette_field(field: &StateField) -> Result<PlaquetteField> {
    let grid = field.grid();
    require_torus(grid)?;
    let (link_x, link_y, worst_link) = links(field)?;
    let flux = (0..grid.len())
        .map(|idx| plaquette_flux(grid, &link_x, &link_y, idx))
        .collect();
    Ok(PlaquetteField {
        grid,
        time: field.time(),
        link_x,
        link_y,
        flux,
        worst_link,
    })
}

/// Total Chern number of the occupied bands of a torus field.
pub fn chern_number(field: &StateField) -> Result<i64> {
    Ok(chern_with_diagnostics(field)?.0)
}

/// Chern number and the smallest link overlap.
pub fn chern_with_diagnostics(field: &StateField) -> Result<(i64, WorstLink)> {
    let plaquettes = plaquette_field(field)?;
    let c = plaquettes.total_flux();
    let rounded = c.round();
    if (c - rounded).abs() > 1e-9 {
        return Err(Error::Numeric(format!("plaquette flux sum {c} is not integral")));
    }
    Ok((rounded as i64, plaquettes.worst_link))
}

/// `((C↑ − C↓)/2) mod 2`, defined when `C↑ + C↓ = 0`.
pub fn spin_chern_z2(c_up: i64, c_down: i64) -> Result<u8> {
    if c_up + c_down != 0 {
        return Err(Error::SymmetryViolation {
            check: "spin Chern pairing C_up + C_down = 0".into(),
            residual: (c_up + c_down).abs() as f64,
            k: None,
        });
    }
    Ok(((c_up - c_down) / 2).rem_euclid(2) as u8)
}

fn projector(states: &CMatrix) -> CMatrix {
    states * states.adjoint()
}

/// `max_k |P(−k) − T P(k) T⁻¹|` over the occupied projectors, with the
/// grid index where it is attained. Projectors quotient out the gauge freedom
/// within each Kramers multiplet.
pub fn pairing_residual(field: &StateField, trs: &TrsOperator) -> (f64, usize) {
    let grid = field.grid();
    let residuals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = projector(field.at(idx));
            let partner = projector(field.at(grid.partner(idx)));
            linalg::max_abs_diff(&partner, &trs.conjugate(&p))
        })
        .collect();
    residuals
        .iter()
        .enumerate()
        .fold((0.0, 0), |acc, (idx, &r)| if r > acc.0 { (r, idx) } else { acc })
}

/// Occupied states of the two spin blocks of a block-diagonal field with one
/// occupied band per block; returned as two-component fields.
pub fn spin_resolved_fields(field: &StateField) -> Result<(StateField, StateField)> {
    if !field.dimension().is_multiple_of(2) {
        return Err(Error::InvalidInput("spin resolution needs an even dimension".into()));
    }
    if field.n_occupied() != 2 {
        return Err(Error::InvalidInput(format!(
            "spin resolution expects one occupied band per spin block, got {} occupied",
            field.n_occupied()
        )));
    }
    let half = field.dimension() / 2;
    let grid = field.grid();
    let mut up = Vec::with_capacity(grid.len());
    let mut down = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let p = projector(field.at(idx));
        for (offset, out) in [(0, &mut up), (half, &mut down)] {
            let block = p.view((offset, offset), (half, half)).into_owned();
            let (values, vectors) = linalg::eigh(&block)?;
            let leak = values[..half - 1].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let deficit = (1.0 - values[half - 1]).abs();
            if deficit > PAIRING_TOLERANCE || leak > PAIRING_TOLERANCE {
                return Err(Error::SymmetryViolation {
                    check: "spin block separation of the occupied subspace".into(),
                    residual: deficit.max(leak),
                    k: Some(grid.point(idx)),
                });
            }
            let mut v = vectors.columns(half - 1, 1).into_owned();
            fix_phase(&mut v);
            out.push(v);
        }
    }
    Ok((
        StateField::new(grid, field.time(), up)?,
        StateField::new(grid, field.time(), down)?,
    ))
}

/// Result of a half-zone Z2 evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Z2Outcome {
    pub value: u8,
    pub pairing_residual: f64,
    pub worst_link: WorstLink,
}

/// Z2 index from the half zone `B⁻ = [−π, π) × [−π, 0]`:
/// `(1/2π) [Σ_{∂B⁻} A − Σ_{B⁻} F] mod 2` with the boundary in Kramers gauge.
pub fn z2_half_bz(field: &StateField, trs: &TrsOperator) -> Result<u8> {
    Ok(z2_half_bz_report(field, trs)?.value)
}

pub fn z2_half_bz_report(field: &StateField, trs: &TrsOperator) -> Result<Z2Outcome> {
    let grid = field.grid();
    let (nx, ny) = require_torus(grid)?;
    if nx % 2 != 0 || ny % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "half-zone Z2 needs even grid sizes to contain the invariant momenta, got {nx}x{ny}"
        )));
    }
    if !field.n_occupied().is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "Kramers pairs need an even number of occupied bands".into(),
        ));
    }
    if trs.dimension() != field.dimension() {
        return Err(Error::InvalidInput("TRS operator and field dimensions differ".into()));
    }
    if linalg::max_abs_diff(&trs.square(), &(-linalg::identity(trs.dimension()))) > 1e-12 {
        return Err(Error::InvalidInput("half-zone Z2 requires T² = −1".into()));
    }
    let (pairing, worst) = pairing_residual(field, trs);
    if !(pairing < PAIRING_TOLERANCE) {
        return Err(Error::SymmetryViolation {
            check: "dynamical TRS pairing ψ(−k) = Tψ(k)".into(),
            residual: pairing,
            k: Some(grid.point(worst)),
        });
    }

    // Kramers gauge on the rows ky = −π (j = 0) and ky = 0 (j = ny/2).
    let mut states = field.states().to_vec();
    for j in [0, ny / 2] {
        for i in 0..nx {
            let idx = grid.index(i, j);
            let partner = grid.partner(idx);
            if partner == idx {
                // Invariant momentum: Kramers-pair basis, Pf(ψ† Tψ) = (−1)^pairs.
                let psi = &states[idx];
                let target = if field.n_occupied().is_multiple_of(4) {
                    1.0
                } else {
                    -1.0
                };
                let pf = linalg::pfaffian(&(psi.adjoint() * trs.apply(psi)))?;
                let mut fixed = psi.clone();
                let mut col = fixed.column_mut(0);
                col *= Complex64::from_polar(1.0, (pf * target).arg());
                states[idx] = fixed;
            } else if i < nx / 2 {
                states[partner] = trs.apply(&states[idx]);
            }
        }
    }
    let gauged = StateField::new(grid, field.time(), states)?;

    // Links and plaquettes restricted to rows 0..=ny/2.
    let rows = ny / 2;
    let mut worst_link = WorstLink {
        overlap: f64::INFINITY,
        k: grid.point(0),
        direction: 0,
        time: field.time(),
    };
    let mut link = |idx: usize, direction: usize| -> Result<Complex64> {
        let o = link_overlap(gauged.at(idx), gauged.at(grid.neighbor(idx, direction, 1)));
        if o.norm() < worst_link.overlap {
            worst_link.overlap = o.norm();
            worst_link.k = grid.point(idx);
            worst_link.direction = direction;
        }
        if !(o.norm() > ADMISSIBILITY_FLOOR) {
            return Err(Error::InadmissibleGrid {
                k: grid.point(idx),
                direction,
                overlap: o.norm(),
                floor: ADMISSIBILITY_FLOOR,
                time: Some(field.time()),
            });
        }
        Ok(o / o.norm())
    };
    let mut lx = vec![Complex64::new(1.0, 0.0); grid.len()];
    let mut ly = vec![Complex64::new(1.0, 0.0); grid.len()];
    for j in 0..=rows {
        for i in 0..nx {
            let idx = grid.index(i, j);
            lx[idx] = link(idx, 0)?;
            if j < rows {
                ly[idx] = link(idx, 1)?;
            }
        }
    }
    // On the Kramers rows the link k → k+δ equals its partner −k−δ → −k
    // exactly; share one value so a phase at ±π cannot split across the cut.
    for j in [0, rows] {
        for i in 0..nx {
            let partner = grid.coords(grid.partner(grid.index((i + 1) % nx, j))).0;
            if partner > i {
                lx[grid.index(partner, j)] = lx[grid.index(i, j)];
            }
        }
    }
    let mut vortices = 0_i64;
    for j in 0..rows {
        for i in 0..nx {
            let idx = grid.index(i, j);
            let right = grid.neighbor(idx, 0, 1);
            let up = grid.neighbor(idx, 1, 1);
            let circulation = lx[idx].arg() + ly[right].arg() - lx[up].arg() - ly[idx].arg();
            let flux = (lx[idx] * ly[right] * lx[up].conj() * ly[idx].conj()).arg();
            let n = (circulation - flux) / (2.0 * PI);
            let rounded = n.round();
            if (n - rounded).abs() > 1e-9 {
                return Err(Error::Numeric(format!("non-integral vortex number {n}")));
            }
            vortices += rounded as i64;
        }
    }
    Ok(Z2Outcome {
        value: vortices.rem_euclid(2) as u8,
        pairing_residual: pairing,
        worst_link,
    })
}

/// One time sample of an invariant series. `failure` is set instead of the
/// values when the lattice evaluation was not admissible (or violated a
/// symmetry requirement) at that time.
#[derive(Debug, Clone)]
pub struct InvariantSample {
    pub time: f64,
    pub chern: Option<i64>,
    pub c_up: Option<i64>,
    pub c_down: Option<i64>,
    /// Spin-Chern parity `(C↑ − C↓)/2 mod 2`.
    pub z2_spin: Option<u8>,
    /// Half-zone Z2.
    pub z2: Option<u8>,
    pub pairing_residual: Option<f64>,
    /// Smallest link overlap seen by any of the evaluations at this time.
    pub worst_link: Option<WorstLink>,
    pub failure: Option<Error>,
}

impl InvariantSample {
    fn empty(time: f64) -> Self {
        Self {
            time,
            chern: None,
            c_up: None,
            c_down: None,
            z2_spin: None,
            z2: None,
            pairing_residual: None,
            worst_link: None,
            failure: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvariantSeries {
    pub grid: Grid,
    pub samples: Vec<InvariantSample>,
}

fn single_value<T: PartialEq + Copy>(values: impl Iterator<Item = Option<T>>) -> Option<T> {
    let mut first = None;
    for v in values {
        let v = v?;
        match first {
            None => first = Some(v),
            Some(f) if f != v => return None,
            _ => {}
        }
    }
    first
}

impl InvariantSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn first_failure(&self) -> Option<&Error> {
        self.samples.iter().find_map(|s| s.failure.as_ref())
    }

    pub fn admissible(&self) -> bool {
        self.first_failure().is_none()
    }

    /// The Chern value if every sample is admissible and all agree.
    pub fn constant_chern(&self) -> Option<i64> {
        if !self.admissible() {
            return None;
        }
        single_value(self.samples.iter().map(|s| s.chern))
    }

    pub fn constant_z2(&self) -> Option<u8> {
        if !self.admissible() {
            return None;
        }
        single_value(self.samples.iter().map(|s| s.z2))
    }

    pub fn constant_z2_spin(&self) -> Option<u8> {
        if !self.admissible() {
            return None;
        }
        single_value(self.samples.iter().map(|s| s.z2_spin))
    }

    pub fn worst_link(&self) -> Option<WorstLink> {
        self.samples
            .iter()
            .fold(None, |acc, s| WorstLink::lower(acc, s.worst_link))
    }

    /// Smallest link overlap over all samples; infinite if none was measured.
    pub fn min_overlap(&self) -> f64 {
        self.worst_link().map_or(f64::INFINITY, |w| w.overlap)
    }
}

/// Chern numbers of every snapshot of a trajectory.
pub fn chern_series_from(trajectory: &Trajectory) -> InvariantSeries {
    let grid = trajectory.fields[0].grid();
    let samples = trajectory
        .fields
        .iter()
        .map(|f| {
            let mut s = InvariantSample::empty(f.time());
            match chern_with_diagnostics(f) {
                Ok((c, worst)) => {
                    s.chern = Some(c);
                    s.worst_link = Some(worst);
                }
                Err(e) => {
                    s.worst_link = WorstLink::from_error(&e);
                    s.failure = Some(e);
                }
            }
            s
        })
        .collect();
    InvariantSeries { grid, samples }
}

/// Evolve `initial` under `model` and record `C(t)` at the sample times.
///
/// The initial field must be admissible; later inadmissibility is recorded
/// per sample rather than returned as an error.
pub fn chern_series(
    model: &dyn BlochModel,
    initial: &StateField,
    time_grid: &TimeGrid,
    sample_times: &[f64],
) -> Result<(InvariantSeries, Trajectory)> {
    chern_number(initial)?;
    let trajectory = evolve_trajectory(model, initial, time_grid, sample_times)?;
    Ok((chern_series_from(&trajectory), trajectory))
}

fn record_failure(e: Error, s: &mut InvariantSample) {
    s.worst_link = WorstLink::lower(s.worst_link, WorstLink::from_error(&e));
    s.failure.get_or_insert(e);
}

fn fill_spin(f: &StateField, s: &mut InvariantSample) {
    let spin = spin_resolved_fields(f).and_then(|(up, down)| {
        let (cu, wu) = chern_with_diagnostics(&up)?;
        let (cd, wd) = chern_with_diagnostics(&down)?;
        Ok((cu, cd, WorstLink::lower(Some(wu), Some(wd))))
    });
    match spin {
        Ok((cu, cd, worst)) => {
            s.c_up = Some(cu);
            s.c_down = Some(cd);
            s.worst_link = WorstLink::lower(s.worst_link, worst);
            match spin_chern_z2(cu, cd) {
                Ok(z) => s.z2_spin = Some(z),
                Err(e) => record_failure(e, s),
            }
        }
        Err(e) => record_failure(e, s),
    }
}

/// Per-block Chern numbers and spin-Chern parity of every snapshot of a
/// block-diagonal trajectory.
pub fn spin_chern_series_from(trajectory: &Trajectory) -> InvariantSeries {
    let grid = trajectory.fields[0].grid();
    let samples = trajectory
        .fields
        .iter()
        .map(|f| {
            let mut s = InvariantSample::empty(f.time());
            fill_spin(f, &mut s);
            s
        })
        .collect();
    InvariantSeries { grid, samples }
}

/// Half-zone Z2 and, when the field is spin-separable, per-block Chern
/// numbers of every snapshot.
pub fn z2_series_from(trajectory: &Trajectory, trs: &TrsOperator, spin_blocks: bool) -> InvariantSeries {
    let grid = trajectory.fields[0].grid();
    let samples = trajectory
        .fields
        .iter()
        .map(|f| {
            let mut s = InvariantSample::empty(f.time());
            match z2_half_bz_report(f, trs) {
                Ok(z) => {
                    s.z2 = Some(z.value);
                    s.pairing_residual = Some(z.pairing_residual);
                    s.worst_link = Some(z.worst_link);
                }
                Err(e) => {
                    s.pairing_residual = Some(pairing_residual(f, trs).0);
                    record_failure(e, &mut s);
                }
            }
            if spin_blocks {
                fill_spin(f, &mut s);
            }
            s
        })
        .collect();
    InvariantSeries { grid, samples }
}

/// Evolve a time-reversal-paired initial field under a TRS-odd generator
/// and record `C2(t)`.
pub fn z2_series(
    generator: &dyn BlochModel,
    initial: &StateField,
    time_grid: &TimeGrid,
    sample_times: &[f64],
    trs: &TrsOperator,
) -> Result<(InvariantSeries, Trajectory)> {
    let times: Vec<f64> = sample_times.to_vec();
    let report = check_trs_quench(generator, trs, &times);
    if !report.pass {
        return Err(Error::SymmetryViolation {
            check: report.check,
            residual: report.max_residual,
            k: report.worst_k,
        });
    }
    z2_half_bz(initial, trs)?;
    let trajectory = evolve_trajectory(generator, initial, time_grid, sample_times)?;
    let spin_blocks = generator.symmetry_tags().block_diagonal_spin;
    Ok((z2_series_from(&trajectory, trs, spin_blocks), trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::ground_state_field;
    use crate::models::{build_bhz, build_two_band_chern};

    fn product_field(grid: Grid, dim: usize, n_occ: usize) -> StateField {
        let states = vec![linalg::identity(dim).columns(0, n_occ).into_owned(); grid.len()];
        StateField::new(grid, 0.0, states).unwrap()
    }

    #[test]
    fn product_state_is_trivial() {
        let f = product_field(Grid::torus(8, 8).unwrap(), 2, 1);
        assert_eq!(chern_number(&f).unwrap(), 0);
    }

    #[test]
    fn spin_chern_arithmetic() {
        assert_eq!(spin_chern_z2(1, -1).unwrap(), 1);
        assert_eq!(spin_chern_z2(0, 0).unwrap(), 0);
        assert_eq!(spin_chern_z2(2, -2).unwrap(), 0);
        assert_eq!(spin_chern_z2(-1, 1).unwrap(), 1);
        assert!(matches!(spin_chern_z2(1, 1), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn full_bhz_basis_has_zero_chern() {
        let bhz = build_bhz(-1.0).unwrap();
        let f = ground_state_field(&bhz, Grid::torus(16, 16).unwrap(), 0.0, 4).unwrap();
        assert_eq!(chern_number(&f).unwrap(), 0);
    }

    #[test]
    fn flux_sum_is_integral_before_rounding() {
        let model = build_two_band_chern(-1.0).unwrap();
        let f = ground_state_field(&model, Grid::torus(20, 20).unwrap(), 0.0, 1).unwrap();
        let c = plaquette_field(&f).unwrap().total_flux();
        assert!((c - c.round()).abs() < 1e-9);
        assert_eq!(c.round().abs(), 1.0);
    }

    #[test]
    fn inadmissible_link_is_reported() {
        let grid = Grid::torus(4, 4).unwrap();
        let mut states = vec![linalg::identity(2).columns(0, 1).into_owned(); grid.len()];
        states[5] = linalg::identity(2).columns(1, 1).into_owned();
        let f = StateField::new(grid, 0.0, states).unwrap();
        match chern_number(&f) {
            Err(Error::InadmissibleGrid { overlap, .. }) => assert!(overlap < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bhz_half_zone_z2_matches_spin_chern() {
        for (m, expected) in [(-1.0, 1), (3.0, 0), (1.0, 1)] {
            let bhz = build_bhz(m).unwrap();
            let f = ground_state_field(&bhz, Grid::torus(16, 16).unwrap(), 0.0, 2).unwrap();
            let z2 = z2_half_bz(&f, &bhz.trs()).unwrap();
            let (up, down) = spin_resolved_fields(&f).unwrap();
            let spin = spin_chern_z2(chern_number(&up).unwrap(), chern_number(&down).unwrap()).unwrap();
            assert_eq!(z2, expected, "m = {m}");
            assert_eq!(spin, expected, "m = {m}");
        }
    }

    #[test]
    fn z2_survives_random_frame_rotations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (m, expected) in [(-1.0, 1), (3.0, 0)] {
            let bhz = build_bhz(m).unwrap();
            let f = ground_state_field(&bhz, Grid::torus(12, 12).unwrap(), 0.0, 2).unwrap();
            for _ in 0..10 {
                let states = f
                    .states()
                    .iter()
                    .map(|s| {
                        let h = linalg::pauli(
                            0.0,
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                        );
                        let phase = Complex64::from_polar(1.0, rng.random_range(-PI..PI));
                        s * crate::evolve::expm_step(&h, 1.0).unwrap() * phase
                    })
                    .collect();
                let g = StateField::new(f.grid(), 0.0, states).unwrap();
                assert_eq!(z2_half_bz(&g, &bhz.trs()).unwrap(), expected, "m = {m}");
            }
        }
    }

    #[test]
    fn z2_stays_put_under_trs_odd_quench() {
        use crate::models::{build_trs_odd_quench, Amplitude, ModelRef, QuenchProtocol};
        let bhz = build_bhz(-1.0).unwrap();
        let v_up: ModelRef = std::sync::Arc::new(build_two_band_chern(3.0).unwrap());
        let gen = build_trs_odd_quench(&bhz, v_up, Amplitude::Ramp(QuenchProtocol::sudden(0.0))).unwrap();
        let f0 = ground_state_field(&bhz, Grid::torus(16, 16).unwrap(), 0.0, 2).unwrap();
        let tg = TimeGrid::with_step(0.0, 4.0, 0.01).unwrap();
        let times: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
        let (series, _) = z2_series(&gen, &f0, &tg, &times, &bhz.trs()).unwrap();
        assert_eq!(series.constant_z2(), Some(1));
        assert_eq!(series.constant_z2_spin(), Some(1));
    }

    #[test]
    fn atomic_limit_z2_is_zero() {
        // Occupy one orbital of each spin: a k-independent Kramers pair.
        let grid = Grid::torus(8, 8).unwrap();
        let mut occ = linalg::zeros(4, 2);
        occ[(0, 0)] = linalg::ONE;
        occ[(2, 1)] = linalg::ONE;
        let f = StateField::new(grid, 0.0, vec![occ; grid.len()]).unwrap();
        assert_eq!(z2_half_bz(&f, &TrsOperator::spinful(2)).unwrap(), 0);
    }

    #[test]
    fn odd_grids_and_odd_occupation_rejected() {
        let bhz = build_bhz(-1.0).unwrap();
        let f = ground_state_field(&bhz, Grid::torus(9, 8).unwrap(), 0.0, 2).unwrap();
        assert!(matches!(z2_half_bz(&f, &bhz.trs()), Err(Error::InvalidGrid(_))));
        let f = ground_state_field(&bhz, Grid::torus(8, 8).unwrap(), 0.0, 1);
        // the occupied Kramers pair is degenerate, so a single band is ill-posed
        assert!(f.is_err());
    }
}
