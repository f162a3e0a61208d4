use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use topoquench_core::geometry::connection_decomposition_check;
use topoquench_core::{
    build_bhz, build_quench, build_trs_odd_quench, build_two_band_chern, chern_number, evolve_point, evolve_trajectory,
    ground_state_field, z2_series, Amplitude, BlochModel, Error, Grid, MomentumPoint, QuenchProtocol, StateField,
    TimeGrid,
};

type M2 = Matrix2<Complex64>;

fn pauli(x: f64, y: f64, z: f64) -> M2 {
    let c = Complex64::new;
    M2::new(c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0))
}

/// Lower-band Berry curvature of `sin kx σx + sin ky σy + (m + cos kx + cos ky) σz`
/// from the Kubo sum `Ω = −2 Im ⟨0|∂x H|1⟩⟨1|∂y H|0⟩ / (E1 − E0)²`, written with
/// band projectors so no eigenvector gauge enters.
fn kubo_curvature(m: f64, kx: f64, ky: f64) -> f64 {
    let (sx, cx) = kx.sin_cos();
    let (sy, cy) = ky.sin_cos();
    let d = [sx, sy, m + cx + cy];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let half = Complex64::new(0.5, 0.0);
    let id = M2::identity();
    let dh = pauli(d[0], d[1], d[2]) / Complex64::new(norm, 0.0);
    let p0 = (id - dh) * half;
    let p1 = (id + dh) * half;
    let hx = pauli(cx, 0.0, -sx);
    let hy = pauli(0.0, cy, -sy);
    let t = (p0 * hx * p1 * hy).trace();
    -2.0 * t.im / (4.0 * norm * norm)
}

fn kubo_chern(m: f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            sum += kubo_curvature(m, -PI + (i as f64 + 0.5) * h, -PI + (j as f64 + 0.5) * h);
        }
    }
    sum * h * h / (2.0 * PI)
}

#[test]
fn lattice_chern_matches_dense_kubo_integration() {
    for m in [-3.0, -1.5, -1.0, -0.5, 0.5, 1.0, 3.0] {
        let oracle = kubo_chern(m, 400);
        let rounded = oracle.round();
        assert!((oracle - rounded).abs() < 1e-3, "m={m}: oracle {oracle}");
        let model = build_two_band_chern(m).unwrap();
        let f = ground_state_field(&model, Grid::torus(40, 40).unwrap(), 0.0, 1).unwrap();
        assert_eq!(chern_number(&f).unwrap(), rounded as i64, "m={m}");
    }
    assert_eq!(kubo_chern(-1.0, 400).round(), 1.0);
    assert_eq!(kubo_chern(1.0, 400).round(), -1.0);
}

#[test]
fn bhz_blocks_carry_opposite_kubo_chern() {
    use topoquench_core::invariants::spin_resolved_fields;
    let bhz = build_bhz(-1.0).unwrap();
    let f = ground_state_field(&bhz, Grid::torus(24, 24).unwrap(), 0.0, 2).unwrap();
    let (up, down) = spin_resolved_fields(&f).unwrap();
    let c = kubo_chern(-1.0, 400).round() as i64;
    assert_eq!(chern_number(&up).unwrap(), c);
    assert_eq!(chern_number(&down).unwrap(), -c);
}

fn state_error(a: &StateField, b: &StateField) -> f64 {
    a.states()
        .iter()
        .zip(b.states())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn midpoint_rule_is_second_order() {
    let q = build_quench(
        Arc::new(build_two_band_chern(-1.0).unwrap()),
        Arc::new(build_two_band_chern(3.0).unwrap()),
        QuenchProtocol::smooth_tanh(0.0, 2.0, 0.4),
    )
    .unwrap();
    let grid = Grid::torus(8, 8).unwrap();
    let f0 = ground_state_field(&q, grid, 0.0, 1).unwrap();
    let at = |n: usize| {
        let tg = TimeGrid::new(0.0, 2.0, n).unwrap();
        evolve_trajectory(&q, &f0, &tg, &[2.0]).unwrap().fields.pop().unwrap()
    };
    let reference = at(8 * 400);
    let errors: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&n| state_error(&at(n), &reference))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "errors {errors:?}");
    }
    // Richardson at n and 2n
    let (a, b, c) = (at(100), at(200), at(400));
    let ratio = state_error(&a, &b) / state_error(&b, &c);
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn lz_evolution_is_second_order_at_a_point() {
    let model = topoquench_core::build_lz_parameterized(1.0, 0.7).unwrap();
    let k = MomentumPoint::new1(0.3);
    let psi0 = ground_state_field(&model, Grid::loop_of(4).unwrap(), -6.0, 1)
        .unwrap()
        .at(1)
        .clone();
    let at = |n: usize| {
        evolve_point(&model, k, &psi0, &TimeGrid::new(-6.0, 6.0, n).unwrap())
            .unwrap()
            .0
    };
    let reference = at(8 * 2400);
    let e1 = (at(1200) - &reference).norm();
    let e2 = (at(2400) - &reference).norm();
    assert!(((e1 / e2).log2() - 2.0).abs() < 0.1, "{e1} {e2}");
}

#[test]
fn static_evolution_conserves_energy_and_overlaps() {
    let bhz = build_bhz(-1.0).unwrap();
    let grid = Grid::torus(6, 6).unwrap();
    let f0 = ground_state_field(&bhz, grid, 0.0, 2).unwrap();
    // A superposition of bands so the energy check is not trivially stationary.
    let mixed: Vec<_> = f0
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let h = bhz.evaluate(grid.point(i), 0.0);
            let (_, q) = topoquench_core::linalg::eigh(&h).unwrap();
            let mut s = s.clone();
            let w = (0.2 + 0.01 * i as f64).sin();
            let col = s.column(0) * Complex64::new(w.cos(), 0.0) + q.column(3) * Complex64::new(w.sin(), 0.0);
            s.set_column(0, &col);
            let col = s.column(1).into_owned();
            let proj = s.column(0).dotc(&col);
            let col = &col - s.column(0) * proj;
            s.set_column(1, &(&col / Complex64::new(col.norm(), 0.0)));
            s
        })
        .collect();
    let f0 = StateField::new(grid, 0.0, mixed).unwrap();
    let tg = TimeGrid::new(0.0, 100.0, 10_000).unwrap();
    let tr = evolve_trajectory(&bhz, &f0, &tg, &[100.0]).unwrap();
    let ft = &tr.fields[0];
    for i in 0..grid.len() {
        let h = bhz.evaluate(grid.point(i), 0.0);
        let (a, b) = (f0.at(i), ft.at(i));
        let e0 = (a.adjoint() * &h * a).trace().re;
        let e1 = (b.adjoint() * &h * b).trace().re;
        assert!((e1 - e0).abs() < 1e-9, "energy drift {}", e1 - e0);
        let gram = b.adjoint() * b - nalgebra::DMatrix::<Complex64>::identity(2, 2);
        assert!(gram.iter().all(|z| z.norm() < 1e-9));
        assert!(tr.propagators[0][i].unitarity_residual() < 1e-10);
    }
}

fn decomposition_residual(n: usize) -> f64 {
    let q = build_quench(
        Arc::new(build_two_band_chern(-1.0).unwrap()),
        Arc::new(build_two_band_chern(3.0).unwrap()),
        QuenchProtocol::sudden(0.0),
    )
    .unwrap();
    let f0 = ground_state_field(&q, Grid::torus(n, n).unwrap(), 0.0, 1).unwrap();
    let tr = evolve_trajectory(&q, &f0, &TimeGrid::with_step(0.0, 1.0, 0.01).unwrap(), &[1.0]).unwrap();
    let mut worst = 0.0_f64;
    for direction in 0..2 {
        worst = worst.max(connection_decomposition_check(&f0, &tr.propagators[0], &tr.fields[0], direction).unwrap());
    }
    worst
}

#[test]
fn connection_decomposition_refines_quadratically() {
    let coarse = decomposition_residual(64);
    let fine = decomposition_residual(128);
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.4, "{coarse} {fine} ratio {ratio}");
}

#[test]
#[ignore = "red: the link-phase connection carries an O(δk²) error of 2.4e-3 at 64x64"]
fn connection_decomposition_at_64_is_below_1e3() {
    let r = decomposition_residual(64);
    assert!(r < 1e-3, "{r}");
}

#[test]
fn connection_decomposition_trivial_cases() {
    use topoquench_core::Propagator;
    let model = build_two_band_chern(-1.0).unwrap();
    let f0 = ground_state_field(&model, Grid::torus(16, 16).unwrap(), 0.0, 1).unwrap();
    let identity = vec![Propagator::from_matrix(nalgebra::DMatrix::identity(2, 2)); 256];
    assert!(connection_decomposition_check(&f0, &identity, &f0, 0).unwrap() < 1e-12);
    assert!(matches!(
        connection_decomposition_check(&f0, &identity[..10], &f0, 0),
        Err(Error::InvalidInput(_))
    ));
    // A k-independent generator leaves the connection where it was.
    let u = topoquench_core::expm_step(&topoquench_core::linalg::pauli(0.3, 0.2, -0.7, 0.5), 1.3).unwrap();
    let rotated: Vec<_> = f0.states().iter().map(|s| &u * s).collect();
    let ft = StateField::new(f0.grid(), 1.3, rotated).unwrap();
    let same = vec![Propagator::from_matrix(u); 256];
    for direction in 0..2 {
        assert!(connection_decomposition_check(&f0, &same, &ft, direction).unwrap() < 1e-12);
    }
}

#[test]
fn trs_even_quench_breaks_pairing() {
    let bhz = build_bhz(-1.0).unwrap();
    let even = build_quench(
        Arc::new(bhz),
        Arc::new(build_bhz(3.0).unwrap()),
        QuenchProtocol::sudden(0.0),
    )
    .unwrap();
    let f0 = ground_state_field(&bhz, Grid::torus(16, 16).unwrap(), 0.0, 2).unwrap();
    let tg = TimeGrid::with_step(0.0, 2.0, 0.01).unwrap();
    let err = z2_series(&even, &f0, &tg, &[0.0, 1.0, 2.0], &bhz.trs()).unwrap_err();
    assert!(matches!(err, Error::SymmetryViolation { .. }), "{err:?}");

    // Evolving anyway leaves fields the half-zone index refuses.
    let tr = evolve_trajectory(&even, &f0, &tg, &[1.0]).unwrap();
    let err = topoquench_core::z2_half_bz(&tr.fields[0], &bhz.trs()).unwrap_err();
    assert!(matches!(err, Error::SymmetryViolation { .. }), "{err:?}");
}

#[test]
fn trs_odd_quench_with_zero_amplitude_is_trivially_constant() {
    let bhz = build_bhz(-1.0).unwrap();
    let gen = build_trs_odd_quench(
        &bhz,
        Arc::new(build_two_band_chern(3.0).unwrap()),
        Amplitude::Constant(0.0),
    )
    .unwrap();
    let f0 = ground_state_field(&bhz, Grid::torus(12, 12).unwrap(), 0.0, 2).unwrap();
    let tg = TimeGrid::with_step(0.0, 1.0, 0.05).unwrap();
    let (series, tr) = z2_series(&gen, &f0, &tg, &[0.0, 0.5, 1.0], &bhz.trs()).unwrap();
    assert_eq!(series.constant_z2(), Some(1));
    assert!(tr.fields.iter().all(|f| f.states() == f0.states()));
}
