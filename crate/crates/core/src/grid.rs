//! Momentum points and the discretized closed parameter spaces they live on.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// A crystal momentum (or loop parameter) with one or two components.
///
/// Units are those of a unit lattice constant; components are kept in
/// `[-π, π)` by [`MomentumPoint::wrapped`]. Points that differ by `2π` in any
/// component describe the same physical state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumPoint {
    coords: [f64; 2],
    dims: u8,
}

impl MomentumPoint {
    pub fn new1(lambda: f64) -> Self {
        Self {
            coords: [lambda, 0.0],
            dims: 1,
        }
    }

    pub fn new2(kx: f64, ky: f64) -> Self {
        Self {
            coords: [kx, ky],
            dims: 2,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims as usize
    }

    /// Component `mu`; components past `dims` read as zero.
    pub fn get(&self, mu: usize) -> f64 {
        self.coords[mu]
    }

    pub fn kx(&self) -> f64 {
        self.coords[0]
    }

    pub fn ky(&self) -> f64 {
        self.coords[1]
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: [-self.coords[0], -self.coords[1]],
            dims: self.dims,
        }
    }

    /// Shift component `mu` by `delta`.
    pub fn shifted(&self, mu: usize, delta: f64) -> Self {
        let mut out = *self;
        out.coords[mu] += delta;
        out
    }

    /// Representative with every component in `[-π, π)`.
    pub fn wrapped(&self) -> Self {
        let mut out = *self;
        for x in out.coords.iter_mut().take(self.dims()) {
            *x = wrap_angle(*x);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }
}

impl fmt::Display for MomentumPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dims {
            1 => write!(f, "({:.6})", self.coords[0]),
            _ => write!(f, "({:.6}, {:.6})", self.coords[0], self.coords[1]),
        }
    }
}

/// Map an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Uniform discretization of a closed parameter space.
///
/// Only independent samples are stored: the loop has `n` points
/// `λ_i = -π + 2πi/n` and the torus `nx * ny` points with the same spacing
/// per axis. The seam (`λ = π ≡ -π`) is closed by index wrap-around.
/// Flat torus indices are row-major in `ky`: `idx = j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Loop { n: usize },
    Torus { nx: usize, ny: usize },
}

impl Grid {
    pub fn loop_of(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("loop needs at least 2 points, got {n}")));
        }
        Ok(Grid::Loop { n })
    }

    pub fn torus(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "torus needs at least 2 points per axis, got {nx}x{ny}"
            )));
        }
        Ok(Grid::Torus { nx, ny })
    }

    pub fn len(&self) -> usize {
        match *self {
            Grid::Loop { n } => n,
            Grid::Torus { nx, ny } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_dims(&self) -> usize {
        match self {
            Grid::Loop { .. } => 1,
            Grid::Torus { .. } => 2,
        }
    }

    /// Number of samples along direction `mu`.
    pub fn extent(&self, mu: usize) -> usize {
        match (*self, mu) {
            (Grid::Loop { n }, 0) => n,
            (Grid::Torus { nx, .. }, 0) => nx,
            (Grid::Torus { ny, .. }, 1) => ny,
            _ => panic!("direction {mu} out of range for {self:?}"),
        }
    }

    pub fn spacing(&self, mu: usize) -> f64 {
        2.0 * PI / self.extent(mu) as f64
    }

    /// Per-axis indices of a flat index.
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        match *self {
            Grid::Loop { .. } => (idx, 0),
            Grid::Torus { nx, .. } => (idx % nx, idx / nx),
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        match *self {
            Grid::Loop { .. } => i,
            Grid::Torus { nx, .. } => j * nx + i,
        }
    }

    pub fn point(&self, idx: usize) -> MomentumPoint {
        let (i, j) = self.coords(idx);
        match *self {
            Grid::Loop { n } => MomentumPoint::new1(axis_value(i, n)),
            Grid::Torus { nx, ny } => MomentumPoint::new2(axis_value(i, nx), axis_value(j, ny)),
        }
    }

    pub fn points(&self) -> Vec<MomentumPoint> {
        (0..self.len()).map(|idx| self.point(idx)).collect()
    }

    /// Flat index of the neighbour `step` samples away along `mu`, periodic.
    pub fn neighbor(&self, idx: usize, mu: usize, step: isize) -> usize {
        let (i, j) = self.coords(idx);
        let wrap = |x: usize, n: usize| (x as isize + step).rem_euclid(n as isize) as usize;
        match (*self, mu) {
            (Grid::Loop { n }, 0) => wrap(i, n),
            (Grid::Torus { nx, .. }, 0) => self.index(wrap(i, nx), j),
            (Grid::Torus { ny, .. }, 1) => self.index(i, wrap(j, ny)),
            _ => panic!("direction {mu} out of range for {self:?}"),
        }
    }

    /// Flat index of the sample at `-k`.
    pub fn partner(&self, idx: usize) -> usize {
        let (i, j) = self.coords(idx);
        match *self {
            Grid::Loop { n } => (n - i) % n,
            Grid::Torus { nx, ny } => self.index((nx - i) % nx, (ny - j) % ny),
        }
    }
}

fn axis_value(i: usize, n: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / n as f64
}
