//! Small dense complex linear algebra used throughout the crate.
//!
//! Matrices here are at most 4x4, so everything is a thin layer over
//! `nalgebra::DMatrix<Complex64>`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `h0 I + hx σx + hy σy + hz σz`.
pub fn pauli(h0: f64, hx: f64, hy: f64, hz: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(h0 + hz, 0.0), c(hx, -hy), c(hx, hy), c(h0 - hz, 0.0)])
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `max |U†U − I|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Determinant of a small square matrix; closed forms up to 2x2.
pub fn det(m: &CMatrix) -> Complex64 {
    match m.nrows() {
        0 => ONE,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().determinant(),
    }
}

/// Pfaffian of an antisymmetric matrix of even size, by Parlett-Reid
/// elimination with partial pivoting.
pub fn pfaffian(m: &CMatrix) -> Result<Complex64> {
    let n = m.nrows();
    if !m.is_square() || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "Pfaffian needs an even square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let skew = (m + m.transpose()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if skew > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix is not antisymmetric (residual {skew:.3e})"
        )));
    }
    let mut a = m.clone();
    let mut pf = ONE;
    for k in (0..n).step_by(2) {
        let (kp, _) = (k + 1..n).fold((k + 1, -1.0), |best, i| {
            let x = a[(i, k)].norm();
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        });
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let pivot = a[(k, k + 1)];
        if pivot == ZERO {
            return Ok(ZERO);
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !is_finite(m) {
        return Err(Error::Numeric("non-finite entry in Hermitian eigenproblem".into()));
    }
    let n = m.nrows();
    if n == 2 {
        return Ok(eigh2(m));
    }
    // Symmetrize so roundoff asymmetry never leaks into the solver.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Closed-form eigenpairs of a 2x2 Hermitian matrix `h0 + h·σ`.
fn eigh2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (h0, hx, hy, hz) = pauli_components(m);
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let mut vectors = zeros(2, 2);
    if r == 0.0 {
        return (vec![h0, h0], identity(2));
    }
    // Upper eigenvector of h·σ along (θ, φ) on the Bloch sphere; pick the
    // numerically stable branch depending on the hemisphere.
    let off = c(hx, hy);
    if hz >= 0.0 {
        // |+⟩ ∝ (r + hz, hx + i hy), |−⟩ ∝ (−(hx − i hy), r + hz)
        let norm = (2.0 * r * (r + hz)).sqrt();
        vectors[(0, 1)] = c((r + hz) / norm, 0.0);
        vectors[(1, 1)] = off / norm;
        vectors[(0, 0)] = -off.conj() / norm;
        vectors[(1, 0)] = c((r + hz) / norm, 0.0);
    } else {
        // |+⟩ ∝ (hx − i hy, r − hz), |−⟩ ∝ (r − hz, −(hx + i hy))
        let norm = (2.0 * r * (r - hz)).sqrt();
        vectors[(0, 1)] = off.conj() / norm;
        vectors[(1, 1)] = c((r - hz) / norm, 0.0);
        vectors[(0, 0)] = c((r - hz) / norm, 0.0);
        vectors[(1, 0)] = -off / norm;
    }
    (vec![h0 - r, h0 + r], vectors)
}

/// Pauli decomposition `(h0, hx, hy, hz)` of the Hermitian part of a 2x2 matrix.
pub fn pauli_components(m: &CMatrix) -> (f64, f64, f64, f64) {
    let h0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let hz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    let lower = 0.5 * (m[(1, 0)] + m[(0, 1)].conj());
    (h0, lower.re, lower.im, hz)
}

/// Largest eigenvalue distance between two sorted spectra.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_eigh(m: &CMatrix) {
        let (vals, vecs) = eigh(m).unwrap();
        assert!(unitarity_residual(&vecs) < 1e-13);
        for (n, e) in vals.iter().enumerate() {
            let v = vecs.column(n).into_owned();
            let r = (m * &v - v.scale(*e)).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
            assert!(r < 1e-12, "residual {r}");
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_two_by_two_both_hemispheres() {
        check_eigh(&pauli(0.3, 0.2, -0.7, 1.1));
        check_eigh(&pauli(-0.1, 0.4, 0.5, -2.0));
        check_eigh(&pauli(0.0, 0.0, 0.0, -1.0));
        check_eigh(&pauli(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        let mut a = zeros(4, 4);
        let entries = [
            (0, 1, c(0.3, 1.0)),
            (0, 2, c(-0.7, 0.2)),
            (0, 3, c(1.1, 0.0)),
            (1, 2, c(0.0, -0.4)),
            (1, 3, c(0.5, 0.5)),
            (2, 3, c(-0.2, 0.9)),
        ];
        for (i, j, z) in entries {
            a[(i, j)] = z;
            a[(j, i)] = -z;
        }
        // Pf = a01 a23 − a02 a13 + a03 a12
        let want = a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)];
        let pf = pfaffian(&a).unwrap();
        assert!((pf - want).norm() < 1e-14);
        assert!((pf * pf - det(&a)).norm() < 1e-13);
        let eps = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, -ONE, ZERO]);
        assert_eq!(pfaffian(&eps).unwrap(), ONE);
        assert!(pfaffian(&identity(2)).is_err());
        assert!(pfaffian(&zeros(3, 3)).is_err());
    }

    #[test]
    fn eigh_four_by_four() {
        let a = pauli(0.1, 0.5, -0.3, 0.9);
        let b = pauli(-0.2, -0.4, 0.8, 0.1);
        let mut m = block_diag(&a, &b);
        m[(0, 3)] = c(0.2, 0.1);
        m[(3, 0)] = c(0.2, -0.1);
        check_eigh(&m);
    }

    #[test]
    fn pauli_round_trip() {
        let m = pauli(0.25, -1.5, 0.75, 2.0);
        let (h0, hx, hy, hz) = pauli_components(&m);
        assert_eq!((h0, hx, hy, hz), (0.25, -1.5, 0.75, 2.0));
        let built = sigma_x().scale(hx) + sigma_y().scale(hy) + sigma_z().scale(hz) + identity(2).scale(h0);
        assert!(max_abs_diff(&built, &m) < 1e-15);
    }

    #[test]
    fn eigh_rejects_nan() {
        let m = pauli(f64::NAN, 0.0, 0.0, 1.0);
        assert!(matches!(eigh(&m), Err(Error::Numeric(_))));
    }
}
