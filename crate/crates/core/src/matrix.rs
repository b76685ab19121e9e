//! Dense complex matrices and the helpers shared by every module.
//!
//! All residuals in this crate are Frobenius norms, normalized by the
//! Frobenius norm of the reference operator where one exists.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// σʸ = [[0, −i], [i, 0]].
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.norm()
}

/// ‖diff‖_F / ‖reference‖_F, falling back to the absolute norm when the
/// reference vanishes.
pub fn relative_residual(diff: &ComplexMatrix, reference: &ComplexMatrix) -> f64 {
    let scale = reference.norm();
    if scale > 0.0 {
        diff.norm() / scale
    } else {
        diff.norm()
    }
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::dims("square matrix", format!("{}x{}", m.nrows(), m.ncols())))
    }
}

pub fn ensure_shape(m: &ComplexMatrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::dims(
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    let inv = m.clone().try_inverse().ok_or(Error::Singular)?;
    if all_finite(&inv) {
        Ok(inv)
    } else {
        Err(Error::Singular)
    }
}

/// Commutator [a, b] = ab − ba.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    m.clone().exp()
}

/// Apply a real function to a Hermitian matrix through its spectral
/// decomposition. The input is symmetrized first.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let eig = hermitian_part(m).symmetric_eigen();
    let mapped = eig.eigenvalues.map(|x| real(f(x)));
    &eig.eigenvectors * ComplexMatrix::from_diagonal(&mapped) * eig.eigenvectors.adjoint()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Unitary polar factor W of m = W·P, computed from the SVD.
pub fn unitary_polar_factor(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    u * v_t
}

/// JSON wire form: row-major `[re, im]` pairs with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                data.push([z.re, z.im]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        if j.rows * j.cols != j.data.len() {
            return Err(Error::ConfigInvalid(format!(
                "matrix declares {}x{} but holds {} entries",
                j.rows,
                j.cols,
                j.data.len()
            )));
        }
        let entries: Vec<C64> = j.data.iter().map(|&[re, im]| c64(re, im)).collect();
        let m = ComplexMatrix::from_row_slice(j.rows, j.cols, &entries);
        ensure_finite(&m, "matrix JSON")?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        assert!((&x * &y - &z * I).norm() < 1e-15);
        assert!((commutator(&x, &y) - &z * real(2.0) * I).norm() < 1e-15);
    }

    #[test]
    fn expm_of_pauli_y_is_rotation() {
        let b = 0.37_f64;
        let u = expm(&(pauli_y() * (I * b)));
        let expected =
            ComplexMatrix::from_row_slice(2, 2, &[real(b.cos()), real(b.sin()), real(-b.sin()), real(b.cos())]);
        assert!((u - expected).norm() < 1e-14);
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[real(2.0), c64(0.0, 0.5), c64(0.0, -0.5), real(1.0)]);
        let s = hermitian_function(&m, f64::sqrt);
        assert!((&s * &s - &m).norm() < 1e-14);
    }

    #[test]
    fn json_shape_is_checked() {
        let bad = MatrixJson {
            rows: 2,
            cols: 2,
            data: vec![[1.0, 0.0]; 3],
        };
        assert!(ComplexMatrix::try_from(&bad).is_err());
        let m = ComplexMatrix::from_row_slice(1, 2, &[c64(1.0, -2.0), c64(0.1, 0.3)]);
        let j = MatrixJson::from(&m);
        assert_eq!(j.data, vec![[1.0, -2.0], [0.1, 0.3]]);
        let text = serde_json::to_string(&j).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(ComplexMatrix::try_from(&back).unwrap(), m);
    }

    #[test]
    fn polar_factor_is_unitary() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c64(1.0, 0.2), c64(0.3, 0.0), c64(-0.4, 1.0), c64(2.0, 0.5)]);
        let w = unitary_polar_factor(&m);
        assert!((w.adjoint() * &w - identity(2)).norm() < 1e-14);
        let p = w.adjoint() * &m;
        assert!((&p - p.adjoint()).norm() < 1e-13);
    }
}
