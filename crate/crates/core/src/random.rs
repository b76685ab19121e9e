//! Seeded random matrices for tests, verification suites and sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{c64, real, ComplexMatrix, C64};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = gaussian_matrix(n, n, rng);
    (&g + g.adjoint()) * real(0.5)
}

/// Haar-distributed unitary via QR of a Gaussian matrix with the phases of
/// R's diagonal divided out.
pub fn unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let qr = gaussian_matrix(n, n, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c64(1.0, 0.0)
            }
        } else {
            c64(0.0, 0.0)
        }
    });
    q * phases
}

/// Invertible matrix U·Σ·V† whose condition number is at most `max_cond`.
pub fn invertible(n: usize, max_cond: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let u = unitary(n, rng);
    let v = unitary(n, rng);
    let log_max = max_cond.max(1.0).ln();
    let sigma = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            real((rng.random::<f64>() * log_max).exp())
        } else {
            c64(0.0, 0.0)
        }
    });
    u * sigma * v.adjoint()
}
