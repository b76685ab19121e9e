//! Biorthogonal linear algebra for diagonalizable non-Hermitian matrices.
//!
//! A [`BiorthoSystem`] pairs right eigenvectors |φₙ⟩ (columns of `right`) with
//! left eigenvectors |φ̃ₙ⟩ (columns of `left`) such that `left† · right = 1`.
//! Right eigenvectors carry unit Euclidean norm; inside a degenerate block
//! they are orthonormal and the left partners absorb the normalization.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::{
    ensure_finite, ensure_shape, ensure_square, hermitian_eigenvalues, hermitian_part, identity, inverse, max_abs,
    relative_residual, ComplexMatrix, ComplexVector, C64,
};
use crate::random;

/// Relative reconstruction residual above which a matrix is declared
/// defective.
pub const DIAGONALIZABILITY_THRESHOLD: f64 = 1e-6;

/// Relative default for the degeneracy tolerance (times max|E|).
pub const DEFAULT_DEGENERACY_REL_TOL: f64 = 1e-8;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyBlock {
    pub eigenvalue: C64,
    pub start: usize,
    pub len: usize,
}

impl DegeneracyBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Selects one degeneracy block of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// Block index in ascending eigenvalue order.
    Index(usize),
    /// The block whose eigenvalue is closest to the given value.
    Value(C64),
}

#[derive(Debug, Clone)]
pub struct BiorthoSystem {
    eigenvalues: Vec<C64>,
    right: ComplexMatrix,
    left: ComplexMatrix,
    blocks: Vec<DegeneracyBlock>,
    degeneracy_tol: f64,
    source: ComplexMatrix,
}

impl BiorthoSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right_frame(&self) -> &ComplexMatrix {
        &self.right
    }

    pub fn left_frame(&self) -> &ComplexMatrix {
        &self.left
    }

    pub fn blocks(&self) -> &[DegeneracyBlock] {
        &self.blocks
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    /// The matrix this system was computed from.
    pub fn source(&self) -> &ComplexMatrix {
        &self.source
    }

    pub fn block(&self, level: Level) -> Result<(usize, &DegeneracyBlock)> {
        match level {
            Level::Index(i) => self.blocks.get(i).map(|b| (i, b)).ok_or(Error::LevelNotFound),
            Level::Value(target) => {
                let scale = self.eigenvalues.iter().map(|e| e.norm()).fold(1.0, f64::max);
                self.blocks
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        (a.1.eigenvalue - target)
                            .norm()
                            .total_cmp(&(b.1.eigenvalue - target).norm())
                    })
                    .filter(|(_, b)| (b.eigenvalue - target).norm() <= 1e-6 * scale)
                    .ok_or(Error::LevelNotFound)
            }
        }
    }

    /// Right eigenvectors of one block as an N×n matrix.
    pub fn right_block(&self, block: &DegeneracyBlock) -> ComplexMatrix {
        self.right.columns(block.start, block.len).into_owned()
    }

    pub fn left_block(&self, block: &DegeneracyBlock) -> ComplexMatrix {
        self.left.columns(block.start, block.len).into_owned()
    }

    /// Spectral projector Σₖ |φₖ⟩⟨φ̃ₖ| of one block.
    pub fn projector(&self, block: &DegeneracyBlock) -> ComplexMatrix {
        self.right_block(block) * self.left_block(block).adjoint()
    }

    /// Smallest distance from the block eigenvalue to the rest of the spectrum.
    pub fn spectral_gap(&self, block: &DegeneracyBlock) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.start != block.start)
            .map(|b| (b.eigenvalue - block.eigenvalue).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// max |(L†R − 1)ᵢⱼ|.
    pub fn biorthonormality_residual(&self) -> f64 {
        max_abs(&(self.left.adjoint() * &self.right - identity(self.dim())))
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&self.eigenvalues));
        &self.right * diag * self.left.adjoint()
    }

    /// ‖R·diag(E)·L† − H‖_F / ‖H‖_F.
    pub fn reconstruction_residual(&self) -> f64 {
        relative_residual(&(self.reconstruct() - &self.source), &self.source)
    }
}

/// Eigendecomposition of a diagonalizable square matrix into paired
/// right/left frames, sorted by ascending real part then imaginary part.
///
/// `degeneracy_tol` defaults to 1e-8·max|E|.
pub fn biorthogonal_eig(h: &ComplexMatrix, degeneracy_tol: Option<f64>) -> Result<BiorthoSystem> {
    let n = ensure_square(h)?;
    ensure_finite(h, "Hamiltonian")?;
    if n == 0 {
        return Err(Error::dims("non-empty matrix", "0x0"));
    }

    let raw: Vec<C64> = h
        .clone()
        .schur()
        .eigenvalues()
        .ok_or(Error::NonFinite("Schur eigenvalues"))?
        .iter()
        .copied()
        .collect();

    let max_e = raw.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let tol = degeneracy_tol.unwrap_or_else(|| {
        let scale = if max_e > 0.0 { max_e } else { h.norm() };
        DEFAULT_DEGENERACY_REL_TOL * scale
    });

    let clusters = cluster_eigenvalues(&raw, tol);

    let mut eigenvalues = Vec::with_capacity(n);
    let mut right = ComplexMatrix::zeros(n, n);
    let mut left = ComplexMatrix::zeros(n, n);
    let mut blocks = Vec::with_capacity(clusters.len());

    for members in clusters {
        let m = members.len();
        let mean = members.iter().sum::<C64>() / m as f64;
        let start = eigenvalues.len();
        if start + m > n {
            return Err(Error::NonDiagonalizable {
                residual: f64::INFINITY,
            });
        }
        let (r_blk, l_blk) = block_frames(h, mean, m)?;
        right.columns_mut(start, m).copy_from(&r_blk);
        left.columns_mut(start, m).copy_from(&l_blk);
        eigenvalues.extend(members);
        blocks.push(DegeneracyBlock {
            eigenvalue: mean,
            start,
            len: m,
        });
    }

    let system = BiorthoSystem {
        eigenvalues,
        right,
        left,
        blocks,
        degeneracy_tol: tol,
        source: h.clone(),
    };
    let residual = system.reconstruction_residual();
    if !(residual <= DIAGONALIZABILITY_THRESHOLD) {
        return Err(Error::NonDiagonalizable { residual });
    }
    Ok(system)
}

/// Single-linkage clustering within `tol`, returned sorted by the cluster
/// mean (real part, then imaginary part); members sorted the same way.
fn cluster_eigenvalues(values: &[C64], tol: f64) -> Vec<Vec<C64>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<C64>> = Vec::new();
    let mut root_index: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        match root_index[root] {
            Some(g) => groups[g].push(values[i]),
            None => {
                root_index[root] = Some(groups.len());
                groups.push(vec![values[i]]);
            }
        }
    }
    let key = |z: &C64| (z.re, z.im);
    for g in &mut groups {
        g.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
    }
    groups.sort_by(|a, b| {
        let ma = a.iter().sum::<C64>() / a.len() as f64;
        let mb = b.iter().sum::<C64>() / b.len() as f64;
        key(&ma).partial_cmp(&key(&mb)).unwrap_or(std::cmp::Ordering::Equal)
    });
    groups
}

/// Right/left null spaces of H − λ·1 of dimension `m`, biorthonormalized.
fn block_frames(h: &ComplexMatrix, lambda: C64, m: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = h.nrows();
    let shifted = h - identity(n) * lambda;
    // Left vectors come from the right factor of the adjoint: nalgebra's U
    // columns are inaccurate for (near-)zero singular values.
    let mut r_blk = null_space(&shifted, m)?;
    let l_blk = null_space(&shifted.adjoint(), m)?;

    if m == 1 {
        fix_phase(&mut r_blk);
    }

    let overlap = l_blk.adjoint() * &r_blk;
    let s_min = crate::matrix::singular_values(&overlap).last().copied().unwrap_or(0.0);
    if s_min < 1e-12 {
        // Left and right eigenspaces (nearly) orthogonal: the hallmark of a
        // Jordan block.
        return Err(Error::NonDiagonalizable {
            residual: f64::INFINITY,
        });
    }
    let l_blk = l_blk * inverse(&overlap)?.adjoint();
    Ok((r_blk, l_blk))
}

/// The `m` right singular vectors with smallest singular values.
fn null_space(a: &ComplexMatrix, m: usize) -> Result<ComplexMatrix> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let v = svd.v_t.ok_or(Error::NonFinite("SVD"))?.adjoint();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut out = ComplexMatrix::zeros(n, m);
    for (k, &idx) in order.iter().take(m).enumerate() {
        out.set_column(k, &v.column(idx));
    }
    Ok(out)
}

/// Rotate a single column so its largest-magnitude entry is real positive.
fn fix_phase(col: &mut ComplexMatrix) {
    let (idx, pivot) = col
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, z)| (i, *z))
        .unwrap_or((0, C64::new(1.0, 0.0)));
    let _ = idx;
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        *col *= phase;
    }
}

/// Hermitian positive-definite metric η with cached inverse.
#[derive(Debug, Clone)]
pub struct MetricOperator {
    matrix: ComplexMatrix,
    inverse: ComplexMatrix,
    hermiticity_residual: f64,
    min_eigenvalue: f64,
}

impl MetricOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        ensure_finite(&matrix, "metric")?;
        let hermiticity_residual = relative_residual(&(&matrix - matrix.adjoint()), &matrix);
        if hermiticity_residual > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                residual: hermiticity_residual,
            });
        }
        let min_eigenvalue = hermitian_eigenvalues(&matrix).first().copied().unwrap_or(f64::NAN);
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let inverse = inverse(&hermitian_part(&matrix))?;
        Ok(MetricOperator {
            matrix,
            inverse,
            hermiticity_residual,
            min_eigenvalue,
        })
    }

    pub fn identity(n: usize) -> Self {
        MetricOperator {
            matrix: identity(n),
            inverse: identity(n),
            hermiticity_residual: 0.0,
            min_eigenvalue: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &ComplexMatrix {
        &self.inverse
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// F†ηF: the metric restricted to the span of the frame F.
    pub fn restrict(&self, frame: &ComplexMatrix) -> Result<ComplexMatrix> {
        if frame.nrows() != self.dim() {
            return Err(Error::dims(
                format!("{} rows", self.dim()),
                format!("{} rows", frame.nrows()),
            ));
        }
        Ok(frame.adjoint() * &self.matrix * frame)
    }
}

/// η = Σₙ |φ̃ₙ⟩⟨φ̃ₙ|.
pub fn metric_from_left(system: &BiorthoSystem) -> Result<MetricOperator> {
    let l = system.left_frame();
    MetricOperator::new(l * l.adjoint())
}

/// ⟨φ|η|ψ⟩.
pub fn eta_inner(eta: &MetricOperator, phi: &ComplexVector, psi: &ComplexVector) -> Result<C64> {
    let n = eta.dim();
    if phi.len() != n || psi.len() != n {
        return Err(Error::dims(
            format!("vectors of length {n}"),
            format!("{} and {}", phi.len(), psi.len()),
        ));
    }
    Ok(phi.dotc(&(eta.matrix() * psi)))
}

/// M‡ = η⁻¹M†η.
pub fn pseudo_adjoint(eta: &MetricOperator, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = eta.dim();
    ensure_shape(m, n, n)?;
    Ok(eta.inverse() * m.adjoint() * eta.matrix())
}

/// ‖H†η − ηH‖_F / ‖η‖_F.
pub fn pseudo_hermiticity_residual(h: &ComplexMatrix, eta: &MetricOperator) -> Result<f64> {
    let n = eta.dim();
    ensure_shape(h, n, n)?;
    let e = eta.matrix();
    Ok(relative_residual(&(h.adjoint() * e - e * h), e))
}

/// ‖U†ηU − η‖_F / ‖η‖_F.
pub fn pseudo_unitarity_residual(u: &ComplexMatrix, eta: &MetricOperator) -> Result<f64> {
    let n = eta.dim();
    ensure_shape(u, n, n)?;
    let e = eta.matrix();
    Ok(relative_residual(&(u.adjoint() * e * u - e), e))
}

/// Same as [`pseudo_unitarity_residual`] for a plain (not validated) metric
/// matrix, as produced by restricting η to a subspace.
pub fn pseudo_unitarity_residual_with(u: &ComplexMatrix, eta: &ComplexMatrix) -> Result<f64> {
    ensure_shape(u, eta.nrows(), eta.ncols())?;
    Ok(relative_residual(&(u.adjoint() * eta * u - eta), eta))
}

/// Largest condition number of the similarity used by the generators.
pub const GENERATOR_MAX_CONDITION: f64 = 30.0;

/// H = S·h·S⁻¹ with h random Hermitian and S random invertible, plus
/// η = (S⁻¹)†S⁻¹. Deterministic for a fixed seed.
pub fn random_pseudo_hermitian(n: usize, seed: u64) -> (ComplexMatrix, MetricOperator) {
    let mut rng = random::rng(seed);
    let h = random::hermitian(n, &mut rng);
    similarity_pair(&h, &mut rng)
}

/// Like [`random_pseudo_hermitian`] but with a prescribed real spectrum
/// (repeat entries to create degenerate blocks).
pub fn random_pseudo_hermitian_with_spectrum(spectrum: &[f64], seed: u64) -> (ComplexMatrix, MetricOperator) {
    let n = spectrum.len();
    let mut rng = random::rng(seed);
    let w = random::unitary(n, &mut rng);
    let d = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
        n,
        spectrum.iter().map(|&x| C64::new(x, 0.0)),
    ));
    let h = &w * d * w.adjoint();
    similarity_pair(&h, &mut rng)
}

fn similarity_pair(h: &ComplexMatrix, rng: &mut random::TestRng) -> (ComplexMatrix, MetricOperator) {
    let n = h.nrows();
    let s = random::invertible(n, GENERATOR_MAX_CONDITION, rng);
    let s_inv = inverse(&s).expect("generator similarity is well conditioned");
    let ham = &s * h * &s_inv;
    let eta = s_inv.adjoint() * &s_inv;
    let eta = MetricOperator::new(hermitian_part(&eta)).expect("generator metric is positive definite");
    (ham, eta)
}
