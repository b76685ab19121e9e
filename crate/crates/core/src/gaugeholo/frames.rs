use crate::biortho::{biorthogonal_eig, BiorthoSystem, DegeneracyBlock, Level};
use crate::error::{Error, Result};
use crate::matrix::{ensure_shape, identity, inverse, max_abs, singular_values, ComplexMatrix, C64};

use super::family::HamiltonianFamily;

/// Right frame (columns |φᵃ⟩) of a degenerate block and its biorthogonal
/// left partner (columns |φ̃ᵃ⟩), with left† · right = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrame {
    pub right: ComplexMatrix,
    pub left: ComplexMatrix,
}

impl BlockFrame {
    pub fn new(right: ComplexMatrix, left: ComplexMatrix) -> Result<Self> {
        ensure_shape(&left, right.nrows(), right.ncols())?;
        Ok(BlockFrame { right, left })
    }

    /// Frame with the given right vectors and the unique left partner inside
    /// the span of `left_span`.
    pub fn paired(right: ComplexMatrix, left_span: &ComplexMatrix) -> Result<Self> {
        ensure_shape(left_span, right.nrows(), right.ncols())?;
        let overlap = left_span.adjoint() * &right;
        let left = left_span * inverse(&overlap)?.adjoint();
        Ok(BlockFrame { right, left })
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn size(&self) -> usize {
        self.right.ncols()
    }

    /// max |(L†R − 1)ᵢⱼ|.
    pub fn overlap_residual(&self) -> f64 {
        max_abs(&(self.left.adjoint() * &self.right - identity(self.size())))
    }

    /// The frame |ψᵃ⟩ = Σ_c U_{ca}|φᶜ⟩ with left partner L·U^{-†}.
    pub fn rotated(&self, u: &ComplexMatrix) -> Result<Self> {
        ensure_shape(u, self.size(), self.size())?;
        Ok(BlockFrame {
            right: &self.right * u,
            left: &self.left * inverse(u)?.adjoint(),
        })
    }

    /// Coefficients of the block vectors of `other` in this frame, L†·R_other.
    pub fn coefficients_of(&self, other: &ComplexMatrix) -> ComplexMatrix {
        self.left.adjoint() * other
    }
}

/// A frame of one degenerate block, defined at every chart point.
pub trait FrameField {
    fn frame(&self, point: &[f64]) -> Result<BlockFrame>;
}

/// Frames given in closed form.
pub struct AnalyticFrames<F>(pub F);

impl<F> FrameField for AnalyticFrames<F>
where
    F: Fn(&[f64]) -> Result<BlockFrame>,
{
    fn frame(&self, point: &[f64]) -> Result<BlockFrame> {
        (self.0)(point)
    }
}

/// Picks the block of size `size` whose eigenvalue is closest to `target`,
/// failing if it is not separated from the rest of the spectrum by more
/// than `tol`·max(1, max|E|).
pub fn select_block(system: &BiorthoSystem, target: C64, size: usize, tol: f64) -> Result<DegeneracyBlock> {
    let block = *system
        .blocks()
        .iter()
        .min_by(|a, b| {
            (a.eigenvalue - target)
                .norm()
                .total_cmp(&(b.eigenvalue - target).norm())
        })
        .ok_or(Error::LevelNotFound)?;
    let scale = system.eigenvalues().iter().map(|e| e.norm()).fold(1.0, f64::max);
    if block.len != size {
        return Err(Error::GapClosure { index: 0, gap: 0.0 });
    }
    let gap = system.spectral_gap(&block);
    if gap <= tol * scale {
        return Err(Error::GapClosure { index: 0, gap });
    }
    Ok(block)
}

/// Projects `reference` onto the block: G = R_b·(L_b†F), with left partner
/// L_b·(L_b†F)^{-†}. The result depends only on the block's eigenspaces, not
/// on the basis the eigensolver returned.
pub fn project_onto_block(
    system: &BiorthoSystem,
    block: &DegeneracyBlock,
    reference: &ComplexMatrix,
    tol: f64,
) -> Result<BlockFrame> {
    ensure_shape(reference, system.dim(), block.len)?;
    let r = system.right_block(block);
    let l = system.left_block(block);
    let m = l.adjoint() * reference;
    let smin = singular_values(&m).last().copied().unwrap_or(0.0);
    let scale = singular_values(reference)
        .first()
        .copied()
        .unwrap_or(1.0)
        .max(f64::MIN_POSITIVE);
    if smin <= tol * scale {
        return Err(Error::PairingAmbiguity {
            index: 0,
            overlap: smin,
        });
    }
    let m_inv = inverse(&m)?;
    Ok(BlockFrame {
        right: r * &m,
        left: l * m_inv.adjoint(),
    })
}

/// The projection gauge: at every point the block frame closest to a fixed
/// reference frame. Smooth wherever the block stays gapped and the
/// reference keeps a non-degenerate overlap with it.
pub struct ProjectedFrames<'a, F: ?Sized> {
    family: &'a F,
    target: C64,
    reference: ComplexMatrix,
    tol: f64,
}

impl<'a, F: HamiltonianFamily + ?Sized> ProjectedFrames<'a, F> {
    /// `target` selects the block by nearest eigenvalue; its size is the
    /// column count of `reference`.
    pub fn new(family: &'a F, target: C64, reference: ComplexMatrix, tol: f64) -> Self {
        ProjectedFrames {
            family,
            target,
            reference,
            tol,
        }
    }

    pub fn reference(&self) -> &ComplexMatrix {
        &self.reference
    }

    /// Frame and block eigenvalue at `point`.
    pub fn frame_and_eigenvalue(&self, point: &[f64]) -> Result<(BlockFrame, C64)> {
        let sys = biorthogonal_eig(&self.family.hamiltonian(point)?, None)?;
        let block = select_block(&sys, self.target, self.reference.ncols(), self.tol)?;
        Ok((
            project_onto_block(&sys, &block, &self.reference, self.tol)?,
            block.eigenvalue,
        ))
    }
}

impl<F: HamiltonianFamily + ?Sized> FrameField for ProjectedFrames<'_, F> {
    fn frame(&self, point: &[f64]) -> Result<BlockFrame> {
        self.frame_and_eigenvalue(point).map(|(f, _)| f)
    }
}

/// Frames of `base` rotated by a point-dependent matrix 𝒰(λ).
pub struct RotatedFrames<'a, B: ?Sized, U> {
    base: &'a B,
    rotation: U,
}

impl<'a, B: FrameField + ?Sized, U: Fn(&[f64]) -> Result<ComplexMatrix>> RotatedFrames<'a, B, U> {
    pub fn new(base: &'a B, rotation: U) -> Self {
        RotatedFrames { base, rotation }
    }
}

impl<B: FrameField + ?Sized, U: Fn(&[f64]) -> Result<ComplexMatrix>> FrameField for RotatedFrames<'_, B, U> {
    fn frame(&self, point: &[f64]) -> Result<BlockFrame> {
        self.base.frame(point)?.rotated(&(self.rotation)(point)?)
    }
}

pub(crate) fn at_index(err: Error, index: usize) -> Error {
    match err {
        Error::GapClosure { gap, .. } => Error::GapClosure { index, gap },
        Error::PairingAmbiguity { overlap, .. } => Error::PairingAmbiguity { index, overlap },
        other => other,
    }
}

/// Block frames along a sequence of chart points, each aligned to its
/// predecessor so that the cross-overlap L_prev†·R_new is the identity.
///
/// The block is chosen by `level` at the first point and tracked by nearest
/// eigenvalue afterwards.
pub fn smooth_frame_along_path<F: HamiltonianFamily + ?Sized>(
    family: &F,
    path: &[Vec<f64>],
    level: Level,
    tol: f64,
) -> Result<Vec<BlockFrame>> {
    smooth_frame_along_path_from(family, path, level, tol, None)
}

/// As [`smooth_frame_along_path`], with the first frame projected from
/// `initial` instead of taken from the eigensolver.
pub fn smooth_frame_along_path_from<F: HamiltonianFamily + ?Sized>(
    family: &F,
    path: &[Vec<f64>],
    level: Level,
    tol: f64,
    initial: Option<&BlockFrame>,
) -> Result<Vec<BlockFrame>> {
    let mut frames: Vec<BlockFrame> = Vec::with_capacity(path.len());
    let mut target = C64::new(0.0, 0.0);
    for (k, point) in path.iter().enumerate() {
        let sys = biorthogonal_eig(&family.hamiltonian(point)?, None)?;
        let block = match frames.last() {
            None => {
                let (_, b) = sys.block(level)?;
                let b = *b;
                let gap = sys.spectral_gap(&b);
                let scale = sys.eigenvalues().iter().map(|e| e.norm()).fold(1.0, f64::max);
                if gap <= tol * scale {
                    return Err(Error::GapClosure { index: k, gap });
                }
                b
            }
            Some(prev) => select_block(&sys, target, prev.size(), tol).map_err(|e| at_index(e, k))?,
        };
        target = block.eigenvalue;
        let frame = match (frames.last(), initial) {
            (None, None) => BlockFrame::new(sys.right_block(&block), sys.left_block(&block))?,
            (None, Some(init)) => project_onto_block(&sys, &block, &init.right, tol).map_err(|e| at_index(e, k))?,
            (Some(prev), _) => {
                let r = sys.right_block(&block);
                let l = sys.left_block(&block);
                let s = prev.left.adjoint() * &r;
                let smin = singular_values(&s).last().copied().unwrap_or(0.0);
                if smin <= tol {
                    return Err(Error::PairingAmbiguity {
                        index: k,
                        overlap: smin,
                    });
                }
                BlockFrame {
                    right: r * inverse(&s)?,
                    left: l * s.adjoint(),
                }
            }
        };
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaugeholo::family::FnFamily;
    use crate::matrix::{c64, real};

    fn rotating_qubit() -> FnFamily {
        // Hermitian spin-½ in a field along (sinθ cosφ, sinθ sinφ, cosθ).
        FnFamily::new(2, 2, |p: &[f64]| {
            let (t, f) = (p[0], p[1]);
            ComplexMatrix::from_row_slice(
                2,
                2,
                &[
                    real(t.cos()),
                    c64(t.sin() * f.cos(), -t.sin() * f.sin()),
                    c64(t.sin() * f.cos(), t.sin() * f.sin()),
                    real(-t.cos()),
                ],
            )
        })
    }

    #[test]
    fn constant_family_gives_constant_frames() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), c64(0.0, 0.3), c64(0.0, 0.3), real(-1.0)]);
        let fam = FnFamily::new(2, 1, move |_| h.clone());
        let path: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64 * 0.1]).collect();
        let frames = smooth_frame_along_path(&fam, &path, Level::Index(0), 1e-8).unwrap();
        for f in &frames {
            assert!((&f.right - &frames[0].right).norm() < 1e-12);
            assert!(f.overlap_residual() < 1e-12);
        }
    }

    #[test]
    fn cross_overlaps_are_identity() {
        let fam = rotating_qubit();
        let path: Vec<Vec<f64>> = (0..=50).map(|k| vec![0.7, k as f64 * 0.04]).collect();
        let frames = smooth_frame_along_path(&fam, &path, Level::Index(0), 1e-8).unwrap();
        for w in frames.windows(2) {
            let s = w[0].left.adjoint() * &w[1].right;
            assert!((s - identity(1)).norm() < 1e-12);
            assert!(w[1].overlap_residual() < 1e-12);
        }
    }

    #[test]
    fn gap_closure_is_detected() {
        let fam = FnFamily::new(2, 1, |p: &[f64]| {
            ComplexMatrix::from_row_slice(2, 2, &[real(p[0]), real(0.0), real(0.0), real(-p[0])])
        });
        let path: Vec<Vec<f64>> = [1.0, 0.5, 0.0, -0.5].iter().map(|&x| vec![x]).collect();
        let err = smooth_frame_along_path(&fam, &path, Level::Index(0), 1e-8).unwrap_err();
        assert!(matches!(err, Error::GapClosure { index: 2, .. }));
    }

    #[test]
    fn projection_is_basis_independent() {
        let fam = rotating_qubit();
        let p = [0.4, 1.3];
        let reference = ComplexMatrix::from_column_slice(2, 1, &[real(0.2), c64(0.9, 0.1)]);
        let pf = ProjectedFrames::new(&fam, real(-1.0), reference.clone(), 1e-8);
        let f = pf.frame(&p).unwrap();
        let h = fam.hamiltonian(&p).unwrap();
        assert!((&h * &f.right + &f.right).norm() < 1e-12);
        assert!(f.overlap_residual() < 1e-12);
        // Projecting an element of the block returns it unchanged.
        let again = ProjectedFrames::new(&fam, real(-1.0), f.right.clone(), 1e-8)
            .frame(&p)
            .unwrap();
        assert!((again.right - &f.right).norm() < 1e-12);
    }

    #[test]
    fn rotation_keeps_pairing() {
        let r = ComplexMatrix::identity(3, 2);
        let f = BlockFrame::new(r.clone(), r).unwrap();
        let u = ComplexMatrix::from_row_slice(2, 2, &[real(2.0), c64(0.0, 1.0), real(0.0), real(0.5)]);
        assert!(f.rotated(&u).unwrap().overlap_residual() < 1e-14);
    }
}
