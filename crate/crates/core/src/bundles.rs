//! Biorthogonal Stiefel frames of a degeneracy block and the projectors they
//! define. A frame V (N×n) with V‡ = η_a⁻¹V†η satisfies V‡V = 1; its
//! projector Π = VV‡ is unchanged under V → V𝒰 for 𝒰 pseudo-unitary under η_a.

use crate::biortho::{BiorthoSystem, Level, MetricOperator};
use crate::error::{Error, Result};
use crate::matrix::{ensure_shape, expm, hermitian_function, identity, inverse, real, ComplexMatrix, I};
use crate::random;

/// Residual above which a candidate group element is rejected.
pub const GROUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StiefelFrame {
    v: ComplexMatrix,
    eta: MetricOperator,
    eta_small: MetricOperator,
}

impl StiefelFrame {
    /// Wrap an existing frame; fails if V‡V differs from 1 by more than `tol`.
    pub fn new(v: ComplexMatrix, eta: MetricOperator, eta_small: MetricOperator, tol: f64) -> Result<Self> {
        let (n, k) = v.shape();
        if eta.dim() != n {
            return Err(Error::dims(format!("{n}x{n} metric"), eta.dim()));
        }
        if eta_small.dim() != k {
            return Err(Error::dims(format!("{k}x{k} block metric"), eta_small.dim()));
        }
        let frame = StiefelFrame { v, eta, eta_small };
        let residual = frame.orthonormality_residual();
        if residual > tol {
            return Err(Error::NotPseudoUnitary { residual });
        }
        Ok(frame)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn eta(&self) -> &MetricOperator {
        &self.eta
    }

    pub fn eta_small(&self) -> &MetricOperator {
        &self.eta_small
    }

    pub fn size(&self) -> usize {
        self.v.ncols()
    }

    /// ‖V‡V − 1‖_F.
    pub fn orthonormality_residual(&self) -> f64 {
        (frame_pseudo_adjoint(self) * &self.v - identity(self.size())).norm()
    }

    /// V𝒰 with the same metrics.
    pub fn act(&self, u: &ComplexMatrix) -> Result<StiefelFrame> {
        let k = self.size();
        ensure_shape(u, k, k)?;
        Ok(StiefelFrame {
            v: &self.v * u,
            eta: self.eta.clone(),
            eta_small: self.eta_small.clone(),
        })
    }
}

/// Frame spanning the block at `level` with V‡V = 1 under (η, η_a); η_a
/// defaults to the identity.
pub fn stiefel_frame(
    system: &BiorthoSystem,
    level: Level,
    eta: &MetricOperator,
    eta_small: Option<&MetricOperator>,
) -> Result<StiefelFrame> {
    let (_, block) = system.block(level)?;
    let r = system.right_block(block).into_owned();
    if eta.dim() != system.dim() {
        return Err(Error::dims(system.dim(), eta.dim()));
    }
    let eta_small = match eta_small {
        Some(m) => m.clone(),
        None => MetricOperator::identity(block.len),
    };
    if eta_small.dim() != block.len {
        return Err(Error::dims(block.len, eta_small.dim()));
    }
    // V = R·G^{-1/2}·η_a^{1/2} with G = R†ηR, so that V†ηV = η_a.
    let g = MetricOperator::new(r.adjoint() * eta.matrix() * &r)?;
    let m = hermitian_function(g.matrix(), |x| 1.0 / x.sqrt()) * hermitian_function(eta_small.matrix(), f64::sqrt);
    StiefelFrame::new(&r * m, eta.clone(), eta_small, 1e-8)
}

/// V‡ = η_a⁻¹V†η.
pub fn frame_pseudo_adjoint(frame: &StiefelFrame) -> ComplexMatrix {
    frame.eta_small.inverse() * frame.v.adjoint() * frame.eta.matrix()
}

/// Pseudo-adjoint of an N×N operator under η: A‡ = η⁻¹A†η.
pub fn operator_pseudo_adjoint(a: &ComplexMatrix, eta: &MetricOperator) -> Result<ComplexMatrix> {
    ensure_shape(a, eta.dim(), eta.dim())?;
    Ok(eta.inverse() * a.adjoint() * eta.matrix())
}

#[derive(Debug, Clone)]
pub struct GrassmannPoint {
    pub pi: ComplexMatrix,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrassmannResiduals {
    /// ‖Π² − Π‖_F
    pub idempotence: f64,
    /// ‖Π‡ − Π‖_F
    pub self_adjointness: f64,
    /// |tr Π − n|
    pub trace: f64,
    /// ‖Π†η − ηΠ‖_F
    pub metric_compatibility: f64,
}

impl GrassmannResiduals {
    pub fn max(&self) -> f64 {
        self.idempotence
            .max(self.self_adjointness)
            .max(self.trace)
            .max(self.metric_compatibility)
    }
}

impl GrassmannPoint {
    pub fn residuals(&self, eta: &MetricOperator) -> Result<GrassmannResiduals> {
        let pi = &self.pi;
        Ok(GrassmannResiduals {
            idempotence: (pi * pi - pi).norm(),
            self_adjointness: (operator_pseudo_adjoint(pi, eta)? - pi).norm(),
            trace: (pi.trace() - real(self.rank as f64)).norm(),
            metric_compatibility: (pi.adjoint() * eta.matrix() - eta.matrix() * pi).norm(),
        })
    }
}

/// Π = VV‡.
pub fn grassmann_projector(frame: &StiefelFrame) -> GrassmannPoint {
    GrassmannPoint {
        pi: &frame.v * frame_pseudo_adjoint(frame),
        rank: frame.size(),
    }
}

/// ‖(V𝒰)(V𝒰)‡ − VV‡‖_F.
pub fn group_action_invariance(frame: &StiefelFrame, u: &ComplexMatrix) -> Result<f64> {
    let residual = crate::biortho::pseudo_unitarity_residual_with(u, frame.eta_small.matrix())?;
    if residual > GROUP_TOL {
        return Err(Error::NotPseudoUnitary { residual });
    }
    let moved = frame.act(u)?;
    Ok((grassmann_projector(&moved).pi - grassmann_projector(frame).pi).norm())
}

/// For two frames with the same projector, 𝒰 = V₁‡V₂ relates them: returns
/// 𝒰 together with ‖V₂ − V₁𝒰‖_F and the pseudo-unitarity residual of 𝒰.
pub fn frame_relation(v1: &StiefelFrame, v2: &StiefelFrame) -> Result<(ComplexMatrix, f64, f64)> {
    if v1.v.shape() != v2.v.shape() {
        return Err(Error::dims(
            format!("{:?}", v1.v.shape()),
            format!("{:?}", v2.v.shape()),
        ));
    }
    let u = frame_pseudo_adjoint(v1) * &v2.v;
    let mismatch = (&v2.v - &v1.v * &u).norm();
    let residual = crate::biortho::pseudo_unitarity_residual_with(&u, v1.eta_small.matrix())?;
    Ok((u, mismatch, residual))
}

/// exp(isX) with X = η_a^{-1/2}·Y·η_a^{1/2} for a random Hermitian Y, which
/// is pseudo-Hermitian under η_a; the result is pseudo-unitary under η_a.
pub fn random_pseudo_unitary(eta_small: &MetricOperator, s: f64, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = random::rng(seed);
    let y = random::hermitian(eta_small.dim(), &mut rng);
    let root = hermitian_function(eta_small.matrix(), f64::sqrt);
    let x = inverse(&root)? * y * &root;
    Ok(expm(&(x * (I * s))))
}
