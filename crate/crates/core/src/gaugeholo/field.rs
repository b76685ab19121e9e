use crate::biortho::{pseudo_unitarity_residual_with, MetricOperator};
use crate::error::{Error, Result};
use crate::matrix::{ensure_shape, inverse, max_abs, real, ComplexMatrix, I};

use super::family::{check_point, metric_at, HamiltonianFamily};
use super::frames::{BlockFrame, FrameField};

/// Default finite-difference step in chart units.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Largest tolerated relative disagreement between the h and h/2 estimates
/// of K_μ.
pub const RICHARDSON_TOL: f64 = 1e-6;

/// Residual above which a gauge matrix is rejected as not pseudo-unitary.
pub const PSEUDO_UNITARY_TOL: f64 = 1e-8;

fn shifted(point: &[f64], mu: usize, h: f64) -> Vec<f64> {
    let mut p = point.to_vec();
    p[mu] += h;
    p
}

fn check_axis<F: HamiltonianFamily + ?Sized>(family: &F, point: &[f64], mu: usize, h: f64) -> Result<()> {
    check_point(family, point)?;
    if mu >= family.chart_dim() {
        return Err(Error::dims(format!("axis < {}", family.chart_dim()), mu));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::ParamDomain(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    Ok(())
}

fn kinetic_estimate<F: HamiltonianFamily + ?Sized>(
    family: &F,
    eta_inv: &ComplexMatrix,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    let plus = metric_at(family, &shifted(point, mu, h))?;
    let minus = metric_at(family, &shifted(point, mu, -h))?;
    Ok(eta_inv * (plus.matrix() - minus.matrix()) * real(-1.0 / (4.0 * h)))
}

/// K_μ = −η⁻¹∂_μη/2 by central differences, cross-checked against step h/2.
pub fn kinetic_connection<F: HamiltonianFamily + ?Sized>(
    family: &F,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    check_axis(family, point, mu, h)?;
    let eta = metric_at(family, point)?;
    kinetic_connection_with(family, &eta, point, mu, h)
}

fn kinetic_connection_with<F: HamiltonianFamily + ?Sized>(
    family: &F,
    eta: &MetricOperator,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    let coarse = kinetic_estimate(family, eta.inverse(), point, mu, h)?;
    let fine = kinetic_estimate(family, eta.inverse(), point, mu, h / 2.0)?;
    let discrepancy = (&coarse - &fine).norm() / fine.norm().max(1.0);
    if discrepancy > RICHARDSON_TOL {
        return Err(Error::StepTooLarge {
            discrepancy,
            threshold: RICHARDSON_TOL,
        });
    }
    Ok(coarse)
}

/// Gauge field at one chart point: one n₀×n₀ matrix per chart axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFieldSample {
    pub point: Vec<f64>,
    pub components: Vec<ComplexMatrix>,
}

impl GaugeFieldSample {
    /// Σ_μ A_μ·v^μ.
    pub fn contract(&self, v: &[f64]) -> ComplexMatrix {
        let n = self.components.first().map_or(0, |a| a.nrows());
        self.components
            .iter()
            .zip(v)
            .fold(ComplexMatrix::zeros(n, n), |acc, (a, &x)| acc + a * real(x))
    }
}

/// Central difference of both frames of `frames` along axis `mu`.
fn frame_derivative<Fr: FrameField + ?Sized>(
    frames: &Fr,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let plus = frames.frame(&shifted(point, mu, h))?;
    let minus = frames.frame(&shifted(point, mu, -h))?;
    let s = real(1.0 / (2.0 * h));
    Ok(((plus.right - minus.right) * s, (plus.left - minus.left) * s))
}

/// (A_μ)^{ba} = i⟨φ̃ᵇ|(∂_μ − K_μ)|φᵃ⟩, with ∂_μ by central difference on
/// `frames` and K_μ from the family's metric.
pub fn gauge_field_components<Fr, F>(frames: &Fr, family: &F, point: &[f64], mu: usize, h: f64) -> Result<ComplexMatrix>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    check_axis(family, point, mu, h)?;
    let center = frames.frame(point)?;
    let eta = metric_at(family, point)?;
    component(frames, family, &eta, &center, point, mu, h)
}

fn component<Fr, F>(
    frames: &Fr,
    family: &F,
    eta: &MetricOperator,
    center: &BlockFrame,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    let k = kinetic_connection_with(family, eta, point, mu, h)?;
    let (dr, _) = frame_derivative(frames, point, mu, h)?;
    Ok(center.left.adjoint() * (dr - k * &center.right) * I)
}

/// All components of the gauge field at `point`.
pub fn gauge_field_sample<Fr, F>(frames: &Fr, family: &F, point: &[f64], h: f64) -> Result<GaugeFieldSample>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    check_axis(family, point, 0, h)?;
    let center = frames.frame(point)?;
    let eta = metric_at(family, point)?;
    let components = (0..family.chart_dim())
        .map(|mu| component(frames, family, &eta, &center, point, mu, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeFieldSample {
        point: point.to_vec(),
        components,
    })
}

/// Σ_μ A_μ·v^μ at `point`, differentiating only along `v`.
pub fn directional_gauge_field<Fr, F>(
    frames: &Fr,
    family: &F,
    point: &[f64],
    v: &[f64],
    h: f64,
) -> Result<ComplexMatrix>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    check_axis(family, point, 0, h)?;
    if v.len() != point.len() {
        return Err(Error::dims(point.len(), v.len()));
    }
    let center = frames.frame(point)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n0 = center.size();
    if norm == 0.0 {
        return Ok(ComplexMatrix::zeros(n0, n0));
    }
    let step = |s: f64| -> Vec<f64> { point.iter().zip(v).map(|(p, d)| p + s * d / norm).collect() };
    let plus = frames.frame(&step(h))?;
    let minus = frames.frame(&step(-h))?;
    let dr = (plus.right - minus.right) * real(norm / (2.0 * h));

    let eta = metric_at(family, point)?;
    let mut k = ComplexMatrix::zeros(center.dim(), center.dim());
    for (mu, &d) in v.iter().enumerate() {
        if d != 0.0 {
            k += kinetic_connection_with(family, &eta, point, mu, h)? * real(d);
        }
    }
    Ok(center.left.adjoint() * (dr - k * &center.right) * I)
}

/// The field with the roles of |φ⟩ and |φ̃⟩ interchanged,
/// Ã_μ = i R†(∂_μ − K̃_μ)L, where K̃_μ = −K_μ† is the connection of η⁻¹.
pub fn swapped_gauge_field_components<Fr, F>(
    frames: &Fr,
    family: &F,
    point: &[f64],
    mu: usize,
    h: f64,
) -> Result<ComplexMatrix>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    check_axis(family, point, mu, h)?;
    let center = frames.frame(point)?;
    let k_tilde = -kinetic_connection(family, point, mu, h)?.adjoint();
    let (_, dl) = frame_derivative(frames, point, mu, h)?;
    Ok(center.right.adjoint() * (dl - k_tilde * &center.left) * I)
}

/// max over μ, a, b of |[i(A_μ)^{ba}]* + i(Ã_μ)^{ab}|.
pub fn antihermiticity_residual<Fr, F>(frames: &Fr, family: &F, point: &[f64], h: f64) -> Result<f64>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    let mut worst = 0.0_f64;
    for mu in 0..family.chart_dim() {
        let a = gauge_field_components(frames, family, point, mu, h)?;
        let at = swapped_gauge_field_components(frames, family, point, mu, h)?;
        let lhs = (a * I).adjoint();
        worst = worst.max(max_abs(&(lhs + at * I)));
    }
    Ok(worst)
}

/// A'_μ = 𝒰⁻¹A_μ𝒰 + 𝒰⁻¹·i·∂_μ𝒰, with ∂_μ𝒰 by central difference.
///
/// `restricted_metric` is the block metric F†ηF at the sample point; 𝒰 must
/// be pseudo-unitary with respect to it.
pub fn gauge_transform<U>(
    sample: &GaugeFieldSample,
    restricted_metric: &ComplexMatrix,
    u: U,
    h: f64,
) -> Result<GaugeFieldSample>
where
    U: Fn(&[f64]) -> Result<ComplexMatrix>,
{
    if !(h > 0.0) {
        return Err(Error::ParamDomain(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let p = &sample.point;
    let u0 = u(p)?;
    let n0 = restricted_metric.nrows();
    ensure_shape(&u0, n0, n0)?;
    let residual = pseudo_unitarity_residual_with(&u0, restricted_metric)?;
    if residual > PSEUDO_UNITARY_TOL {
        return Err(Error::NotPseudoUnitary { residual });
    }
    let u_inv = inverse(&u0)?;
    let components = sample
        .components
        .iter()
        .enumerate()
        .map(|(mu, a)| {
            ensure_shape(a, n0, n0)?;
            let du = (u(&shifted(p, mu, h))? - u(&shifted(p, mu, -h))?) * real(1.0 / (2.0 * h));
            Ok(&u_inv * a * &u0 + &u_inv * du * I)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeFieldSample {
        point: p.clone(),
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaugeholo::family::FnFamily;
    use crate::gaugeholo::frames::{AnalyticFrames, BlockFrame};
    use crate::matrix::{c64, identity, ComplexMatrix};

    #[test]
    fn constant_metric_has_no_connection() {
        let fam = FnFamily::new(2, 1, |_| identity(2)).with_metric(|_| {
            ComplexMatrix::from_row_slice(2, 2, &[real(2.0), c64(0.0, 0.5), c64(0.0, -0.5), real(1.0)])
        });
        let k = kinetic_connection(&fam, &[0.3], 0, DEFAULT_FD_STEP).unwrap();
        assert!(k.norm() < 1e-14);
    }

    #[test]
    fn exponential_metric_connection() {
        let fam = FnFamily::new(2, 1, |_| identity(2)).with_metric(|p| {
            ComplexMatrix::from_row_slice(2, 2, &[real((2.0 * p[0]).exp()), real(0.0), real(0.0), real(1.0)])
        });
        let k = kinetic_connection(&fam, &[0.4], 0, DEFAULT_FD_STEP).unwrap();
        let expected = ComplexMatrix::from_row_slice(2, 2, &[real(-1.0), real(0.0), real(0.0), real(0.0)]);
        assert!((k - expected).norm() < 1e-9);
    }

    #[test]
    fn rough_metric_trips_richardson_check() {
        let fam = FnFamily::new(1, 1, |_| identity(1))
            .with_metric(|p| ComplexMatrix::from_element(1, 1, real(2.0 + (p[0] * 1e4).sin())));
        let err = kinetic_connection(&fam, &[0.1], 0, 1e-3).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn berry_connection_of_a_spin() {
        // Lower state of n·σ in the gauge (−sin(θ/2)e^{-iφ}, cos(θ/2)).
        let fam = FnFamily::new(2, 2, |p: &[f64]| {
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
        });
        let state = |p: &[f64]| -> Result<BlockFrame> {
            let (t, f) = (p[0], p[1]);
            let s = (t / 2.0).sin();
            let v = ComplexMatrix::from_column_slice(2, 1, &[c64(-s * f.cos(), s * f.sin()), real((t / 2.0).cos())]);
            BlockFrame::new(v.clone(), v)
        };
        let frames = AnalyticFrames(state);
        let p = [0.9, 0.4];
        let a = gauge_field_sample(&frames, &fam, &p, DEFAULT_FD_STEP).unwrap();
        // −Im⟨φ|∂_φ φ⟩ = sin²(θ/2)
        let expected = (0.45_f64).sin().powi(2);
        assert!((a.components[1][(0, 0)] - real(expected)).norm() < 1e-9);
        assert!(a.components[0][(0, 0)].norm() < 1e-9);
        assert!(antihermiticity_residual(&frames, &fam, &p, DEFAULT_FD_STEP).unwrap() < 1e-9);
    }

    #[test]
    fn identity_gauge_transform_is_trivial() {
        let s = GaugeFieldSample {
            point: vec![0.1, 0.2],
            components: vec![crate::matrix::pauli_x(), crate::matrix::pauli_z()],
        };
        let t = gauge_transform(&s, &identity(2), |_| Ok(identity(2)), 1e-5).unwrap();
        assert_eq!(t.components, s.components);
        let bad = gauge_transform(&s, &identity(2), |_| Ok(identity(2) * real(2.0)), 1e-5);
        assert!(matches!(bad, Err(Error::NotPseudoUnitary { .. })));
    }
}
