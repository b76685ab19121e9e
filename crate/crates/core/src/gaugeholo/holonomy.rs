use serde::{Deserialize, Serialize};

use crate::biortho::{biorthogonal_eig, pseudo_unitarity_residual_with, Level};
use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, expm, identity, real, ComplexMatrix, C64, I};

use super::family::{check_point, distance, metric_at, Discretization, HamiltonianFamily, ParamLoop};
use super::field::{directional_gauge_field, GaugeFieldSample, DEFAULT_FD_STEP};
use super::frames::{at_index, project_onto_block, BlockFrame, FrameField, ProjectedFrames};

/// Gap between the first and last point below which a path counts as closed.
pub const CLOSURE_TOL: f64 = 1e-12;

/// One straight piece of a discretized loop with the gauge field sampled at
/// its midpoint.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub midpoint_field: GaugeFieldSample,
}

impl PathSegment {
    /// Σ_μ A_μ(λ̄)·Δλ^μ.
    pub fn increment(&self) -> ComplexMatrix {
        let d: Vec<f64> = self.end.iter().zip(&self.start).map(|(b, a)| b - a).collect();
        self.midpoint_field.contract(&d)
    }
}

#[derive(Debug, Clone)]
pub struct HolonomyResult {
    pub matrix: ComplexMatrix,
    pub steps: usize,
    pub pseudo_unitarity_residual: f64,
    /// The metric F†ηF of the base frame F that the residual refers to.
    pub restricted_metric: ComplexMatrix,
    /// Per-segment exponents X_k of the factors exp(iX_k).
    pub segment_log: Vec<ComplexMatrix>,
}

/// Π_k exp(iX_k), later factors on the left.
pub fn ordered_exponential(n0: usize, increments: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut u = identity(n0);
    for x in increments {
        crate::matrix::ensure_shape(x, n0, n0)?;
        u = expm(&(x * I)) * u;
    }
    ensure_finite(&u, "holonomy")?;
    Ok(u)
}

/// U = Π_{k=N…1} exp(i Σ_μ A_μ(λ̄_k)·Δλ^μ_k) over consecutive segments of a
/// closed path. The residual is taken against `restricted_metric`, or the
/// identity when none is given.
pub fn path_ordered_exponential(
    segments: &[PathSegment],
    restricted_metric: Option<&ComplexMatrix>,
) -> Result<HolonomyResult> {
    let first = segments
        .first()
        .ok_or_else(|| Error::InvalidLoop("no segments".into()))?;
    let last = &segments[segments.len() - 1];
    let gap = distance(&first.start, &last.end);
    if gap > CLOSURE_TOL {
        return Err(Error::LoopNotClosed { gap });
    }
    for (k, w) in segments.windows(2).enumerate() {
        if distance(&w[0].end, &w[1].start) > CLOSURE_TOL {
            return Err(Error::InvalidLoop(format!("segments {k} and {} do not join", k + 1)));
        }
    }
    let n0 = first.midpoint_field.components.first().map_or(0, |a| a.nrows());
    let log: Vec<ComplexMatrix> = segments.iter().map(PathSegment::increment).collect();
    let matrix = ordered_exponential(n0, &log)?;
    let metric = restricted_metric.cloned().unwrap_or_else(|| identity(n0));
    Ok(HolonomyResult {
        pseudo_unitarity_residual: pseudo_unitarity_residual_with(&matrix, &metric)?,
        matrix,
        steps: segments.len(),
        restricted_metric: metric,
        segment_log: log,
    })
}

/// Quadrature for the transport across one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentRule {
    /// exp(i A(λ̄)·Δλ).
    Midpoint,
    /// Fourth-order Magnus step from the field at both ends and the
    /// midpoint: X = (a₀ + 4a_m + a₁)/6 + i[a₁, a₀]/12.
    Magnus4,
}

#[derive(Debug, Clone)]
pub struct HolonomyOptions {
    /// Total segment count, shared out over edges by length.
    pub n_steps: usize,
    /// Overrides `n_steps` with a fixed count per edge.
    pub steps_per_edge: Option<usize>,
    pub fd_step: f64,
    pub rule: SegmentRule,
    /// Frame the result is expressed in; defaults to the eigensolver's frame
    /// at the base point.
    pub base_frame: Option<BlockFrame>,
    /// Gap and pairing tolerance.
    pub tol: f64,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        HolonomyOptions {
            n_steps: 2000,
            steps_per_edge: None,
            fd_step: DEFAULT_FD_STEP,
            rule: SegmentRule::Magnus4,
            base_frame: None,
            tol: 1e-8,
        }
    }
}

impl HolonomyOptions {
    fn discretization(&self) -> Discretization {
        match self.steps_per_edge {
            Some(n) => Discretization::PerEdge(n),
            None => Discretization::Total(self.n_steps),
        }
    }
}

fn check_loop<F: HamiltonianFamily + ?Sized>(family: &F, path: &ParamLoop) -> Result<()> {
    if !path.is_closed() {
        let pts = path.points();
        return Err(Error::LoopNotClosed {
            gap: distance(&pts[0], &pts[pts.len() - 1]),
        });
    }
    check_point(family, &path.points()[0])
}

fn segment_exponent<Fr, F>(
    frames: &Fr,
    family: &F,
    a: &[f64],
    b: &[f64],
    rule: SegmentRule,
    h: f64,
) -> Result<ComplexMatrix>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    let d: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    let m: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let am = directional_gauge_field(frames, family, &m, &d, h)?;
    Ok(match rule {
        SegmentRule::Midpoint => am,
        SegmentRule::Magnus4 => {
            let a0 = directional_gauge_field(frames, family, a, &d, h)?;
            let a1 = directional_gauge_field(frames, family, b, &d, h)?;
            (&a0 + am * real(4.0) + &a1) * real(1.0 / 6.0) + (&a1 * &a0 - &a0 * &a1) * (I / 12.0)
        }
    })
}

/// Holonomy of the degenerate block `level` (chosen at the base point)
/// around a closed loop, expressed in the base frame.
///
/// Each segment is transported in the projection gauge whose reference is
/// the frame carried to the segment's first vertex, so consecutive gauges
/// agree at the shared vertex and no transition factors arise.
pub fn holonomy_of_loop<F: HamiltonianFamily + ?Sized>(
    family: &F,
    path: &ParamLoop,
    level: Level,
    opts: &HolonomyOptions,
) -> Result<HolonomyResult> {
    check_loop(family, path)?;
    let vertices = path.discretize(opts.discretization());
    let base = &vertices[0];

    let sys = biorthogonal_eig(&family.hamiltonian(base)?, None)?;
    let (_, block) = sys.block(level)?;
    let block = *block;
    let scale = sys.eigenvalues().iter().map(|e| e.norm()).fold(1.0, f64::max);
    let gap = sys.spectral_gap(&block);
    if gap <= opts.tol * scale {
        return Err(Error::GapClosure { index: 0, gap });
    }
    let base_frame = match &opts.base_frame {
        Some(f) => {
            crate::matrix::ensure_shape(&f.right, sys.dim(), block.len)?;
            f.clone()
        }
        None => BlockFrame::new(sys.right_block(&block), sys.left_block(&block))?,
    };
    let eta = metric_at(family, base)?;
    let restricted = eta.restrict(&base_frame.right)?;

    // Entry: coefficients in the base frame → coefficients in the projected
    // frame at the base point (the identity when the base frame lies in the block).
    let mut carried = project_onto_block(&sys, &block, &base_frame.right, opts.tol).map_err(|e| at_index(e, 0))?;
    let mut u = carried.coefficients_of(&base_frame.right);
    let mut target: C64 = block.eigenvalue;
    let mut log = Vec::with_capacity(vertices.len().saturating_sub(1));

    for (k, w) in vertices.windows(2).enumerate() {
        let gauge = ProjectedFrames::new(family, target, carried.right.clone(), opts.tol);
        let x = segment_exponent(&gauge, family, &w[0], &w[1], opts.rule, opts.fd_step).map_err(|e| at_index(e, k))?;
        u = expm(&(&x * I)) * u;
        log.push(x);
        let (next, e) = gauge.frame_and_eigenvalue(&w[1]).map_err(|e| at_index(e, k + 1))?;
        carried = next;
        target = e;
    }

    // Exit: back into the base frame.
    let matrix = base_frame.coefficients_of(&carried.right) * u;
    ensure_finite(&matrix, "holonomy")?;
    Ok(HolonomyResult {
        pseudo_unitarity_residual: pseudo_unitarity_residual_with(&matrix, &restricted)?,
        matrix,
        steps: log.len(),
        restricted_metric: restricted,
        segment_log: log,
    })
}

/// Holonomy P exp(i∮A) computed in a given single-valued frame field.
/// The result is expressed in the frame at the base point.
pub fn holonomy_in_frames<Fr, F>(
    frames: &Fr,
    family: &F,
    path: &ParamLoop,
    opts: &HolonomyOptions,
) -> Result<HolonomyResult>
where
    Fr: FrameField + ?Sized,
    F: HamiltonianFamily + ?Sized,
{
    check_loop(family, path)?;
    let vertices = path.discretize(opts.discretization());
    let base = frames.frame(&vertices[0])?;
    let eta = metric_at(family, &vertices[0])?;
    let restricted = eta.restrict(&base.right)?;
    let log = vertices
        .windows(2)
        .map(|w| segment_exponent(frames, family, &w[0], &w[1], opts.rule, opts.fd_step))
        .collect::<Result<Vec<_>>>()?;
    let matrix = ordered_exponential(base.size(), &log)?;
    Ok(HolonomyResult {
        pseudo_unitarity_residual: pseudo_unitarity_residual_with(&matrix, &restricted)?,
        matrix,
        steps: log.len(),
        restricted_metric: restricted,
        segment_log: log,
    })
}

/// ∮ Σ_μ ω_μ(λ)dλ^μ by Simpson's rule on every edge.
pub fn line_integral<W>(one_form: W, path: &ParamLoop, steps_per_edge: usize) -> f64
where
    W: Fn(&[f64]) -> Vec<f64>,
{
    let n = steps_per_edge.max(1);
    let mut total = 0.0;
    for w in path.points().windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        let at = |t: f64| -> f64 {
            let p: Vec<f64> = w[0].iter().zip(&d).map(|(a, dd)| a + t * dd).collect();
            one_form(&p).iter().zip(&d).map(|(o, dd)| o * dd).sum()
        };
        for j in 0..n {
            let (t0, t1) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
            total += (t1 - t0) / 6.0 * (at(t0) + 4.0 * at(0.5 * (t0 + t1)) + at(t1));
        }
    }
    total
}

/// exp(−i∫₀ᵀE₀(t)dt) by the trapezoidal rule.
pub fn dynamical_phase<E: Fn(f64) -> f64>(e0: E, t: f64, n_steps: usize) -> Result<C64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::ParamDomain(format!("duration must be positive, got {t}")));
    }
    if n_steps == 0 {
        return Err(Error::ParamDomain("need at least one step".into()));
    }
    let dt = t / n_steps as f64;
    let mut integral = 0.5 * (e0(0.0) + e0(t));
    for k in 1..n_steps {
        integral += e0(k as f64 * dt);
    }
    integral *= dt;
    if !integral.is_finite() {
        return Err(Error::NonFinite("dynamical phase"));
    }
    Ok((-I * integral).exp())
}
