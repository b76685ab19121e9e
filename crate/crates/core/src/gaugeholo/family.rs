use serde::{Deserialize, Serialize};

use crate::biortho::{biorthogonal_eig, metric_from_left, MetricOperator};
use crate::error::{Error, Result};
use crate::matrix::{expm, inverse, real, ComplexMatrix, I};
use crate::random;

/// A smooth map from chart coordinates λ to N×N Hamiltonians, optionally
/// with an analytic metric.
pub trait HamiltonianFamily: Sync {
    fn dim(&self) -> usize;
    fn chart_dim(&self) -> usize;
    fn hamiltonian(&self, point: &[f64]) -> Result<ComplexMatrix>;

    /// Analytic metric at `point`, if the family knows one.
    fn metric(&self, _point: &[f64]) -> Option<Result<MetricOperator>> {
        None
    }
}

pub(crate) fn check_point<F: HamiltonianFamily + ?Sized>(family: &F, point: &[f64]) -> Result<()> {
    if point.len() != family.chart_dim() {
        return Err(Error::dims(
            format!("{} chart coordinates", family.chart_dim()),
            point.len(),
        ));
    }
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("chart point"));
    }
    Ok(())
}

/// The family's metric, or η = Σ|φ̃ₙ⟩⟨φ̃ₙ| from the eigensystem at `point`.
pub fn metric_at<F: HamiltonianFamily + ?Sized>(family: &F, point: &[f64]) -> Result<MetricOperator> {
    check_point(family, point)?;
    match family.metric(point) {
        Some(m) => m,
        None => metric_from_left(&biorthogonal_eig(&family.hamiltonian(point)?, None)?),
    }
}

type MatrixFn = Box<dyn Fn(&[f64]) -> ComplexMatrix + Send + Sync>;

/// Family defined by closures.
pub struct FnFamily {
    dim: usize,
    chart_dim: usize,
    hamiltonian: MatrixFn,
    metric: Option<MatrixFn>,
}

impl FnFamily {
    pub fn new(
        dim: usize,
        chart_dim: usize,
        hamiltonian: impl Fn(&[f64]) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Self {
        FnFamily {
            dim,
            chart_dim,
            hamiltonian: Box::new(hamiltonian),
            metric: None,
        }
    }

    pub fn with_metric(mut self, metric: impl Fn(&[f64]) -> ComplexMatrix + Send + Sync + 'static) -> Self {
        self.metric = Some(Box::new(metric));
        self
    }
}

impl HamiltonianFamily for FnFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn chart_dim(&self) -> usize {
        self.chart_dim
    }

    fn hamiltonian(&self, point: &[f64]) -> Result<ComplexMatrix> {
        check_point(self, point)?;
        let h = (self.hamiltonian)(point);
        crate::matrix::ensure_shape(&h, self.dim, self.dim)?;
        Ok(h)
    }

    fn metric(&self, point: &[f64]) -> Option<Result<MetricOperator>> {
        self.metric.as_ref().map(|m| MetricOperator::new(m(point)))
    }
}

/// Closed or open polyline in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLoop {
    points: Vec<Vec<f64>>,
    closed: bool,
}

/// How a polyline is cut into segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Roughly this many segments in total, shared out by edge length.
    Total(usize),
    /// The same number of segments on every edge of non-zero length.
    PerEdge(usize),
}

impl ParamLoop {
    pub fn new(points: Vec<Vec<f64>>, closed: bool) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidLoop(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidLoop("points have no coordinates".into()));
        }
        if let Some(bad) = points.iter().position(|p| p.len() != d) {
            return Err(Error::InvalidLoop(format!(
                "point {bad} has {} coordinates, expected {d}",
                points[bad].len()
            )));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLoop("non-finite coordinate".into()));
        }
        if closed && points.first() != points.last() {
            let gap = distance(&points[0], &points[points.len() - 1]);
            return Err(Error::LoopNotClosed { gap });
        }
        Ok(ParamLoop { points, closed })
    }

    /// Closed loop through `points`, appending the first point if needed.
    pub fn closed(mut points: Vec<Vec<f64>>) -> Result<Self> {
        if let (Some(first), Some(last)) = (points.first(), points.last()) {
            if first != last {
                points.push(first.clone());
            }
        }
        ParamLoop::new(points, true)
    }

    /// (a₀,a₁) → (b₀,a₁) → (b₀,b₁) → (a₀,b₁) → (a₀,a₁).
    pub fn rectangle(a: [f64; 2], b: [f64; 2]) -> Self {
        let points = vec![
            vec![a[0], a[1]],
            vec![b[0], a[1]],
            vec![b[0], b[1]],
            vec![a[0], b[1]],
            vec![a[0], a[1]],
        ];
        ParamLoop { points, closed: true }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn chart_dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        ParamLoop {
            points,
            closed: self.closed,
        }
    }

    /// Vertices of the refined polyline, including both ends. Zero-length
    /// edges contribute no segments.
    pub fn discretize(&self, steps: Discretization) -> Vec<Vec<f64>> {
        let total = self.length();
        let mut out = vec![self.points[0].clone()];
        for w in self.points.windows(2) {
            let len = distance(&w[0], &w[1]);
            if len == 0.0 {
                continue;
            }
            let n = match steps {
                Discretization::PerEdge(n) => n.max(1),
                Discretization::Total(n) => ((n as f64) * len / total).round().max(1.0) as usize,
            };
            for j in 1..=n {
                let t = j as f64 / n as f64;
                let p: Vec<f64> = if j == n {
                    w[1].clone()
                } else {
                    w[0].iter().zip(&w[1]).map(|(a, b)| a + (b - a) * t).collect()
                };
                out.push(p);
            }
        }
        out
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// JSON form of a loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub chart: String,
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_closed")]
    pub closed: bool,
    #[serde(default)]
    pub steps_per_edge: Option<usize>,
}

fn default_closed() -> bool {
    true
}

impl LoopSpec {
    pub fn to_loop(&self) -> Result<ParamLoop> {
        ParamLoop::new(self.points.clone(), self.closed)
    }
}

/// H(λ) = S(λ)·W(λ)·D·W(λ)†·S(λ)⁻¹ with W = exp(iΣλ^μX_μ) unitary and
/// S = S₀·exp(Σλ^μY_μ). The metric is η = S^{-†}S⁻¹, and the frames
/// R = S·W·Eₖ, L = S^{-†}·W·Eₖ are known in closed form.
#[derive(Debug, Clone)]
pub struct RandomDegenerateFamily {
    spectrum: Vec<f64>,
    s0: ComplexMatrix,
    x: Vec<ComplexMatrix>,
    y: Vec<ComplexMatrix>,
}

impl RandomDegenerateFamily {
    /// `spectrum` may repeat values to create degenerate blocks; `strength`
    /// scales the non-Hermitian drift Y_μ.
    pub fn new(spectrum: &[f64], chart_dim: usize, strength: f64, seed: u64) -> Self {
        let n = spectrum.len();
        let mut rng = random::rng(seed);
        let s0 = random::invertible(n, 5.0, &mut rng);
        let x = (0..chart_dim).map(|_| random::hermitian(n, &mut rng)).collect();
        let y = (0..chart_dim)
            .map(|_| random::hermitian(n, &mut rng) * real(strength))
            .collect();
        RandomDegenerateFamily {
            spectrum: spectrum.to_vec(),
            s0,
            x,
            y,
        }
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    fn parts(&self, point: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
        let n = self.spectrum.len();
        let mut gx = ComplexMatrix::zeros(n, n);
        let mut gy = ComplexMatrix::zeros(n, n);
        for (mu, &l) in point.iter().enumerate() {
            gx += &self.x[mu] * (I * l);
            gy += &self.y[mu] * real(l);
        }
        (expm(&gx), &self.s0 * expm(&gy))
    }

    /// Closed-form right and left frames of the eigenvalues with indices
    /// `cols` (into the spectrum as given).
    pub fn frames(&self, point: &[f64], cols: &[usize]) -> Result<(ComplexMatrix, ComplexMatrix)> {
        check_point(self, point)?;
        let (w, s) = self.parts(point);
        let s_inv = inverse(&s)?;
        let n = self.spectrum.len();
        let e = ComplexMatrix::from_fn(n, cols.len(), |i, j| if cols[j] == i { real(1.0) } else { real(0.0) });
        Ok((&s * &w * &e, s_inv.adjoint() * w * e))
    }
}

impl HamiltonianFamily for RandomDegenerateFamily {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn chart_dim(&self) -> usize {
        self.x.len()
    }

    fn hamiltonian(&self, point: &[f64]) -> Result<ComplexMatrix> {
        check_point(self, point)?;
        let n = self.spectrum.len();
        let (w, s) = self.parts(point);
        let d = ComplexMatrix::from_fn(n, n, |i, j| if i == j { real(self.spectrum[i]) } else { real(0.0) });
        Ok(&s * &w * d * w.adjoint() * inverse(&s)?)
    }

    fn metric(&self, point: &[f64]) -> Option<Result<MetricOperator>> {
        if let Err(e) = check_point(self, point) {
            return Some(Err(e));
        }
        let (_, s) = self.parts(point);
        Some(inverse(&s).and_then(|si| {
            let eta = si.adjoint() * si;
            MetricOperator::new(crate::matrix::hermitian_part(&eta))
        }))
    }
}
