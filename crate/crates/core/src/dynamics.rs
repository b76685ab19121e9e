//! Time evolution under i∂ₜψ = Λψ with the time-displacement generator
//! Λ = H + iK, K = −η⁻¹η̇/2, which keeps ⟨ψ|η(t)|ψ⟩ constant when the metric
//! itself moves.

use serde::{Deserialize, Serialize};

use crate::biortho::{biorthogonal_eig, Level, MetricOperator};
use crate::error::{Error, Result};
use crate::gaugeholo::{metric_at, BlockFrame, HamiltonianFamily, ParamLoop, RICHARDSON_TOL};
use crate::matrix::{all_finite, ensure_square, expm, inverse, real, ComplexMatrix, ComplexVector, I};
use crate::random;

/// Relative excited population above which a gate extraction is flagged.
pub const LEAKAGE_WARN: f64 = 1e-3;
/// Relative excited population above which a gate extraction is refused.
pub const LEAKAGE_ERROR: f64 = 1e-1;
/// Largest excited population tolerated in an initial state.
pub const INITIAL_LEAKAGE_TOL: f64 = 1e-6;

/// Default time step for metric derivatives, relative to max(1, T).
pub const DEFAULT_TIME_FD_STEP: f64 = 1e-5;

pub trait TimeDependentSystem: Sync {
    fn dim(&self) -> usize;
    fn duration(&self) -> f64;
    fn hamiltonian(&self, t: f64) -> Result<ComplexMatrix>;
    fn metric(&self, t: f64) -> Result<MetricOperator>;
}

type TimeFn = Box<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// System given by closures for H(t) and η(t).
pub struct FnSystem {
    dim: usize,
    duration: f64,
    hamiltonian: TimeFn,
    metric: TimeFn,
}

impl FnSystem {
    pub fn new<H, E>(dim: usize, duration: f64, hamiltonian: H, metric: E) -> Result<Self>
    where
        H: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
        E: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        check_duration(duration)?;
        Ok(FnSystem {
            dim,
            duration,
            hamiltonian: Box::new(hamiltonian),
            metric: Box::new(metric),
        })
    }

    /// H = 0 with η(t) = diag(e^{2t}, 1).
    pub fn exponential_metric(duration: f64) -> Result<Self> {
        FnSystem::new(
            2,
            duration,
            |_| ComplexMatrix::zeros(2, 2),
            |t| ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&[real((2.0 * t).exp()), real(1.0)])),
        )
    }

    /// H(t) = S(t)·D·S(t)⁻¹ and η(t) = S(t)^{-†}S(t)⁻¹ with
    /// S(t) = exp(strength·sin(2πt/T)·Y) for a random Hermitian Y and a
    /// random real diagonal D. Pseudo-Hermitian at every t, with a metric
    /// that breathes once over the run.
    pub fn breathing_metric(dim: usize, duration: f64, strength: f64, seed: u64) -> Result<Self> {
        let mut rng = random::rng(seed);
        let y = random::hermitian(dim, &mut rng);
        let d = ComplexMatrix::from_diagonal(&ComplexVector::from_fn(dim, |i, _| {
            real(i as f64 - (dim as f64 - 1.0) / 2.0)
        }));
        let s = move |t: f64| expm(&(&y * real(strength * (std::f64::consts::TAU * t / duration).sin())));
        let s2 = s.clone();
        FnSystem::new(
            dim,
            duration,
            move |t| {
                let m = s(t);
                let inv = inverse(&m).expect("exp of a Hermitian matrix is invertible");
                &m * &d * inv
            },
            move |t| {
                let inv = inverse(&s2(t)).expect("exp of a Hermitian matrix is invertible");
                inv.adjoint() * inv
            },
        )
    }
}

impl TimeDependentSystem for FnSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn hamiltonian(&self, t: f64) -> Result<ComplexMatrix> {
        Ok((self.hamiltonian)(t))
    }

    fn metric(&self, t: f64) -> Result<MetricOperator> {
        MetricOperator::new((self.metric)(t))
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::ParamDomain(format!("duration must be positive, got {duration}")));
    }
    Ok(())
}

/// A family driven once around a closed loop in time T. Each edge takes time
/// proportional to its length and is traversed with a smoothstep profile, so
/// the chart velocity vanishes at every vertex.
pub struct LoopDrive<'a, F: HamiltonianFamily + ?Sized> {
    family: &'a F,
    path: ParamLoop,
    duration: f64,
    /// (start time, edge time, start point, end point) per non-degenerate edge.
    edges: Vec<(f64, f64, Vec<f64>, Vec<f64>)>,
}

impl<'a, F: HamiltonianFamily + ?Sized> LoopDrive<'a, F> {
    pub fn new(family: &'a F, path: ParamLoop, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        if path.chart_dim() != family.chart_dim() {
            return Err(Error::dims(family.chart_dim(), path.chart_dim()));
        }
        let total = path.length();
        if total == 0.0 {
            return Err(Error::InvalidLoop("loop has zero length".into()));
        }
        let mut edges = Vec::new();
        let mut t0 = 0.0;
        for w in path.points().windows(2) {
            let len: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if len == 0.0 {
                continue;
            }
            let dt = duration * len / total;
            edges.push((t0, dt, w[0].clone(), w[1].clone()));
            t0 += dt;
        }
        Ok(LoopDrive {
            family,
            path,
            duration,
            edges,
        })
    }

    pub fn path(&self) -> &ParamLoop {
        &self.path
    }

    pub fn family(&self) -> &F {
        self.family
    }

    /// Chart point at time t; clamped to the endpoints outside [0, T].
    pub fn point(&self, t: f64) -> Vec<f64> {
        let idx = self.edges.iter().rposition(|(start, _, _, _)| *start <= t).unwrap_or(0);
        let (start, dt, a, b) = &self.edges[idx];
        let u = ((t - start) / dt).clamp(0.0, 1.0);
        let s = u * u * (3.0 - 2.0 * u);
        a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
    }
}

impl<F: HamiltonianFamily + ?Sized> TimeDependentSystem for LoopDrive<'_, F> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn hamiltonian(&self, t: f64) -> Result<ComplexMatrix> {
        self.family.hamiltonian(&self.point(t))
    }

    fn metric(&self, t: f64) -> Result<MetricOperator> {
        metric_at(self.family, &self.point(t))
    }
}

fn default_step<S: TimeDependentSystem + ?Sized>(sys: &S) -> f64 {
    DEFAULT_TIME_FD_STEP * sys.duration().max(1.0)
}

fn check_time<S: TimeDependentSystem + ?Sized>(sys: &S, t: f64, h: f64) -> Result<()> {
    let big_t = sys.duration();
    if !(0.0..=big_t).contains(&t) {
        return Err(Error::ParamDomain(format!("time {t} outside [0, {big_t}]")));
    }
    if !(h > 0.0 && 4.0 * h <= big_t) {
        return Err(Error::ParamDomain(format!(
            "time step {h} invalid for duration {big_t}"
        )));
    }
    Ok(())
}

/// η̇ at t with step h: central where t ± h fits in [0, T], second-order
/// one-sided otherwise.
fn metric_rate_estimate<S: TimeDependentSystem + ?Sized>(
    sys: &S,
    eta: &MetricOperator,
    t: f64,
    h: f64,
) -> Result<ComplexMatrix> {
    let big_t = sys.duration();
    let m = |s: f64| sys.metric(s).map(|e| e.matrix().clone());
    let scale = real(1.0 / (2.0 * h));
    if t - h >= 0.0 && t + h <= big_t {
        Ok((m(t + h)? - m(t - h)?) * scale)
    } else if t + h <= big_t {
        Ok((m(t + h)? * real(4.0) - m(t + 2.0 * h)? - eta.matrix() * real(3.0)) * scale)
    } else {
        Ok((eta.matrix() * real(3.0) - m(t - h)? * real(4.0) + m(t - 2.0 * h)?) * scale)
    }
}

fn metric_rate<S: TimeDependentSystem + ?Sized>(
    sys: &S,
    eta: &MetricOperator,
    t: f64,
    h: f64,
) -> Result<ComplexMatrix> {
    let coarse = metric_rate_estimate(sys, eta, t, h)?;
    let fine = metric_rate_estimate(sys, eta, t, h / 2.0)?;
    let discrepancy = (&coarse - &fine).norm() / fine.norm().max(1.0);
    if discrepancy > RICHARDSON_TOL {
        return Err(Error::StepTooLarge {
            discrepancy,
            threshold: RICHARDSON_TOL,
        });
    }
    Ok(coarse)
}

/// Λ(t) = H(t) − i·η⁻¹(t)·η̇(t)/2.
pub fn time_generator<S: TimeDependentSystem + ?Sized>(sys: &S, t: f64, h: f64) -> Result<ComplexMatrix> {
    check_time(sys, t, h)?;
    let eta = sys.metric(t)?;
    generator_at(sys, &eta, t, h, GeneratorMode::Full)
}

fn generator_at<S: TimeDependentSystem + ?Sized>(
    sys: &S,
    eta: &MetricOperator,
    t: f64,
    h: f64,
    mode: GeneratorMode,
) -> Result<ComplexMatrix> {
    let ham = sys.hamiltonian(t)?;
    ensure_square(&ham)?;
    if ham.nrows() != sys.dim() {
        return Err(Error::dims(sys.dim(), ham.nrows()));
    }
    match mode {
        GeneratorMode::HamiltonianOnly => Ok(ham),
        GeneratorMode::Full => {
            let rate = metric_rate(sys, eta, t, h)?;
            Ok(ham - eta.inverse() * rate * (I * 0.5))
        }
    }
}

/// ‖iη̇ − (Λ†η − ηΛ)‖_F / ‖η‖_F at time t.
pub fn metric_ode_residual<S: TimeDependentSystem + ?Sized>(sys: &S, t: f64, h: f64) -> Result<f64> {
    check_time(sys, t, h)?;
    let eta = sys.metric(t)?;
    let lambda = generator_at(sys, &eta, t, h, GeneratorMode::Full)?;
    let lhs = metric_rate_estimate(sys, &eta, t, h)? * I;
    let rhs = lambda.adjoint() * eta.matrix() - eta.matrix() * &lambda;
    Ok((lhs - rhs).norm() / eta.matrix().norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    /// Λ = H + iK.
    Full,
    /// Λ = H, ignoring the motion of the metric.
    HamiltonianOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub n_steps: usize,
    pub mode: GeneratorMode,
    /// Metric-derivative step; None picks `DEFAULT_TIME_FD_STEP`·max(1, T).
    pub fd_step: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            n_steps: 10_000,
            mode: GeneratorMode::Full,
            fd_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexVector>,
    pub eta_norms: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &ComplexVector {
        &self.states[0]
    }

    pub fn last(&self) -> &ComplexVector {
        &self.states[self.states.len() - 1]
    }
}

/// Classical RK4 from t = 0 to T.
pub fn evolve<S: TimeDependentSystem + ?Sized>(sys: &S, psi0: &ComplexVector, n_steps: usize) -> Result<Trajectory> {
    let opts = EvolveOptions {
        n_steps,
        ..EvolveOptions::default()
    };
    Ok(evolve_many(sys, std::slice::from_ref(psi0), &opts)?.remove(0))
}

pub fn evolve_with<S: TimeDependentSystem + ?Sized>(
    sys: &S,
    psi0: &ComplexVector,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    Ok(evolve_many(sys, std::slice::from_ref(psi0), opts)?.remove(0))
}

/// Several initial states integrated together, sharing generator evaluations.
pub fn evolve_many<S: TimeDependentSystem + ?Sized>(
    sys: &S,
    psi0: &[ComplexVector],
    opts: &EvolveOptions,
) -> Result<Vec<Trajectory>> {
    let n = sys.dim();
    if psi0.is_empty() {
        return Err(Error::dims("at least one initial state", 0));
    }
    if let Some(bad) = psi0.iter().find(|p| p.len() != n) {
        return Err(Error::dims(n, bad.len()));
    }
    if opts.n_steps == 0 {
        return Err(Error::ParamDomain("n_steps must be at least 1".into()));
    }
    let big_t = sys.duration();
    let h = opts.fd_step.unwrap_or_else(|| default_step(sys));
    check_time(sys, 0.0, h)?;
    let dt = big_t / opts.n_steps as f64;
    if opts.mode == GeneratorMode::Full && h > dt / 2.0 && opts.fd_step.is_none() {
        // Keep the derivative stencil inside one step.
        return evolve_many(
            sys,
            psi0,
            &EvolveOptions {
                fd_step: Some(dt / 4.0),
                ..*opts
            },
        );
    }

    let eval = |t: f64| -> Result<(ComplexMatrix, MetricOperator)> {
        let eta = sys.metric(t)?;
        let g = generator_at(sys, &eta, t, h, opts.mode)? * (-I);
        Ok((g, eta))
    };

    let mut psi = ComplexMatrix::from_columns(psi0);
    let k = psi.ncols();
    let mut out: Vec<Trajectory> = (0..k)
        .map(|_| Trajectory {
            times: Vec::with_capacity(opts.n_steps + 1),
            states: Vec::with_capacity(opts.n_steps + 1),
            eta_norms: Vec::with_capacity(opts.n_steps + 1),
        })
        .collect();
    let record = |out: &mut Vec<Trajectory>, t: f64, psi: &ComplexMatrix, eta: &MetricOperator| {
        let norms = psi.adjoint() * eta.matrix() * psi;
        for (j, tr) in out.iter_mut().enumerate() {
            tr.times.push(t);
            tr.states.push(psi.column(j).into_owned());
            tr.eta_norms.push(norms[(j, j)].re);
        }
    };

    let (mut g0, eta0) = eval(0.0)?;
    record(&mut out, 0.0, &psi, &eta0);
    for step in 0..opts.n_steps {
        let t = step as f64 * dt;
        let t1 = if step + 1 == opts.n_steps { big_t } else { t + dt };
        let (gm, _) = eval(t + dt / 2.0)?;
        let (g1, eta1) = eval(t1)?;
        let k1 = &g0 * &psi;
        let k2 = &gm * (&psi + &k1 * real(dt / 2.0));
        let k3 = &gm * (&psi + &k2 * real(dt / 2.0));
        let k4 = &g1 * (&psi + &k3 * real(dt));
        psi += (k1 + k2 * real(2.0) + k3 * real(2.0) + k4) * real(dt / 6.0);
        if !all_finite(&psi) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        record(&mut out, t1, &psi, &eta1);
        if out.iter().any(|tr| !tr.eta_norms[step + 1].is_finite()) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        g0 = g1;
    }
    Ok(out)
}

/// max_k |⟨ψ_k|η_k|ψ_k⟩ − ⟨ψ₀|η₀|ψ₀⟩| / |⟨ψ₀|η₀|ψ₀⟩|.
pub fn norm_conservation_drift(traj: &Trajectory) -> f64 {
    let Some(&n0) = traj.eta_norms.first() else {
        return 0.0;
    };
    traj.eta_norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max) / n0.abs()
}

/// Share of the η-norm of ψ outside the span of the dark frame.
pub fn excited_population(psi: &ComplexVector, dark: &BlockFrame, eta: &MetricOperator) -> f64 {
    let projected = &dark.right * (dark.left.adjoint() * psi);
    let bright = psi - projected;
    let num = (bright.adjoint() * eta.matrix() * &bright)[(0, 0)].re;
    let den = (psi.adjoint() * eta.matrix() * psi)[(0, 0)].re;
    num / den
}

#[derive(Debug, Clone)]
pub struct GateExtraction {
    pub gate: ComplexMatrix,
    /// Largest final excited population over the trajectories.
    pub leakage: f64,
    pub warning: Option<String>,
}

/// The n₀×n₀ matrix G with c(T) = G·c(0), coefficients c = L_𝒟†ψ, from n₀
/// trajectories whose initial states span the dark block. `eta` is the
/// metric at the shared start/end point.
pub fn adiabatic_gate_extract(trajs: &[Trajectory], dark: &BlockFrame, eta: &MetricOperator) -> Result<GateExtraction> {
    adiabatic_gate_extract_with(trajs, dark, eta, LEAKAGE_ERROR)
}

/// As `adiabatic_gate_extract` with a caller-chosen leakage limit; pass
/// `f64::INFINITY` to read off gates of strongly non-adiabatic runs.
pub fn adiabatic_gate_extract_with(
    trajs: &[Trajectory],
    dark: &BlockFrame,
    eta: &MetricOperator,
    leakage_limit: f64,
) -> Result<GateExtraction> {
    let n0 = dark.size();
    if trajs.len() != n0 {
        return Err(Error::dims(format!("{n0} trajectories"), trajs.len()));
    }
    let mut c0 = ComplexMatrix::zeros(n0, n0);
    let mut ct = ComplexMatrix::zeros(n0, n0);
    let mut leakage: f64 = 0.0;
    for (j, tr) in trajs.iter().enumerate() {
        if tr.is_empty() {
            return Err(Error::dims("non-empty trajectory", 0));
        }
        let start = excited_population(tr.initial(), dark, eta);
        if start > INITIAL_LEAKAGE_TOL {
            return Err(Error::ExcessLeakage {
                leakage: start,
                threshold: INITIAL_LEAKAGE_TOL,
            });
        }
        leakage = leakage.max(excited_population(tr.last(), dark, eta));
        c0.set_column(j, &(dark.left.adjoint() * tr.initial()));
        ct.set_column(j, &(dark.left.adjoint() * tr.last()));
    }
    if leakage > leakage_limit {
        return Err(Error::ExcessLeakage {
            leakage,
            threshold: leakage_limit,
        });
    }
    let warning = (leakage > LEAKAGE_WARN).then(|| format!("excited population {leakage:.3e} above {LEAKAGE_WARN:e}"));
    Ok(GateExtraction {
        gate: ct * inverse(&c0)?,
        leakage,
        warning,
    })
}

#[derive(Debug, Clone)]
pub struct AdiabaticRun {
    pub gate: ComplexMatrix,
    pub leakage: f64,
    pub warning: Option<String>,
    /// Worst η-norm drift over the dark-basis trajectories.
    pub drift: f64,
    pub trajectories: Vec<Trajectory>,
}

/// Drive `family` once around `path` in time `duration`, starting from each
/// column of `dark` (the level's frame at the base point), and read off the
/// resulting gate.
pub fn adiabatic_loop_gate<F: HamiltonianFamily + ?Sized>(
    family: &F,
    path: &ParamLoop,
    dark: &BlockFrame,
    duration: f64,
    opts: &EvolveOptions,
    leakage_limit: f64,
) -> Result<AdiabaticRun> {
    if !path.is_closed() {
        let pts = path.points();
        let gap = pts[0]
            .iter()
            .zip(&pts[pts.len() - 1])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        return Err(Error::LoopNotClosed { gap });
    }
    let drive = LoopDrive::new(family, path.clone(), duration)?;
    let psi0: Vec<ComplexVector> = (0..dark.size()).map(|j| dark.right.column(j).into_owned()).collect();
    let trajectories = evolve_many(&drive, &psi0, opts)?;
    let eta = drive.metric(0.0)?;
    let ex = adiabatic_gate_extract_with(&trajectories, dark, &eta, leakage_limit)?;
    let drift = trajectories.iter().map(norm_conservation_drift).fold(0.0, f64::max);
    Ok(AdiabaticRun {
        gate: ex.gate,
        leakage: ex.leakage,
        warning: ex.warning,
        drift,
        trajectories,
    })
}

/// Excited population relative to the instantaneous block of `level` at
/// `samples` evenly spaced trajectory indices.
pub fn leakage_profile<F: HamiltonianFamily + ?Sized>(
    drive: &LoopDrive<'_, F>,
    traj: &Trajectory,
    level: Level,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if traj.is_empty() || samples == 0 {
        return Ok(Vec::new());
    }
    let last = traj.len() - 1;
    let mut out = Vec::with_capacity(samples + 1);
    for s in 0..=samples {
        let k = s * last / samples;
        let t = traj.times[k];
        let sys = biorthogonal_eig(&drive.hamiltonian(t)?, None)?;
        let (_, blk) = sys.block(level)?;
        let frame = BlockFrame {
            right: sys.right_block(blk).into_owned(),
            left: sys.left_block(blk).into_owned(),
        };
        out.push((t, excited_population(&traj.states[k], &frame, &drive.metric(t)?)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{c64, identity, max_abs};

    #[test]
    fn constant_metric_generator_is_hamiltonian() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), c64(0.0, 2.0), c64(0.0, 2.0), real(-1.0)]);
        let h2 = h.clone();
        let sys = FnSystem::new(2, 3.0, move |_| h2.clone(), |_| identity(2)).unwrap();
        let g = time_generator(&sys, 1.0, 1e-4).unwrap();
        assert!(max_abs(&(g - h)) < 1e-14);
    }

    #[test]
    fn exponential_metric_generator() {
        let sys = FnSystem::exponential_metric(2.0).unwrap();
        for t in [0.0, 0.7, 2.0] {
            let g = time_generator(&sys, t, 1e-4).unwrap();
            let expected = ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&[-I, real(0.0)]));
            assert!(max_abs(&(g - expected)) < 1e-7, "t = {t}");
            assert!(metric_ode_residual(&sys, t, 1e-4).unwrap() < 1e-8);
        }
    }

    #[test]
    fn rk4_matches_exponential() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[real(0.3), c64(0.5, -0.2), c64(0.5, 0.2), real(-0.8)]);
        let h2 = h.clone();
        let sys = FnSystem::new(2, 3.0, move |_| h2.clone(), |_| identity(2)).unwrap();
        let psi0 = ComplexVector::from_column_slice(&[real(1.0), real(0.0)]);
        let tr = evolve(&sys, &psi0, 10_000).unwrap();
        let exact = expm(&(&h * (-I * 3.0))) * &psi0;
        assert!((tr.last() - exact).norm() < 1e-8);
        assert!(norm_conservation_drift(&tr) < 1e-8);
        assert_eq!(tr.len(), 10_001);
        assert_eq!(*tr.times.last().unwrap(), 3.0);
    }

    #[test]
    fn zero_generator_keeps_state() {
        let sys = FnSystem::new(3, 1.0, |_| ComplexMatrix::zeros(3, 3), |_| identity(3)).unwrap();
        let psi0 = ComplexVector::from_column_slice(&[real(0.2), c64(0.0, 1.0), real(-0.5)]);
        let tr = evolve(&sys, &psi0, 7).unwrap();
        assert!(tr.states.iter().all(|s| (s - &psi0).norm() == 0.0));
    }

    #[test]
    fn moving_metric_needs_the_kinetic_term() {
        let sys = FnSystem::breathing_metric(3, 4.0, 0.5, 11).unwrap();
        let psi0 = ComplexVector::from_column_slice(&[real(1.0), real(0.5), c64(0.0, -0.3)]);
        let full = evolve(&sys, &psi0, 4000).unwrap();
        assert!(norm_conservation_drift(&full) < 1e-6);
        let opts = EvolveOptions {
            n_steps: 4000,
            mode: GeneratorMode::HamiltonianOnly,
            fd_step: None,
        };
        let bare = evolve_with(&sys, &psi0, &opts).unwrap();
        assert!(norm_conservation_drift(&bare) > 1e-2);
        for t in [0.3, 1.9, 3.7] {
            assert!(metric_ode_residual(&sys, t, 1e-4).unwrap() < 1e-6);
        }
    }

    #[test]
    fn domain_checks() {
        let sys = FnSystem::exponential_metric(1.0).unwrap();
        assert!(time_generator(&sys, 1.5, 1e-4).is_err());
        let psi0 = ComplexVector::from_column_slice(&[real(1.0), real(0.0)]);
        assert!(evolve(&sys, &psi0, 0).is_err());
        assert!(FnSystem::exponential_metric(0.0).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = FnSystem::new(
            1,
            1.0,
            |_| ComplexMatrix::from_element(1, 1, c64(0.0, 1e100)),
            |_| identity(1),
        )
        .unwrap();
        let psi0 = ComplexVector::from_element(1, real(1.0));
        assert!(matches!(evolve(&sys, &psi0, 1), Err(Error::NonFiniteState { .. })));
    }
}
