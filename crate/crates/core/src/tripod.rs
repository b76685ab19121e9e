//! The four-level gain/loss tripod: excited level |E⟩ coupled to three
//! ground levels |G⁰⟩, |G⁺⟩, |G⁻⟩ through κ₀, κ₊, κ₋ in a biorthogonal basis
//! fixed by the gain/loss parameter α and the constant Δ.

use serde::{Deserialize, Serialize};

use crate::biortho::{Level, MetricOperator};
use crate::error::{Error, Result};
use crate::gaugeholo::{
    holonomy_of_loop, line_integral, AnalyticFrames, BlockFrame, FrameField, HamiltonianFamily, HolonomyOptions,
    ParamLoop,
};
use crate::matrix::{
    c64, commutator, expm, hermitian_function, inverse, pauli_x, pauli_y, real, ComplexMatrix, ComplexVector, C64, I,
    ONE, ZERO,
};

/// Smallest and largest accepted |α/Δ|; the normalizations diverge at both ends.
pub const ALPHA_RATIO_MIN: f64 = 1e-6;
pub const ALPHA_RATIO_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub kappa0: C64,
    pub kappa_plus: C64,
    pub kappa_minus: C64,
}

impl Couplings {
    pub fn new(kappa0: C64, kappa_plus: C64, kappa_minus: C64) -> Self {
        Couplings {
            kappa0,
            kappa_plus,
            kappa_minus,
        }
    }

    /// κ̄ = √(Σ|κ_c|²).
    pub fn norm(&self) -> f64 {
        (self.kappa0.norm_sqr() + self.kappa_plus.norm_sqr() + self.kappa_minus.norm_sqr()).sqrt()
    }

    /// Components in the ground-state order (G⁰, G⁺, G⁻).
    fn as_array(&self) -> [C64; 3] {
        [self.kappa0, self.kappa_plus, self.kappa_minus]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripodParams {
    pub alpha: f64,
    pub delta: f64,
    pub couplings: Couplings,
}

impl TripodParams {
    pub fn new(alpha: f64, delta: f64, couplings: Couplings) -> Result<Self> {
        check_alpha(alpha, delta)?;
        let k = couplings.as_array();
        if k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::ParamDomain("non-finite coupling".into()));
        }
        if couplings.norm() == 0.0 {
            return Err(Error::ParamDomain("all couplings vanish".into()));
        }
        Ok(TripodParams {
            alpha,
            delta,
            couplings,
        })
    }

    pub fn omega(&self) -> f64 {
        (self.delta * self.delta - self.alpha * self.alpha).sqrt()
    }
}

fn check_alpha(alpha: f64, delta: f64) -> Result<f64> {
    if !(alpha.is_finite() && delta.is_finite()) {
        return Err(Error::ParamDomain("non-finite α or Δ".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::ParamDomain(format!("Δ must be positive, got {delta}")));
    }
    let ratio = (alpha / delta).abs();
    if !(ALPHA_RATIO_MIN..=ALPHA_RATIO_MAX).contains(&ratio) {
        return Err(Error::ParamDomain(format!(
            "|α/Δ| = {ratio:.3e} outside [{ALPHA_RATIO_MIN:e}, {ALPHA_RATIO_MAX}]"
        )));
    }
    Ok((delta * delta - alpha * alpha).sqrt())
}

/// The biorthogonal basis {E, G⁰, G⁻, G⁺} and its tilde partners (complex
/// conjugates).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenframe {
    pub e: ComplexVector,
    pub g0: ComplexVector,
    pub g_minus: ComplexVector,
    pub g_plus: ComplexVector,
}

impl Eigenframe {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let omega = check_alpha(alpha, delta)?;
        let n1 = real(1.0 / (2.0 * omega * (delta - omega)).sqrt());
        let n2 = I / (2.0 * omega * (delta + omega)).sqrt();
        let a = real(alpha);
        let p = c64(0.0, omega - delta);
        let q = c64(0.0, -(omega + delta));
        let v = |x: [C64; 4], n: C64| ComplexVector::from_column_slice(&x) * n;
        Ok(Eigenframe {
            e: v([p, ZERO, a, ZERO], n1),
            g0: v([ZERO, p, ZERO, a], n1),
            g_minus: v([q, ZERO, a, ZERO], n2),
            g_plus: v([ZERO, q, ZERO, a], n2),
        })
    }

    /// Columns (E, G⁰, G⁺, G⁻).
    pub fn right(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&[
            self.e.clone(),
            self.g0.clone(),
            self.g_plus.clone(),
            self.g_minus.clone(),
        ])
    }

    /// Columns (Ẽ, G̃⁰, G̃⁺, G̃⁻).
    pub fn left(&self) -> ComplexMatrix {
        self.right().map(|z| z.conj())
    }

    /// The state Σ cₓ|X⟩ and its partner Σ cₓ|X̃⟩ for coefficients over
    /// (E, G⁰, G⁺, G⁻). Partners are biorthonormal whenever the coefficient
    /// vectors are orthonormal.
    pub fn combine(&self, coeffs: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        (self.right() * coeffs, self.left() * coeffs)
    }
}

/// Σ_c κ_c|G^c⟩⟨Ẽ| + κ_c*|E⟩⟨G̃^c|.
pub fn build_hamiltonian(p: &TripodParams) -> Result<ComplexMatrix> {
    let f = Eigenframe::new(p.alpha, p.delta)?;
    Ok(dyadic_hamiltonian(&f, &p.couplings))
}

fn dyadic_hamiltonian(f: &Eigenframe, c: &Couplings) -> ComplexMatrix {
    let et = f.e.map(|z| z.conj());
    let mut h = ComplexMatrix::zeros(4, 4);
    for (k, g) in c.as_array().into_iter().zip([&f.g0, &f.g_plus, &f.g_minus]) {
        let gt = g.map(|z| z.conj());
        h += g * et.adjoint() * k + &f.e * gt.adjoint() * k.conj();
    }
    h
}

/// The Hermitian part L of H = L − iΓ.
pub fn l_matrix(p: &TripodParams) -> ComplexMatrix {
    let (d, o, a) = (p.delta, p.omega(), p.alpha);
    let [k0, kp, km] = p.couplings.as_array();
    let x = (d + o) * km + (d - o) * km.conj();
    let y = a * a / (d - o);
    let m = ComplexMatrix::from_row_slice(
        4,
        4,
        &[
            ZERO,
            k0.conj() * (o - d),
            x,
            kp.conj() * (d - o),
            k0 * (o - d),
            ZERO,
            kp * (d + o),
            ZERO,
            x.conj(),
            kp.conj() * (d + o),
            ZERO,
            k0.conj() * y,
            kp * (d - o),
            ZERO,
            k0 * y,
            ZERO,
        ],
    );
    m * real(1.0 / (2.0 * o))
}

/// The anti-Hermitian part Γ of H = L − iΓ. The corner entries are
/// ±α(κ₋ + κ₋*)/(2Ω), the values the dyadic form requires.
pub fn gamma_matrix(p: &TripodParams) -> ComplexMatrix {
    let [k0, kp, km] = p.couplings.as_array();
    let corner = km + km.conj();
    let m = ComplexMatrix::from_row_slice(
        4,
        4,
        &[
            corner,
            kp.conj(),
            ZERO,
            k0.conj(),
            kp,
            ZERO,
            k0,
            ZERO,
            ZERO,
            k0.conj(),
            -corner,
            -kp.conj(),
            k0,
            ZERO,
            -kp,
            ZERO,
        ],
    );
    m * real(p.alpha / (2.0 * p.omega()))
}

pub fn hamiltonian_from_l_gamma(p: &TripodParams) -> ComplexMatrix {
    l_matrix(p) - gamma_matrix(p) * I
}

/// η = |Ẽ⟩⟨Ẽ| + Σ_c |G̃^c⟩⟨G̃^c|. Depends on α and Δ only.
pub fn metric(alpha: f64, delta: f64) -> Result<MetricOperator> {
    let l = Eigenframe::new(alpha, delta)?.left();
    MetricOperator::new(&l * l.adjoint())
}

/// Two-parameter slices of coupling space used for the gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    #[serde(rename = "u1")]
    U1,
    #[serde(rename = "u2")]
    U2,
}

impl Chart {
    /// Couplings at (ϑ, φ). Defined for all real angles so that
    /// finite-difference stencils may straddle the chart boundary.
    pub fn couplings(self, theta: f64, phi: f64, kappa: f64) -> Couplings {
        match self {
            Chart::U1 => u1_chart_couplings(theta, phi, kappa),
            Chart::U2 => u2_chart_couplings(theta, phi, kappa),
        }
    }

    /// Coefficient columns (D¹, D², B⁺, B⁻) over (E, G⁰, G⁺, G⁻).
    pub fn state_coefficients(self, theta: f64, phi: f64) -> ComplexMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Chart::U1 => {
                let (s, c) = (theta / 2.0).sin_cos();
                let e = C64::from_polar(1.0, phi);
                ComplexMatrix::from_row_slice(
                    4,
                    4,
                    &[
                        ZERO,
                        ZERO,
                        -e * r,
                        e * r,
                        ZERO,
                        e * s,
                        -e * c * r,
                        -e * c * r,
                        ZERO,
                        real(c),
                        real(s * r),
                        real(s * r),
                        ONE,
                        ZERO,
                        ZERO,
                        ZERO,
                    ],
                )
            }
            Chart::U2 => {
                let (st, ct) = theta.sin_cos();
                let (sp, cp) = phi.sin_cos();
                // Bright: (B_G ± E)/√2 with B_G = Σ κ_c G^c / κ.
                ComplexMatrix::from_row_slice(
                    4,
                    4,
                    &[
                        ZERO,
                        ZERO,
                        real(r),
                        real(-r),
                        real(-st),
                        ZERO,
                        real(ct * r),
                        real(ct * r),
                        real(ct * sp),
                        real(cp),
                        real(st * sp * r),
                        real(st * sp * r),
                        real(ct * cp),
                        real(-sp),
                        real(st * cp * r),
                        real(st * cp * r),
                    ],
                )
            }
        }
    }
}

/// U₁ slice: (κ₀, κ₊, κ₋) = (κ cos(ϑ/2), −κ sin(ϑ/2)e^{−iφ}, 0).
pub fn u1_chart_couplings(theta: f64, phi: f64, kappa: f64) -> Couplings {
    let (s, c) = (theta / 2.0).sin_cos();
    Couplings::new(real(kappa * c), C64::from_polar(-kappa * s, -phi), ZERO)
}

/// U₂ slice: (κ₀, κ₊, κ₋) = (κ cos ϑ, κ sin ϑ sin φ, κ sin ϑ cos φ).
pub fn u2_chart_couplings(theta: f64, phi: f64, kappa: f64) -> Couplings {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Couplings::new(real(kappa * ct), real(kappa * st * sp), real(kappa * st * cp))
}

/// A validated chart point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: Chart,
    pub theta: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl ChartPoint {
    pub fn new(chart: Chart, theta: f64, phi: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::ParamDomain(format!("κ must be positive, got {kappa}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::ParamDomain(format!(
                "ϑ = {theta} outside [0, π] or φ not finite"
            )));
        }
        Ok(ChartPoint {
            chart,
            theta,
            phi,
            kappa,
        })
    }

    pub fn couplings(&self) -> Couplings {
        self.chart.couplings(self.theta, self.phi, self.kappa)
    }
}

/// Dark and bright states at a chart point, with their tilde partners.
#[derive(Debug, Clone)]
pub struct ChartStates {
    /// Columns D¹, D².
    pub dark: BlockFrame,
    /// Columns B⁺, B⁻ (eigenvalues +κ, −κ).
    pub bright: BlockFrame,
}

impl ChartStates {
    /// η = Σ_a |D̃ᵃ⟩⟨D̃ᵃ| + Σ_± |B̃^±⟩⟨B̃^±|.
    pub fn metric(&self) -> ComplexMatrix {
        &self.dark.left * self.dark.left.adjoint() + &self.bright.left * self.bright.left.adjoint()
    }
}

fn chart_states(frame: &Eigenframe, chart: Chart, theta: f64, phi: f64) -> ChartStates {
    let (r, l) = frame.combine(&chart.state_coefficients(theta, phi));
    ChartStates {
        dark: BlockFrame {
            right: r.columns(0, 2).into_owned(),
            left: l.columns(0, 2).into_owned(),
        },
        bright: BlockFrame {
            right: r.columns(2, 2).into_owned(),
            left: l.columns(2, 2).into_owned(),
        },
    }
}

pub fn dark_bright_states_u1(point: &ChartPoint, alpha: f64, delta: f64) -> Result<ChartStates> {
    if point.chart != Chart::U1 {
        return Err(Error::ConfigInvalid("expected a U1 chart point".into()));
    }
    Ok(chart_states(
        &Eigenframe::new(alpha, delta)?,
        Chart::U1,
        point.theta,
        point.phi,
    ))
}

pub fn dark_states_u2(point: &ChartPoint, alpha: f64, delta: f64) -> Result<BlockFrame> {
    if point.chart != Chart::U2 {
        return Err(Error::ConfigInvalid("expected a U2 chart point".into()));
    }
    Ok(chart_states(&Eigenframe::new(alpha, delta)?, Chart::U2, point.theta, point.phi).dark)
}

/// Bright states (B_G ± E)/√2 for arbitrary couplings, B_G = Σκ_c G^c/κ̄.
pub fn bright_states(frame: &Eigenframe, c: &Couplings) -> BlockFrame {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let kb = c.norm();
    let coeffs = ComplexMatrix::from_row_slice(
        4,
        2,
        &[
            real(r),
            real(-r),
            c.kappa0 * (r / kb),
            c.kappa0 * (r / kb),
            c.kappa_plus * (r / kb),
            c.kappa_plus * (r / kb),
            c.kappa_minus * (r / kb),
            c.kappa_minus * (r / kb),
        ],
    );
    let (right, left) = frame.combine(&coeffs);
    BlockFrame { right, left }
}

/// H(ϑ, φ) on one chart at fixed α, Δ, κ. Its metric is built from the
/// chart's own dark and bright partners.
#[derive(Debug, Clone)]
pub struct TripodFamily {
    pub alpha: f64,
    pub delta: f64,
    pub kappa: f64,
    pub chart: Chart,
    frame: Eigenframe,
}

impl TripodFamily {
    pub fn new(chart: Chart, alpha: f64, delta: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::ParamDomain(format!("κ must be positive, got {kappa}")));
        }
        Ok(TripodFamily {
            alpha,
            delta,
            kappa,
            chart,
            frame: Eigenframe::new(alpha, delta)?,
        })
    }

    pub fn eigenframe(&self) -> &Eigenframe {
        &self.frame
    }

    pub fn states(&self, theta: f64, phi: f64) -> ChartStates {
        chart_states(&self.frame, self.chart, theta, phi)
    }

    pub fn couplings(&self, theta: f64, phi: f64) -> Couplings {
        self.chart.couplings(theta, phi, self.kappa)
    }

    /// The closed-form dark states as a frame field over (ϑ, φ).
    pub fn dark_frames(&self) -> impl FrameField + '_ {
        AnalyticFrames(move |p: &[f64]| -> Result<BlockFrame> {
            if p.len() != 2 {
                return Err(Error::dims(2, p.len()));
            }
            Ok(self.states(p[0], p[1]).dark)
        })
    }
}

impl HamiltonianFamily for TripodFamily {
    fn dim(&self) -> usize {
        4
    }

    fn chart_dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, point: &[f64]) -> Result<ComplexMatrix> {
        if point.len() != 2 {
            return Err(Error::dims(2, point.len()));
        }
        Ok(dyadic_hamiltonian(&self.frame, &self.couplings(point[0], point[1])))
    }

    fn metric(&self, point: &[f64]) -> Option<Result<MetricOperator>> {
        if point.len() != 2 {
            return Some(Err(Error::dims(2, point.len())));
        }
        Some(MetricOperator::new(self.states(point[0], point[1]).metric()))
    }
}

/// exp(iβ₁|1⟩⟨1̃|) = diag(1, e^{iβ₁}).
pub fn u1_gate(beta1: f64) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, beta1)])
}

/// exp(iβ₂σʸ) = [[cos β₂, sin β₂], [−sin β₂, cos β₂]].
pub fn u2_gate(beta2: f64) -> ComplexMatrix {
    let (s, c) = beta2.sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[real(c), real(s), real(-s), real(c)])
}

/// ‖[U₁, U₂] − sin β₂ (1 − e^{iβ₁}) σˣ‖_F.
pub fn commutator_check(beta1: f64, beta2: f64) -> f64 {
    let lhs = commutator(&u1_gate(beta1), &u2_gate(beta2));
    let rhs = pauli_x() * (real(1.0) - C64::from_polar(1.0, beta1)) * real(beta2.sin());
    (lhs - rhs).norm()
}

/// ‖[U₁, U₂]‖_F.
pub fn commutator_norm(beta1: f64, beta2: f64) -> f64 {
    commutator(&u1_gate(beta1), &u2_gate(beta2)).norm()
}

#[derive(Debug, Clone, Serialize)]
pub struct TripodGateReport {
    pub beta: f64,
    #[serde(skip)]
    pub gate: ComplexMatrix,
    #[serde(skip)]
    pub numeric_holonomy: ComplexMatrix,
    pub discrepancy: f64,
    /// Residual of the numeric holonomy under the dark-block metric.
    pub pseudo_unitarity_residual: f64,
    /// Residual of the closed-form gate under the same metric.
    pub gate_pseudo_unitarity_residual: f64,
}

/// Simpson panels per edge for the β line integrals.
const BETA_PANELS: usize = 2000;

/// β₁ = −∮ sin²(ϑ/2) dφ.
pub fn beta1(path: &ParamLoop) -> f64 {
    line_integral(|p| vec![0.0, -(p[0] / 2.0).sin().powi(2)], path, BETA_PANELS)
}

/// β₂ = ∮ cos ϑ dφ.
pub fn beta2(path: &ParamLoop) -> f64 {
    line_integral(|p| vec![0.0, p[0].cos()], path, BETA_PANELS)
}

fn gate_report(
    family: &TripodFamily,
    path: &ParamLoop,
    beta: f64,
    gate: ComplexMatrix,
    opts: &HolonomyOptions,
) -> Result<TripodGateReport> {
    let base = &path.points()[0];
    let mut opts = opts.clone();
    opts.base_frame = Some(family.states(base[0], base[1]).dark);
    let hol = holonomy_of_loop(family, path, Level::Value(ZERO), &opts)?;
    let gate_residual = crate::biortho::pseudo_unitarity_residual_with(&gate, &hol.restricted_metric)?;
    Ok(TripodGateReport {
        beta,
        discrepancy: (&gate - &hol.matrix).norm(),
        gate,
        numeric_holonomy: hol.matrix,
        pseudo_unitarity_residual: hol.pseudo_unitarity_residual,
        gate_pseudo_unitarity_residual: gate_residual,
    })
}

/// Closed-form U₁ gate of a loop in the U₁ chart against the numeric holonomy.
pub fn gate_u1(
    path: &ParamLoop,
    alpha: f64,
    delta: f64,
    kappa: f64,
    opts: &HolonomyOptions,
) -> Result<TripodGateReport> {
    let family = TripodFamily::new(Chart::U1, alpha, delta, kappa)?;
    let b = beta1(path);
    gate_report(&family, path, b, u1_gate(b), opts)
}

/// Closed-form U₂ gate of a loop in the U₂ chart against the numeric holonomy.
pub fn gate_u2(
    path: &ParamLoop,
    alpha: f64,
    delta: f64,
    kappa: f64,
    opts: &HolonomyOptions,
) -> Result<TripodGateReport> {
    let family = TripodFamily::new(Chart::U2, alpha, delta, kappa)?;
    let b = beta2(path);
    gate_report(&family, path, b, u2_gate(b), opts)
}

/// Hermitian counterparts of H: u = η^{1/2}, v = (u†)⁻¹, h = uHv†, h̃ = ηH.
#[derive(Debug, Clone)]
pub struct HermitianCounterpart {
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
    pub h: ComplexMatrix,
    pub h_tilde: ComplexMatrix,
}

pub fn hermitian_counterpart(p: &TripodParams) -> Result<HermitianCounterpart> {
    let eta = metric(p.alpha, p.delta)?;
    let ham = build_hamiltonian(p)?;
    let u = hermitian_function(eta.matrix(), f64::sqrt);
    let v = inverse(&u.adjoint())?;
    let h = &u * &ham * v.adjoint();
    let h_tilde = eta.matrix() * &ham;
    Ok(HermitianCounterpart { u, v, h, h_tilde })
}

/// exp(iβσʸ) built by the general matrix exponential, for cross-checks.
pub fn u2_gate_by_expm(beta2: f64) -> ComplexMatrix {
    expm(&(pauli_y() * (I * beta2)))
}
