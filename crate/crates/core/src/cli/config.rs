use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::GeneratorMode;
use crate::error::{Error, Result};
use crate::gaugeholo::{HamiltonianFamily, LoopSpec, ParamLoop, RandomDegenerateFamily, SegmentRule};
use crate::matrix::{ComplexMatrix, MatrixJson};
use crate::tripod::{Chart, TripodFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Decompose,
    Holonomy,
    Evolve,
    TripodGates,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    TripodU1 {
        alpha: f64,
        delta: f64,
        #[serde(default = "one")]
        kappa: f64,
    },
    TripodU2 {
        alpha: f64,
        delta: f64,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// Degenerate pseudo-Hermitian family with a known metric.
    Random {
        spectrum: Vec<f64>,
        #[serde(default = "two")]
        chart_dim: usize,
        #[serde(default = "default_strength")]
        strength: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Fixed matrix, optionally with a metric.
    Inline {
        matrix: MatrixJson,
        #[serde(default)]
        metric: Option<MatrixJson>,
    },
    /// Time-dependent system whose metric oscillates once over the run.
    BreathingMetric {
        dim: usize,
        #[serde(default = "default_strength")]
        strength: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn default_strength() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoopConfig {
    /// Axis-aligned rectangle with corners a and b, traversed a → (b₀, a₁) → b → (a₀, b₁) → a.
    Rectangle {
        rectangle: [[f64; 2]; 2],
    },
    Points(LoopSpec),
}

impl LoopConfig {
    pub fn to_loop(&self) -> Result<ParamLoop> {
        match self {
            LoopConfig::Rectangle { rectangle: [a, b] } => {
                if a.iter().chain(b).any(|x| !x.is_finite()) || a[0] == b[0] || a[1] == b[1] {
                    return Err(Error::ConfigInvalid("degenerate or non-finite rectangle".into()));
                }
                Ok(ParamLoop::rectangle(*a, *b))
            }
            LoopConfig::Points(spec) => spec.to_loop(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Gate/holonomy discrepancy against a closed form.
    pub discrepancy: f64,
    pub pseudo_unitarity: f64,
    /// Decomposition and pseudo-Hermiticity residuals.
    pub residual: f64,
    /// η-norm drift and metric ODE residual.
    pub drift: f64,
    /// Minimum drift the H-only control run must show.
    pub control_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            discrepancy: 1e-6,
            pseudo_unitarity: 1e-8,
            residual: 1e-10,
            drift: 1e-6,
            control_drift: 1e-2,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            self.discrepancy,
            self.pseudo_unitarity,
            self.residual,
            self.drift,
            self.control_drift,
        ];
        if all.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::ConfigInvalid("tolerances must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericOptions {
    /// Holonomy segments, or RK4 steps for evolve.
    pub n_steps: Option<usize>,
    pub steps_per_edge: Option<usize>,
    pub fd_step: f64,
    pub rule: SegmentRule,
    /// Loop duration(s) for evolve; each is run and compared.
    pub durations: Vec<f64>,
    pub generator: GeneratorMode,
    /// Eigenvalue of the block to follow.
    pub level: f64,
    /// Chart point for decompose.
    pub point: Option<Vec<f64>>,
    /// Rectangle height for the tripod presets when no loop is given:
    /// (0, 0) → (ϑ₀, 0) → (ϑ₀, 2π) → (0, 2π) → (0, 0).
    pub theta0: Option<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            n_steps: None,
            steps_per_edge: None,
            fd_step: crate::gaugeholo::DEFAULT_FD_STEP,
            rule: SegmentRule::Magnus4,
            durations: Vec::new(),
            generator: GeneratorMode::Full,
            level: 0.0,
            point: None,
            theta0: None,
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub trajectory: bool,
    pub gauge_field: bool,
    /// Rows in trajectory.csv are thinned to at most this many.
    pub max_trajectory_rows: usize,
    /// Points per loop edge in gauge_field.csv.
    pub field_samples_per_edge: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            trajectory: true,
            gauge_field: true,
            max_trajectory_rows: 10_000,
            field_samples_per_edge: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// One of theta0, alpha, delta, kappa, duration, seed, level.
    pub name: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

pub const SWEEP_PARAMETERS: [&str; 7] = ["theta0", "alpha", "delta", "kappa", "duration", "seed", "level"];

impl SweepAxis {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !SWEEP_PARAMETERS.contains(&self.name.as_str()) {
            return Err(Error::ConfigInvalid(format!(
                "unknown sweep parameter '{}'; expected one of {:?}",
                self.name, SWEEP_PARAMETERS
            )));
        }
        let values = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            },
            _ => {
                return Err(Error::ConfigInvalid(format!(
                    "axis '{}' needs either values or start/stop/count",
                    self.name
                )))
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "axis '{}' has non-finite values",
                self.name
            )));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: ExperimentKind,
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default, rename = "loop")]
    pub path: Option<LoopConfig>,
    #[serde(default)]
    pub options: NumericOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Module filter for verify.
    #[serde(default)]
    pub filter: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.options.tolerances.validate()?;
        let o = &self.options;
        if !(o.fd_step > 0.0 && o.fd_step.is_finite()) {
            return Err(Error::ConfigInvalid("fd_step must be positive".into()));
        }
        if o.n_steps == Some(0) || o.steps_per_edge == Some(0) {
            return Err(Error::ConfigInvalid("step counts must be at least 1".into()));
        }
        if o.durations.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::ConfigInvalid("durations must be positive".into()));
        }
        let needs_system = !matches!(self.kind, ExperimentKind::Verify);
        if needs_system && self.system.is_none() {
            return Err(Error::ConfigInvalid(format!("kind {:?} needs a system", self.kind)));
        }
        match (&self.kind, &self.sweep) {
            (ExperimentKind::Sweep, None) => return Err(Error::ConfigInvalid("sweep needs a sweep block".into())),
            (ExperimentKind::Sweep, Some(s)) => {
                if matches!(s.experiment, ExperimentKind::Sweep | ExperimentKind::Verify) {
                    return Err(Error::ConfigInvalid(
                        "sweep experiment must be a single-run kind".into(),
                    ));
                }
                for axis in &s.axes {
                    axis.grid()?;
                }
            }
            _ => {}
        }
        if let Some(f) = &self.filter {
            if !super::verify::MODULES.contains(&f.as_str()) {
                return Err(Error::ConfigInvalid(format!(
                    "unknown module '{f}'; expected one of {:?}",
                    super::verify::MODULES
                )));
            }
        }
        Ok(())
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match name {
            "theta0" => c.options.theta0 = Some(value),
            "duration" => c.options.durations = vec![value],
            "level" => c.options.level = value,
            "seed" => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::ConfigInvalid(format!(
                        "seed must be a non-negative integer, got {value}"
                    )));
                }
                c.options.seed = value as u64;
                if let Some(SystemSpec::Random { seed, .. } | SystemSpec::BreathingMetric { seed, .. }) = &mut c.system
                {
                    *seed = value as u64;
                }
            }
            "alpha" | "delta" | "kappa" => match &mut c.system {
                Some(SystemSpec::TripodU1 { alpha, delta, kappa } | SystemSpec::TripodU2 { alpha, delta, kappa }) => {
                    *match name {
                        "alpha" => alpha,
                        "delta" => delta,
                        _ => kappa,
                    } = value;
                }
                _ => return Err(Error::ConfigInvalid(format!("'{name}' applies to tripod presets only"))),
            },
            _ => return Err(Error::ConfigInvalid(format!("unknown sweep parameter '{name}'"))),
        }
        Ok(c)
    }

    /// Loop from the config, or the default tripod rectangle of height ϑ₀.
    pub fn resolve_loop(&self) -> Result<ParamLoop> {
        if let Some(p) = &self.path {
            return p.to_loop();
        }
        match (&self.system, self.options.theta0) {
            (Some(SystemSpec::TripodU1 { .. } | SystemSpec::TripodU2 { .. }), Some(t)) => {
                if !(t > 0.0 && t < std::f64::consts::PI) {
                    return Err(Error::ConfigInvalid(format!("theta0 = {t} outside (0, π)")));
                }
                Ok(ParamLoop::rectangle([0.0, 0.0], [t, TAU]))
            }
            _ => Err(Error::ConfigInvalid(
                "no loop given (set `loop`, or `options.theta0` for tripod presets)".into(),
            )),
        }
    }
}

/// A Hamiltonian family built from a preset.
pub enum Family {
    Tripod(TripodFamily),
    Random(RandomDegenerateFamily),
}

impl Family {
    pub fn as_dyn(&self) -> &dyn HamiltonianFamily {
        match self {
            Family::Tripod(f) => f,
            Family::Random(f) => f,
        }
    }
}

impl SystemSpec {
    pub fn family(&self) -> Result<Family> {
        match self {
            SystemSpec::TripodU1 { alpha, delta, kappa } => {
                Ok(Family::Tripod(TripodFamily::new(Chart::U1, *alpha, *delta, *kappa)?))
            }
            SystemSpec::TripodU2 { alpha, delta, kappa } => {
                Ok(Family::Tripod(TripodFamily::new(Chart::U2, *alpha, *delta, *kappa)?))
            }
            SystemSpec::Random {
                spectrum,
                chart_dim,
                strength,
                seed,
            } => {
                if spectrum.is_empty() || spectrum.iter().any(|x| !x.is_finite()) {
                    return Err(Error::ConfigInvalid("spectrum must be non-empty and finite".into()));
                }
                if *chart_dim == 0 || !(strength.is_finite() && *strength >= 0.0) {
                    return Err(Error::ConfigInvalid("chart_dim ≥ 1 and strength ≥ 0 required".into()));
                }
                Ok(Family::Random(RandomDegenerateFamily::new(
                    spectrum, *chart_dim, *strength, *seed,
                )))
            }
            SystemSpec::Inline { .. } | SystemSpec::BreathingMetric { .. } => Err(Error::ConfigInvalid(
                "this experiment needs a parameter family (tripod-u1, tripod-u2 or random)".into(),
            )),
        }
    }

    pub fn inline_matrices(&self) -> Result<Option<(ComplexMatrix, Option<ComplexMatrix>)>> {
        match self {
            SystemSpec::Inline { matrix, metric } => {
                let h = ComplexMatrix::try_from(matrix)?;
                let eta = metric.as_ref().map(ComplexMatrix::try_from).transpose()?;
                Ok(Some((h, eta)))
            }
            _ => Ok(None),
        }
    }
}
