//! Configuration-driven experiment runner behind the `holoq` binary.
//!
//! A run reads one JSON document, dispatches to the library, and writes
//! `report.json` plus whichever of `trajectory.csv`, `gauge_field.csv` and
//! `sweep.csv` the experiment produces.

mod config;
mod dump;
pub mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

pub use config::{
    ExperimentConfig, ExperimentKind, Family, LoopConfig, NumericOptions, OutputConfig, SweepAxis, SweepConfig,
    SystemSpec, Tolerances, SWEEP_PARAMETERS,
};

use crate::biortho::{biorthogonal_eig, metric_from_left, pseudo_hermiticity_residual, Level, MetricOperator};
use crate::dynamics::{
    adiabatic_loop_gate, evolve_with, metric_ode_residual, norm_conservation_drift, EvolveOptions, FnSystem,
    GeneratorMode, Trajectory, LEAKAGE_ERROR,
};
use crate::error::{Error, Result};
use crate::gaugeholo::{
    gauge_field_sample, holonomy_of_loop, metric_at, BlockFrame, Discretization, FrameField, HamiltonianFamily,
    HolonomyOptions, ParamLoop, ProjectedFrames,
};
use crate::matrix::{real, ComplexMatrix, ComplexVector, MatrixJson, C64};
use crate::tripod::{self, Chart};

/// Exit status for a completed run whose invariants did not all hold.
pub const EXIT_INVARIANT_FAILURE: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Below,
    Above,
}

/// One asserted invariant with its measured value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            bound: Bound::Below,
            passed: value < threshold,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            bound: Bound::Above,
            passed: value > threshold,
        }
    }

    pub fn line(&self) -> String {
        let op = match self.bound {
            Bound::Below => "<",
            Bound::Above => ">",
        };
        format!(
            "{} {}: {:.3e} {op} {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub scalars: BTreeMap<String, f64>,
    pub matrices: BTreeMap<String, MatrixJson>,
    pub checks: Vec<Check>,
    pub table: Vec<Map<String, Value>>,
    pub warnings: Vec<String>,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            EXIT_INVARIANT_FAILURE
        }
    }
}

/// Everything an experiment produces; files are written only by `run`.
#[derive(Default)]
struct Outcome {
    scalars: BTreeMap<String, f64>,
    matrices: BTreeMap<String, MatrixJson>,
    checks: Vec<Check>,
    table: Vec<Map<String, Value>>,
    warnings: Vec<String>,
    trajectory: Option<Trajectory>,
    gauge_field: Option<Vec<dump::FieldRow>>,
    sweep_csv: Option<String>,
}

impl Outcome {
    fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_string(), value);
    }

    fn matrix(&mut self, name: &str, m: &ComplexMatrix) {
        self.matrices.insert(name.to_string(), MatrixJson::from(m));
    }
}

/// Run an experiment and, if `out_dir` is given, write its files there.
pub fn run(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Report> {
    config.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let start = Instant::now();
    let outcome = execute(config, true)?;
    let report = Report {
        kind: config.kind,
        config: config.clone(),
        passed: outcome.checks.iter().all(|c| c.passed),
        scalars: outcome.scalars,
        matrices: outcome.matrices,
        checks: outcome.checks,
        table: outcome.table,
        warnings: outcome.warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        if let Some(traj) = &outcome.trajectory {
            std::fs::write(
                dir.join("trajectory.csv"),
                dump::trajectory(traj, config.output.max_trajectory_rows),
            )?;
        }
        if let Some(rows) = &outcome.gauge_field {
            std::fs::write(dir.join("gauge_field.csv"), dump::gauge_field(rows))?;
        }
        if let Some(text) = &outcome.sweep_csv {
            std::fs::write(dir.join("sweep.csv"), text)?;
        }
    }
    Ok(report)
}

fn execute(config: &ExperimentConfig, artifacts: bool) -> Result<Outcome> {
    let mut out = Outcome::default();
    match config.kind {
        ExperimentKind::Decompose => decompose(config, &mut out)?,
        ExperimentKind::Holonomy => holonomy(config, &mut out, artifacts)?,
        ExperimentKind::TripodGates => tripod_gates(config, &mut out, artifacts)?,
        ExperimentKind::Evolve => evolve(config, &mut out, artifacts)?,
        ExperimentKind::Verify => out.checks = verify::run_suites(config.filter.as_deref())?,
        ExperimentKind::Sweep => sweep(config, &mut out)?,
    }
    Ok(out)
}

fn system(config: &ExperimentConfig) -> Result<&SystemSpec> {
    config
        .system
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("missing system".into()))
}

fn decompose(config: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let spec = system(config)?;
    let tol = config.options.tolerances.residual;
    let (h, eta) = match spec.inline_matrices()? {
        Some((h, eta)) => (h, eta.map(MetricOperator::new).transpose()?),
        None => {
            let family = spec.family()?;
            let f = family.as_dyn();
            let point = config.options.point.clone().unwrap_or_else(|| vec![0.0; f.chart_dim()]);
            (f.hamiltonian(&point)?, Some(metric_at(f, &point)?))
        }
    };
    let sys = biorthogonal_eig(&h, None)?;
    let eta = match eta {
        Some(m) => m,
        None => metric_from_left(&sys)?,
    };
    let evs = ComplexVector::from_column_slice(sys.eigenvalues());
    out.matrix(
        "eigenvalues",
        &ComplexMatrix::from_column_slice(evs.len(), 1, evs.as_slice()),
    );
    out.matrix("metric", eta.matrix());
    let max_imag = sys.eigenvalues().iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let ph = pseudo_hermiticity_residual(&h, &eta)?;
    out.scalar("biorthonormality_residual", sys.biorthonormality_residual());
    out.scalar("reconstruction_residual", sys.reconstruction_residual());
    out.scalar("pseudo_hermiticity_residual", ph);
    out.scalar("max_imag_eigenvalue", max_imag);
    out.scalar("min_metric_eigenvalue", eta.min_eigenvalue());
    out.scalar("blocks", sys.blocks().len() as f64);
    out.checks
        .push(Check::below("biorthonormality", sys.biorthonormality_residual(), tol));
    out.checks
        .push(Check::below("reconstruction", sys.reconstruction_residual(), tol));
    out.checks.push(Check::below("pseudo_hermiticity", ph, tol));
    Ok(())
}

/// Frame of the followed level at the loop's base point: the closed-form dark
/// states for the tripod, the eigensolver's block otherwise.
fn base_frame(family: &Family, path: &ParamLoop, level: f64) -> Result<BlockFrame> {
    let base = &path.points()[0];
    match family {
        Family::Tripod(t) => {
            if level != 0.0 {
                return Err(Error::ConfigInvalid(
                    "tripod presets follow the dark level (level = 0)".into(),
                ));
            }
            Ok(t.states(base[0], base[1]).dark)
        }
        Family::Random(f) => {
            let sys = biorthogonal_eig(&f.hamiltonian(base)?, None)?;
            let (_, blk) = sys.block(Level::Value(real(level)))?;
            Ok(BlockFrame {
                right: sys.right_block(blk),
                left: sys.left_block(blk),
            })
        }
    }
}

fn holonomy_options(config: &ExperimentConfig, base: BlockFrame) -> HolonomyOptions {
    let o = &config.options;
    let mut opts = HolonomyOptions {
        steps_per_edge: o.steps_per_edge,
        fd_step: o.fd_step,
        rule: o.rule,
        base_frame: Some(base),
        ..HolonomyOptions::default()
    };
    if let Some(n) = o.n_steps {
        opts.n_steps = n;
    }
    opts
}

fn field_rows(
    config: &ExperimentConfig,
    family: &Family,
    path: &ParamLoop,
    base: &BlockFrame,
) -> Result<Vec<dump::FieldRow>> {
    let points = path.discretize(Discretization::PerEdge(config.output.field_samples_per_edge.max(1)));
    let f = family.as_dyn();
    let sample = |frames: &dyn FrameField| -> Result<Vec<dump::FieldRow>> {
        let mut rows = Vec::new();
        for p in &points {
            let s = gauge_field_sample(frames, f, p, config.options.fd_step)?;
            for (mu, a) in s.components.iter().enumerate() {
                rows.push(dump::FieldRow {
                    point: p.clone(),
                    mu,
                    matrix: a.clone(),
                });
            }
        }
        Ok(rows)
    };
    match family {
        Family::Tripod(t) => sample(&t.dark_frames()),
        Family::Random(_) => sample(&ProjectedFrames::new(
            f,
            real(config.options.level),
            base.right.clone(),
            HolonomyOptions::default().tol,
        )),
    }
}

fn chart_closed_form(chart: Chart, path: &ParamLoop) -> (f64, ComplexMatrix) {
    match chart {
        Chart::U1 => {
            let b = tripod::beta1(path);
            (b, tripod::u1_gate(b))
        }
        Chart::U2 => {
            let b = tripod::beta2(path);
            (b, tripod::u2_gate(b))
        }
    }
}

fn holonomy(config: &ExperimentConfig, out: &mut Outcome, artifacts: bool) -> Result<()> {
    let family = system(config)?.family()?;
    let path = config.resolve_loop()?;
    let level = config.options.level;
    let base = base_frame(&family, &path, level)?;
    let tol = config.options.tolerances;
    let hol = holonomy_of_loop(
        family.as_dyn(),
        &path,
        Level::Value(real(level)),
        &holonomy_options(config, base.clone()),
    )?;
    out.matrix("holonomy", &hol.matrix);
    out.matrix("restricted_metric", &hol.restricted_metric);
    out.scalar("pseudo_unitarity_residual", hol.pseudo_unitarity_residual);
    out.scalar("segments", hol.steps as f64);
    out.checks.push(Check::below(
        "pseudo_unitarity",
        hol.pseudo_unitarity_residual,
        tol.pseudo_unitarity,
    ));
    if let Family::Tripod(t) = &family {
        let (beta, gate) = chart_closed_form(t.chart, &path);
        let d = (&gate - &hol.matrix).norm();
        out.scalar("beta", beta);
        out.scalar("discrepancy", d);
        out.checks
            .push(Check::below("closed_form_discrepancy", d, tol.discrepancy));
    }
    if artifacts && config.output.gauge_field {
        out.gauge_field = Some(field_rows(config, &family, &path, &base)?);
    }
    Ok(())
}

fn tripod_gates(config: &ExperimentConfig, out: &mut Outcome, artifacts: bool) -> Result<()> {
    let family = system(config)?.family()?;
    let Family::Tripod(t) = &family else {
        return Err(Error::ConfigInvalid(
            "tripod-gates needs a tripod-u1 or tripod-u2 system".into(),
        ));
    };
    let path = config.resolve_loop()?;
    let base = t.states(path.points()[0][0], path.points()[0][1]).dark;
    let opts = holonomy_options(config, base.clone());
    let tol = config.options.tolerances;
    let (report, name) = match t.chart {
        Chart::U1 => (tripod::gate_u1(&path, t.alpha, t.delta, t.kappa, &opts)?, "beta1"),
        Chart::U2 => (tripod::gate_u2(&path, t.alpha, t.delta, t.kappa, &opts)?, "beta2"),
    };
    out.scalar(name, report.beta);
    out.scalar("discrepancy", report.discrepancy);
    out.scalar("pseudo_unitarity_residual", report.pseudo_unitarity_residual);
    out.scalar("gate_pseudo_unitarity_residual", report.gate_pseudo_unitarity_residual);
    out.matrix("gate", &report.gate);
    out.matrix("numeric_holonomy", &report.numeric_holonomy);
    out.checks
        .push(Check::below("discrepancy", report.discrepancy, tol.discrepancy));
    out.checks.push(Check::below(
        "pseudo_unitarity",
        report.pseudo_unitarity_residual,
        tol.pseudo_unitarity,
    ));

    if config.path.is_none() {
        if let Some(t0) = config.options.theta0 {
            let closed = match t.chart {
                Chart::U1 => -std::f64::consts::TAU * (t0 / 2.0).sin().powi(2),
                Chart::U2 => std::f64::consts::TAU * (t0.cos() - 1.0),
            };
            out.scalar("beta_closed_form", closed);
            out.checks.push(Check::below(
                "beta_closed_form",
                (report.beta - closed).abs(),
                tol.discrepancy,
            ));
        }
    }

    let (b1, b2) = (tripod::beta1(&path), tripod::beta2(&path));
    let comm = tripod::commutator_check(b1, b2);
    out.scalar("commutator_residual", comm);
    out.scalar("commutator_norm", tripod::commutator_norm(b1, b2));
    out.checks.push(Check::below("commutator_identity", comm, 1e-12));

    if artifacts && config.output.gauge_field {
        out.gauge_field = Some(field_rows(config, &family, &path, &base)?);
    }
    Ok(())
}

fn evolve(config: &ExperimentConfig, out: &mut Outcome, artifacts: bool) -> Result<()> {
    let spec = system(config)?;
    if let SystemSpec::BreathingMetric { dim, strength, seed } = spec {
        return evolve_breathing(config, *dim, *strength, *seed, out, artifacts);
    }
    let family = spec.family()?;
    let path = config.resolve_loop()?;
    let o = &config.options;
    if o.durations.is_empty() {
        return Err(Error::ConfigInvalid("evolve needs options.durations".into()));
    }
    let level = o.level;
    let base = base_frame(&family, &path, level)?;
    let hol = holonomy_of_loop(
        family.as_dyn(),
        &path,
        Level::Value(real(level)),
        &holonomy_options(config, base.clone()),
    )?;
    out.matrix("holonomy", &hol.matrix);
    let opts = EvolveOptions {
        n_steps: o.n_steps.unwrap_or(20_000),
        mode: o.generator,
        fd_step: None,
    };
    let runs: Vec<_> = o
        .durations
        .par_iter()
        .map(|&t| adiabatic_loop_gate(family.as_dyn(), &path, &base, t, &opts, f64::INFINITY))
        .collect::<Result<Vec<_>>>()?;
    let mut errors = Vec::new();
    for (&t, run) in o.durations.iter().zip(&runs) {
        // Level energy E₀ contributes the dynamical factor e^{−iE₀T}.
        let target = &hol.matrix * C64::from_polar(1.0, -level * t);
        let err = (&run.gate - target).norm();
        errors.push((t, err));
        let mut row = Map::new();
        row.insert("duration".into(), t.into());
        row.insert("gate_error".into(), err.into());
        row.insert("leakage".into(), run.leakage.into());
        row.insert("drift".into(), run.drift.into());
        out.table.push(row);
        out.checks
            .push(Check::below(format!("drift[T={t}]"), run.drift, o.tolerances.drift));
        if let Some(w) = &run.warning {
            out.warnings.push(format!("T = {t}: {w}"));
        }
        if run.leakage > LEAKAGE_ERROR {
            out.warnings.push(format!("T = {t}: evolution far from adiabatic"));
        }
    }
    let (t_last, last) = runs
        .iter()
        .zip(&o.durations)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(r, t)| (*t, r))
        .expect("durations are non-empty");
    out.matrix("gate", &last.gate);
    out.scalar("duration", t_last);
    out.scalar(
        "gate_error",
        errors
            .iter()
            .find(|(t, _)| *t == t_last)
            .map(|e| e.1)
            .unwrap_or(f64::NAN),
    );
    out.scalar("leakage", last.leakage);
    out.scalar("drift_max", runs.iter().map(|r| r.drift).fold(0.0, f64::max));
    if errors.len() > 1 {
        let mut sorted = errors.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let worst_step = sorted
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        out.checks.push(Check::below("gate_error_decreasing", worst_step, 0.0));
    }
    if artifacts && config.output.trajectory {
        out.trajectory = last.trajectories.first().cloned();
    }
    Ok(())
}

fn evolve_breathing(
    config: &ExperimentConfig,
    dim: usize,
    strength: f64,
    seed: u64,
    out: &mut Outcome,
    artifacts: bool,
) -> Result<()> {
    if dim == 0 || !strength.is_finite() {
        return Err(Error::ConfigInvalid(
            "breathing-metric needs dim ≥ 1 and finite strength".into(),
        ));
    }
    let o = &config.options;
    let duration = o.durations.first().copied().unwrap_or(4.0);
    let sys = FnSystem::breathing_metric(dim, duration, strength, seed)?;
    let psi0 = ComplexVector::from_element(dim, real(1.0 / (dim as f64).sqrt()));
    let opts = EvolveOptions {
        n_steps: o.n_steps.unwrap_or(4000),
        mode: o.generator,
        fd_step: None,
    };
    let traj = evolve_with(&sys, &psi0, &opts)?;
    let drift = norm_conservation_drift(&traj);
    out.scalar("drift", drift);
    out.scalar("duration", duration);
    let mut rng = crate::random::rng(o.seed);
    let h = 1e-4 * duration;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let t = rand::Rng::random_range(&mut rng, 2.0 * h..duration - 2.0 * h);
        worst = worst.max(metric_ode_residual(&sys, t, h)?);
    }
    out.scalar("metric_ode_residual", worst);
    out.checks.push(Check::below("metric_ode", worst, o.tolerances.drift));
    match o.generator {
        GeneratorMode::Full => out.checks.push(Check::below("drift", drift, o.tolerances.drift)),
        GeneratorMode::HamiltonianOnly => {
            out.checks
                .push(Check::above("control_drift", drift, o.tolerances.control_drift))
        }
    }
    if artifacts && config.output.trajectory {
        out.trajectory = Some(traj);
    }
    Ok(())
}

fn grid(axes: &[SweepAxis]) -> Result<Vec<Vec<f64>>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let values = axis.grid()?;
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn sweep(config: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("missing sweep block".into()))?;
    let names: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    let points = if spec.axes.is_empty() {
        Vec::new()
    } else {
        grid(&spec.axes)?
    };

    let results: Vec<(Vec<f64>, Result<Outcome>)> = points
        .into_par_iter()
        .map(|p| {
            let outcome = (|| {
                let mut c = config.clone();
                for (name, v) in names.iter().zip(&p) {
                    c = c.with_parameter(name, *v)?;
                }
                c.kind = spec.experiment;
                c.sweep = None;
                c.validate()?;
                execute(&c, false)
            })();
            (p, outcome)
        })
        .collect();

    let columns: BTreeSet<String> = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .flat_map(|o| o.scalars.keys().cloned())
        .collect();
    let mut failed = 0usize;
    let mut rows = Vec::with_capacity(results.len());
    for (p, r) in &results {
        let mut row = Map::new();
        for (name, v) in names.iter().zip(p) {
            row.insert(name.to_string(), (*v).into());
        }
        match r {
            Ok(o) => {
                let ok = o.checks.iter().all(|c| c.passed);
                if !ok {
                    failed += 1;
                }
                row.insert("status".into(), if ok { "pass" } else { "fail" }.into());
                for (k, v) in &o.scalars {
                    row.insert(k.clone(), (*v).into());
                }
                let failing: Vec<_> = o.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
                row.insert("error".into(), failing.join(";").into());
            }
            Err(e) => {
                failed += 1;
                row.insert("status".into(), "error".into());
                row.insert("error".into(), e.to_string().into());
            }
        }
        rows.push(row);
    }
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.push("status".into());
    header.extend(columns.iter().filter(|c| !names.contains(&c.as_str())).cloned());
    header.push("error".into());
    out.sweep_csv = Some(dump::table(&header, &rows));
    out.scalar("points", rows.len() as f64);
    out.scalar("failed_points", failed as f64);
    out.checks.push(Check::below("failed_points", failed as f64, 0.5));
    out.table = rows;
    Ok(())
}
