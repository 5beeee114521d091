//! Experiment drivers: convergence studies, long-time runs and parameter
//! sweeps, plus their CSV export.
//!
//! Level `ℓ` of a study runs with `Δt / 2^ℓ` and every atom count multiplied
//! by `2^ℓ`. The observed order between consecutive levels is
//! `q = log2(Err_{ℓ-1} / Err_ℓ)`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorClass, Result};
use crate::measure::io::{fmt_f64, load_measure, save_atomic};
use crate::measure::metrics::rho;
use crate::measure::{AnyMeasure, AtomicMeasure, Measure};
use crate::model::{builtin_model, BuiltinModel, ModelSpec};
use crate::reconstruction::{fixed_location, DomainPolicy};
use crate::solver::{simulate, Snapshot, SimulationTrace, SolverConfig};

mod analysis;
mod config;

pub use analysis::{mass_clusters, mass_outside, Cluster};
pub use config::{ErrorMetric, ExperimentConfig, ExperimentSection, ReconstructionSection, Reference};

/// `Err` between the trace at time `t` and `reference`.
pub fn compute_error<R: Measure + ?Sized>(trace: &SimulationTrace, reference: &R, t: f64, metric: ErrorMetric) -> Result<f64> {
    let mu = trace.at(t)?;
    let r = rho(mu, reference)?;
    Ok(match metric {
        ErrorMetric::Rho => r,
        ErrorMetric::RhoDoubledMassGap => r + (mu.total_mass() - reference.total_mass()).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub level: usize,
    pub dt: f64,
    /// `|K| / M̄_o`.
    pub dx: f64,
    pub err: f64,
    /// Blank on the first row and wherever a ratio is undefined.
    pub q: Option<f64>,
    /// Plain `ρ`, whatever the metric.
    pub rho: f64,
    pub mass: f64,
    pub atoms: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub model: String,
    pub final_time: f64,
    pub schedule: String,
    pub metric: ErrorMetric,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFailure {
    pub level: usize,
    #[serde(skip)]
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ErrorRow>,
    /// First failing level; rows stop just before it.
    pub failure: Option<LevelFailure>,
}

/// `log2(a / b)` for positive finite errors.
pub fn order(a: f64, b: f64) -> Option<f64> {
    (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then(|| (a / b).log2())
}

impl ErrorReport {
    /// Orders of an arbitrary per-row quantity, with the same blanks as `q`.
    pub fn orders_of(&self, f: impl Fn(&ErrorRow) -> f64) -> Vec<Option<f64>> {
        let first = first_order_level(&self.metadata.reference);
        let mut out = vec![None; self.rows.len()];
        for i in 1..self.rows.len() {
            let (a, b) = (&self.rows[i - 1], &self.rows[i]);
            if b.level >= first && a.level + 1 == b.level {
                out[i] = order(f(a), f(b));
            }
        }
        out
    }

    /// Writes `error_report.csv` and `error_report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("error_report.csv"))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        fs::write(dir.join("error_report.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ErrorRow>> {
        let mut r = csv::Reader::from_path(path)?;
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }
}

fn first_order_level(reference: &Reference) -> usize {
    match reference {
        Reference::Exact => 1,
        // The two coarsest levels are left out of the order estimate.
        Reference::FinestLevel => 3,
    }
}

/// Where a study's reference comes from when not built from a config.
pub enum ReferenceSource<'a> {
    Exact(&'a AnyMeasure),
    FinestLevel,
}

/// Model and initial datum resolved from a config.
pub struct Resolved {
    pub builtin: BuiltinModel,
    pub initial: AnyMeasure,
}

pub fn resolve(config: &ExperimentConfig) -> Result<Resolved> {
    config.validate()?;
    let builtin = builtin_model(config.model)?;
    let initial = match &config.experiment.initial_measure {
        Some(path) => load_measure(path)?,
        None => builtin.initial.clone(),
    };
    Ok(Resolved { builtin, initial })
}

pub fn convergence_study(config: &ExperimentConfig) -> Result<ErrorReport> {
    let r = resolve(config)?;
    match config.experiment.reference {
        Reference::Exact => {
            if config.experiment.initial_measure.is_some() {
                return Err(Error::Config("the exact reference assumes the model's own initial datum".into()));
            }
            let exact: AnyMeasure = r
                .builtin
                .exact
                .clone()
                .ok_or_else(|| Error::Config(format!("model `{}` has no exact solution; use reference finest_level", config.model.name())))?
                .into();
            convergence_study_with(config, &r.builtin.spec, &r.initial, ReferenceSource::Exact(&exact))
        }
        Reference::FinestLevel => convergence_study_with(config, &r.builtin.spec, &r.initial, ReferenceSource::FinestLevel),
    }
}

/// Study on an explicit model and initial datum. Levels run concurrently.
pub fn convergence_study_with(config: &ExperimentConfig, model: &ModelSpec, initial: &AnyMeasure, reference: ReferenceSource) -> Result<ErrorReport> {
    let levels = config.experiment.levels;
    let finest = matches!(reference, ReferenceSource::FinestLevel);
    if finest && levels < 2 {
        return Err(Error::Config("finest_level reference needs at least 2 levels".into()));
    }
    let configs: Vec<SolverConfig> = (0..levels).map(|l| config.level_config(l)).collect();
    for c in &configs {
        c.validate(model)?;
    }
    let runs: Vec<(Result<SimulationTrace>, f64)> = configs
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let trace = simulate(model, initial, c);
            (trace, start.elapsed().as_secs_f64())
        })
        .collect();

    let base = &configs[0];
    let metadata = ReportMetadata {
        model: model.name.clone(),
        final_time: base.final_time,
        schedule: describe_schedule(base),
        metric: config.experiment.error_metric,
        reference: if finest { Reference::FinestLevel } else { Reference::Exact },
    };
    let mut report = ErrorReport {
        metadata,
        rows: Vec::new(),
        failure: None,
    };
    let ok = runs.iter().take_while(|(r, _)| r.is_ok()).count();
    if let Some((Err(e), _)) = runs.get(ok) {
        report.failure = Some(LevelFailure {
            level: ok,
            class: e.class(),
            message: e.to_string(),
        });
    }
    let finest_measure;
    let reference: &dyn Measure = match reference {
        ReferenceSource::Exact(m) => m,
        ReferenceSource::FinestLevel => {
            if report.failure.is_some() {
                return Ok(report);
            }
            let Ok(t) = &runs[levels - 1].0 else { unreachable!() };
            finest_measure = t.final_measure.clone();
            &finest_measure
        }
    };
    let rows = if finest { ok.min(levels - 1) } else { ok };
    let t_end = base.final_time;
    for (level, (run, runtime)) in runs.iter().enumerate().take(rows) {
        let Ok(trace) = run else { unreachable!() };
        let c = &configs[level];
        let mu = &trace.final_measure;
        report.rows.push(ErrorRow {
            level,
            dt: c.dt(),
            dx: delta_x(initial, c)?,
            err: compute_error(trace, reference, t_end, config.experiment.error_metric)?,
            q: None,
            rho: rho(mu, reference)?,
            mass: mu.total_mass(),
            atoms: mu.len(),
            runtime_s: *runtime,
        });
    }
    let q = report.orders_of(|r| r.err);
    for (row, q) in report.rows.iter_mut().zip(q) {
        row.q = q;
    }
    Ok(report)
}

/// `|K| / M̄_o` for the initial atomization used by `config`.
fn delta_x(initial: &AnyMeasure, config: &SolverConfig) -> Result<f64> {
    let width = |d: DomainPolicy| -> Result<f64> {
        match d {
            DomainPolicy::FixedInterval(a, b) => Ok(b - a),
            DomainPolicy::SupportHull => {
                let (a, b) = initial.support().ok_or(Error::EmptyMeasure("support"))?;
                Ok(b - a)
            }
        }
    };
    match (&config.initial_reconstruction, initial) {
        (Some(s), _) => Ok(width(s.domain)? / s.target as f64),
        (None, AnyMeasure::Atomic(m)) => Ok(width(DomainPolicy::SupportHull)? / m.len().max(1) as f64),
        (None, AnyMeasure::Reference(_)) => Err(Error::Config("reference initial datum needs an initial reconstruction".into())),
    }
}

fn describe_schedule(c: &SolverConfig) -> String {
    let kind = |k| match k {
        crate::reconstruction::ReconstructionKind::FixedLocation => "fixed_location",
        crate::reconstruction::ReconstructionKind::FixedEqualMass => "fixed_equal_mass",
    };
    let mut parts = Vec::new();
    if let Some(s) = &c.initial_reconstruction {
        parts.push(format!("initial {} M={}", kind(s.kind), s.target));
    }
    match &c.reconstruction {
        Some(s) => parts.push(format!("{} M={} every {} steps ({} time units)", kind(s.spec.kind), s.spec.target, s.every, fmt_f64(s.every as f64 * c.dt()))),
        None => parts.push("no in-run reconstruction".into()),
    }
    parts.join("; ")
}

#[derive(Debug, Clone)]
pub struct LongtimeRun {
    pub trace: SimulationTrace,
    /// Snapshots scaled to unit mass, when normalization is requested.
    pub normalized: Vec<Snapshot>,
    /// Coarse fixed-location reconstructions for plotting.
    pub display: Vec<Snapshot>,
}

impl LongtimeRun {
    /// The trace's files, plus `normalized/` and `display/` subdirectories
    /// when present.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.trace.write_csv(dir)?;
        for (name, series) in [("normalized", &self.normalized), ("display", &self.display)] {
            if series.is_empty() {
                continue;
            }
            let sub = dir.join(name);
            fs::create_dir_all(&sub)?;
            for (i, s) in series.iter().enumerate() {
                save_atomic(&s.measure, sub.join(format!("snapshot_{i:04}.csv")))?;
            }
        }
        Ok(())
    }
}

pub fn longtime_run(config: &ExperimentConfig) -> Result<LongtimeRun> {
    let r = resolve(config)?;
    longtime_run_with(config, &r.builtin.spec, &r.initial, r.builtin.interval)
}

/// Level-0 run of `config`; `interval` is where display reconstructions live.
pub fn longtime_run_with(config: &ExperimentConfig, model: &ModelSpec, initial: &AnyMeasure, interval: (f64, f64)) -> Result<LongtimeRun> {
    let trace = simulate(model, initial, &config.level_config(0))?;
    let normalized = if config.experiment.normalize {
        trace
            .snapshots
            .iter()
            .map(|s| Ok(Snapshot { measure: s.measure.normalized()?, ..s.clone() }))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let display = match config.experiment.display_target {
        Some(target) => {
            let source = if config.experiment.normalize { &normalized } else { &trace.snapshots };
            source
                .iter()
                .map(|s| {
                    let measure = fixed_location(&s.measure, target, DomainPolicy::FixedInterval(interval.0, interval.1))?.measure;
                    Ok(Snapshot { measure, ..s.clone() })
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    Ok(LongtimeRun { trace, normalized, display })
}

/// Evenly spaced grid with `points` values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: std::result::Result<AtomicMeasure, PointFailure>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.outcome.is_err())
    }

    /// `sweep.csv` with `(param, x, m)` triples and `failures.csv`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        w.write_record([self.param.as_str(), "x", "m"])?;
        for p in &self.points {
            if let Ok(mu) = &p.outcome {
                for (x, m) in mu.iter() {
                    w.write_record([fmt_f64(p.value), fmt_f64(x), fmt_f64(m)])?;
                }
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("failures.csv"))?;
        w.write_record([self.param.as_str(), "error"])?;
        for p in self.failures() {
            if let Err(f) = &p.outcome {
                w.write_record([fmt_f64(p.value), f.message.clone()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Independent long-time runs, one per value of `param`. Failing points are
/// recorded and the sweep goes on.
pub fn parameter_sweep(config: &ExperimentConfig, param: &str, values: &[f64]) -> Result<SweepResult> {
    // Unknown parameters fail up front; bad values fail per point.
    config.model.with_param(param, 0.0)?;
    let points = values
        .par_iter()
        .map(|&value| {
            let outcome = config
                .with_param(param, value)
                .and_then(|c| longtime_run(&c))
                .map(|run| run.trace.final_measure)
                .map_err(|e| PointFailure {
                    class: e.class(),
                    message: e.to_string(),
                });
            SweepPoint { value, outcome }
        })
        .collect();
    Ok(SweepResult {
        param: param.to_string(),
        points,
    })
}
