//! The split-step particle scheme.
//!
//! Each step `t_k → t_{k+1}`:
//!
//! 1. freeze `b` at `(t_k, μ_k)` and move every atom along its characteristic;
//! 2. freeze `c` and `η` at `(t_k, μ¹_k)`, the transported measure, add the
//!    offspring states with zero mass and update all masses;
//! 3. on scheduled steps, reconstruct.

use std::fs;
use std::path::Path;

use log::{debug, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::io::{fmt_f64, save_atomic};
use crate::measure::{AnyMeasure, AtomicMeasure};
use crate::model::{Domain, FreezePoint, ModelSpec};
use crate::reconstruction::reconstruct;

mod config;
mod step;

pub use config::{Integrator, MassUpdate, OffspringPolicy, Positivity, Schedule, SolverConfig};
pub use step::{
    mass_update_boundary_ode, mass_update_euler, spawn_offspring_states, transport_step, Offspring, UpdateStats, NO_TARGET,
};

use step::{advance, sort_and_merge};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub measure: AtomicMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// Index `k` of the step `t_k → t_{k+1}`.
    pub step: usize,
    /// `t_{k+1}`.
    pub time: f64,
    /// Atoms after transport, before births.
    pub atoms_pre: usize,
    /// Atoms after births.
    pub atoms_post: usize,
    /// Atoms at the end of the step, after any reconstruction.
    pub atoms_final: usize,
    pub mass: f64,
    pub max_dt_c: f64,
    pub dropped_offspring: usize,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub dt: f64,
    pub steps: usize,
    /// Requested snapshots in increasing time.
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
    pub final_measure: AtomicMeasure,
}

impl SimulationTrace {
    fn step_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        let on_grid = (k * self.dt - t).abs() <= 1e-9 * self.dt.max(t.abs());
        (k >= 0.0 && on_grid).then_some(k as usize)
    }

    /// The state at grid time `t`: a recorded snapshot or the final state.
    pub fn at(&self, t: f64) -> Result<&AtomicMeasure> {
        let k = self.step_of(t).ok_or(Error::MissingSnapshot(t))?;
        if k == self.steps {
            return Ok(&self.final_measure);
        }
        self.snapshots
            .iter()
            .find(|s| s.step == k)
            .map(|s| &s.measure)
            .ok_or(Error::MissingSnapshot(t))
    }

    pub fn final_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Writes `snapshot_<i>.csv` per snapshot, `final.csv` and
    /// `diagnostics.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (i, s) in self.snapshots.iter().enumerate() {
            save_atomic(&s.measure, dir.join(format!("snapshot_{i:04}.csv")))?;
        }
        save_atomic(&self.final_measure, dir.join("final.csv"))?;
        let mut w = csv::Writer::from_path(dir.join("snapshots.csv"))?;
        w.write_record(["index", "step", "time", "atoms", "mass"])?;
        for (i, s) in self.snapshots.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.step.to_string(),
                fmt_f64(s.time),
                s.measure.len().to_string(),
                fmt_f64(s.measure.total_mass()),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
        w.write_record(["step", "time", "atoms_pre", "atoms_post", "atoms_final", "mass", "max_dt_c", "dropped_offspring", "clamped"])?;
        for d in &self.diagnostics {
            w.write_record([
                d.step.to_string(),
                fmt_f64(d.time),
                d.atoms_pre.to_string(),
                d.atoms_post.to_string(),
                d.atoms_final.to_string(),
                fmt_f64(d.mass),
                fmt_f64(d.max_dt_c),
                d.dropped_offspring.to_string(),
                d.clamped.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Atomizes the initial datum. A reference measure requires an initial
/// reconstruction; an atomic one is reconstructed only if one is given.
pub fn initial_state(mu0: &AnyMeasure, config: &SolverConfig) -> Result<AtomicMeasure> {
    match (mu0, &config.initial_reconstruction) {
        (_, Some(spec)) => Ok(reconstruct(mu0, spec)?.measure),
        (AnyMeasure::Atomic(mu), None) => Ok(mu.clone()),
        (AnyMeasure::Reference(_), None) => {
            Err(Error::Config("a non-atomic initial measure needs an initial_reconstruction".into()))
        }
    }
}

/// Snapshot steps for the requested times, with warnings for off-grid ones.
fn snapshot_steps(config: &SolverConfig, warnings: &mut Vec<String>) -> Vec<(usize, f64)> {
    let dt = config.dt();
    let mut out: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| {
            let k = ((t / dt).round() as usize).min(config.steps);
            let grid = k as f64 * dt;
            if (grid - t).abs() > 1e-9 * dt.max(t.abs()) {
                let msg = format!("snapshot time {t} is off the time grid; recorded at t = {grid} (step {k})");
                warn!("{msg}");
                warnings.push(msg);
                (k, grid)
            } else {
                (k, t)
            }
        })
        .collect();
    out.sort_by_key(|&(k, _)| k);
    out.dedup_by_key(|&mut (k, _)| k);
    out
}

/// Runs the scheme from `mu0` to `config.final_time`.
pub fn simulate(model: &ModelSpec, mu0: &AnyMeasure, config: &SolverConfig) -> Result<SimulationTrace> {
    config.validate(model)?;
    let dt = config.dt();
    let mut warnings = Vec::new();
    let wanted = snapshot_steps(config, &mut warnings);
    let mut wanted = wanted.into_iter().peekable();
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::with_capacity(if config.record_diagnostics { config.steps } else { 0 });

    let mut mu = initial_state(mu0, config)?;
    let mut stepper = Stepper::new(model, config);
    let mut extinct_warned = false;
    for k in 0..config.steps {
        while let Some(&(step, time)) = wanted.peek() {
            if step != k {
                break;
            }
            snapshots.push(Snapshot { step, time, measure: mu.clone() });
            wanted.next();
        }
        let t = k as f64 * dt;
        let mut diag = stepper.step(&mut mu, k, t).map_err(|e| e.at_step(k, t))?;
        if let Some(schedule) = &config.reconstruction {
            if (k + 1) % schedule.every == 0 {
                if diag.mass > 0.0 {
                    mu = reconstruct(&mu, &schedule.spec).map_err(|e| e.at_step(k, t))?.measure;
                    diag.mass = mu.total_mass();
                } else if !extinct_warned {
                    let msg = format!("population extinct at t = {}; reconstructions skipped", t + dt);
                    warn!("{msg}");
                    warnings.push(msg);
                    extinct_warned = true;
                }
            }
        }
        if config.record_diagnostics {
            diag.atoms_final = mu.len();
            diagnostics.push(diag);
        }
    }
    if stepper.dropped > 0 {
        warnings.push(format!("{} offspring outside the domain were dropped", stepper.dropped));
    }
    if stepper.clamped > 0 {
        warnings.push(format!("{} negative masses were floored at zero", stepper.clamped));
    }
    for (step, time) in wanted {
        snapshots.push(Snapshot { step, time, measure: mu.clone() });
    }
    debug!("{}: {} steps, {} atoms at the end", model.name, config.steps, mu.len());
    Ok(SimulationTrace {
        dt,
        steps: config.steps,
        snapshots,
        diagnostics,
        warnings,
        final_measure: mu,
    })
}

struct Stepper<'m> {
    model: &'m ModelSpec,
    config: &'m SolverConfig,
    dt: f64,
    next: Vec<f64>,
    c: Vec<f64>,
    rates: Vec<f64>,
    /// Offspring state of a single-state kernel, which takes the in-place path.
    boundary: Option<f64>,
    dropped: usize,
    clamped: usize,
}

impl<'m> Stepper<'m> {
    fn new(model: &'m ModelSpec, config: &'m SolverConfig) -> Self {
        Self {
            model,
            config,
            dt: config.dt(),
            next: Vec::new(),
            c: Vec::new(),
            rates: Vec::new(),
            boundary: model.kernel.boundary_state(),
            dropped: 0,
            clamped: 0,
        }
    }

    fn step(&mut self, mu: &mut AtomicMeasure, k: usize, t: f64) -> Result<StepDiagnostics> {
        let (model, config, dt) = (self.model, self.config, self.dt);

        // Transport with b frozen at (t_k, μ_k).
        {
            let b = model.growth.freeze(t, mu)?;
            if model.domain == Domain::HalfLine && b.eval(0.0) < 0.0 {
                return Err(Error::Model(format!("growth field must satisfy b(0) ≥ 0 on the half-line, got {}", b.eval(0.0))));
            }
            self.next.resize(mu.len(), 0.0);
            advance(mu.positions(), &mut self.next, b.as_ref(), dt, config.integrator);
        }
        if !model.domain.clamp_all(&mut self.next) {
            let x = self.next.iter().find(|x| !x.is_finite()).copied().unwrap_or(f64::NAN);
            return Err(Error::NonFinite(format!("transported position {x}")));
        }
        {
            let (positions, masses) = mu.parts_mut();
            std::mem::swap(positions, &mut self.next);
            sort_and_merge(positions, masses, config.position_merge_tol);
        }
        let atoms_pre = mu.len();

        // Births and masses with c, η frozen at (t_k, μ¹_k).
        let (atoms_post, stats, dropped) = match self.boundary {
            Some(xb) => self.single_state_births(mu, t, xb)?,
            None => self.general_births(mu, t)?,
        };
        // Masses are nonnegative, so any non-finite one shows up in the sum.
        let mass = mu.total_mass();
        if !mass.is_finite() {
            let m = mu.masses().iter().find(|m| !m.is_finite()).copied().unwrap_or(mass);
            return Err(Error::NonFinite(format!("mass {m}")));
        }
        self.dropped += dropped;
        self.clamped += stats.clamped;

        Ok(StepDiagnostics {
            step: k,
            time: (k + 1) as f64 * dt,
            atoms_pre,
            atoms_post,
            atoms_final: atoms_post,
            mass,
            max_dt_c: stats.max_dt_c,
            dropped_offspring: dropped,
            clamped: stats.clamped,
        })
    }

    fn general_births(&mut self, mu: &mut AtomicMeasure, t: f64) -> Result<(usize, UpdateStats, usize)> {
        let (model, config, dt) = (self.model, self.config, self.dt);
        let off = {
            let frozen = model.freeze(t, mu, FreezePoint::LossAndKernel)?;
            let (Some(kernel), Some(loss)) = (frozen.kernel, frozen.loss) else {
                unreachable!("loss and kernel are frozen together")
            };
            let off = spawn_offspring_states(
                mu,
                kernel.as_ref(),
                model.kernel.branch_count(),
                model.domain,
                config.offspring,
                config.position_merge_tol,
            )?;
            self.c.resize(off.positions.len(), 0.0);
            loss.eval_slice(&off.positions, &mut self.c);
            off
        };
        let (masses, stats) = match config.mass_update {
            MassUpdate::ExplicitEuler => mass_update_euler(&off, &self.c, dt, config.positivity)?,
            MassUpdate::BoundaryOde => mass_update_boundary_ode(&off, &self.c, dt)?,
        };
        let atoms = off.positions.len();
        *mu = AtomicMeasure::from_sorted_unchecked(off.positions, masses);
        Ok((atoms, stats, off.dropped))
    }

    /// Same update as [`Self::general_births`] for kernels sending every
    /// newborn to one state, without building the offspring map.
    ///
    /// The state is inserted with zero mass before freezing, which leaves the
    /// frozen measure unchanged, and removed again if nobody is born.
    fn single_state_births(&mut self, mu: &mut AtomicMeasure, t: f64, xb: f64) -> Result<(usize, UpdateStats, usize)> {
        let (model, config, dt) = (self.model, self.config, self.dt);
        let xb = if model.domain.contains(xb) {
            Some(xb)
        } else if config.offspring == OffspringPolicy::Clamp {
            Some(model.domain.clamp(xb))
        } else {
            None
        };
        let mut inserted = None;
        let mut b = None;
        if let Some(xb) = xb {
            let tol = config.position_merge_tol;
            let positions = mu.positions();
            let j = positions.partition_point(|&p| p < xb - tol);
            if j == positions.len() || positions[j] > xb + tol {
                let (positions, masses) = mu.parts_mut();
                positions.insert(j, xb);
                masses.insert(j, 0.0);
                inserted = Some(j);
            }
            b = Some(j);
        }
        let n = mu.len();
        self.rates.resize(n, 0.0);
        self.c.resize(n, 0.0);
        {
            let frozen = model.freeze(t, mu, FreezePoint::LossAndKernel)?;
            let (Some(kernel), Some(loss)) = (frozen.kernel, frozen.loss) else {
                unreachable!("loss and kernel are frozen together")
            };
            kernel.rates(mu.positions(), &mut self.rates)?;
            loss.eval_slice(mu.positions(), &mut self.c);
        }
        if let Some(j) = inserted {
            // A fresh state is not a parent during this step.
            self.rates[j] = 0.0;
        }
        let births = step::birth_weight(&self.rates, mu.masses())? > 0.0;
        let dropped = match xb {
            None => self.rates.iter().zip(mu.masses()).filter(|(r, m)| **r > 0.0 && **m > 0.0).count(),
            Some(_) => 0,
        };
        if b.is_some() && !births {
            if let Some(j) = inserted {
                let (positions, masses) = mu.parts_mut();
                positions.remove(j);
                masses.remove(j);
                self.rates.remove(j);
                self.c.remove(j);
            }
            b = None;
        }
        let stats = match b {
            Some(b) => {
                let (_, masses) = mu.parts_mut();
                step::single_state_update(masses, &self.rates, &self.c, b, dt, config.mass_update, config.positivity)?
            }
            None if mu.is_empty() => UpdateStats::default(),
            None => {
                // No births this step: with zero rates any state works as `b`.
                self.rates.fill(0.0);
                let (_, masses) = mu.parts_mut();
                step::single_state_update(masses, &self.rates, &self.c, 0, dt, config.mass_update, config.positivity)?
            }
        };
        Ok((mu.len(), stats, dropped))
    }
}
