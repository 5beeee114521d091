use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::reconstruction::ReconstructionSpec;

/// One-step ODE integrator for the characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassUpdate {
    /// `m' = m (1 − Δt c) + Δt Σ β m_parent`.
    #[default]
    ExplicitEuler,
    /// Exact exponential decay of every atom, with the newborn state's mass
    /// solving its linear ODE in closed form. Needs a single-state kernel.
    BoundaryOde,
}

/// What explicit Euler does when `Δt·c > 1` would make a mass negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    #[default]
    Strict,
    /// Floor masses at zero and count the occurrences.
    Clamp,
}

/// What happens to offspring states outside the model domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringPolicy {
    #[default]
    Drop,
    Clamp,
}

/// A reconstruction applied after every `every` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub spec: ReconstructionSpec,
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub final_time: f64,
    pub steps: usize,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub mass_update: MassUpdate,
    #[serde(default)]
    pub reconstruction: Option<Schedule>,
    #[serde(default)]
    pub initial_reconstruction: Option<ReconstructionSpec>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_merge_tol")]
    pub position_merge_tol: f64,
    #[serde(default)]
    pub positivity: Positivity,
    #[serde(default)]
    pub offspring: OffspringPolicy,
    #[serde(default = "yes")]
    pub record_diagnostics: bool,
}

fn default_merge_tol() -> f64 {
    1e-12
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn new(final_time: f64, steps: usize) -> Self {
        Self {
            final_time,
            steps,
            integrator: Integrator::Rk4,
            mass_update: MassUpdate::ExplicitEuler,
            reconstruction: None,
            initial_reconstruction: None,
            snapshot_times: Vec::new(),
            position_merge_tol: default_merge_tol(),
            positivity: Positivity::Strict,
            offspring: OffspringPolicy::Drop,
            record_diagnostics: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("number of steps must be at least 1".into()));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {}", self.final_time)));
        }
        if !(self.position_merge_tol >= 0.0) {
            return Err(Error::Config("position_merge_tol must be nonnegative".into()));
        }
        if let Some(s) = &self.reconstruction {
            if s.every == 0 {
                return Err(Error::Config("reconstruction interval `every` must be at least 1 step".into()));
            }
            s.spec.validate()?;
        }
        if let Some(s) = &self.initial_reconstruction {
            s.validate()?;
        }
        if self.mass_update == MassUpdate::BoundaryOde
            && model.kernel.branch_count() > 0
            && model.kernel.boundary_state().is_none()
        {
            return Err(Error::Config(format!(
                "boundary_ode mass update needs a kernel with a single fixed offspring state; `{}` has {} branches",
                model.name,
                model.kernel.branch_count()
            )));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.final_time)) {
            return Err(Error::Config(format!("snapshot time {t} outside [0, {}]", self.final_time)));
        }
        Ok(())
    }
}
