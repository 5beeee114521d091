use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Builtin;
use crate::reconstruction::ReconstructionSpec;
use crate::solver::{Schedule, SolverConfig};

/// How `Err` is computed from the final snapshot and the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `ρ(μ, ν)`.
    #[default]
    Rho,
    /// `ρ(μ, ν) + |M_μ − M_ν|`, i.e. the mass gap counted twice.
    RhoDoubledMassGap,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The model's exact solution.
    #[default]
    Exact,
    /// The finest level of the study itself.
    FinestLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSection {
    /// Atomization of the initial datum with `M̄_o` atoms.
    #[serde(default)]
    pub initial: Option<ReconstructionSpec>,
    /// Reconstruction with `M̄` atoms every `every` steps.
    #[serde(default)]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Number of refinement levels; level `ℓ` halves `Δt` and doubles every
    /// atom count `ℓ` times.
    #[serde(default = "one")]
    pub levels: usize,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub error_metric: ErrorMetric,
    /// Normalize snapshots to probability measures before export.
    #[serde(default)]
    pub normalize: bool,
    /// Also export snapshots reconstructed on this many atoms by
    /// fixed-location on the model interval.
    #[serde(default)]
    pub display_target: Option<usize>,
    /// Initial datum as a CSV file instead of the model's default.
    #[serde(default)]
    pub initial_measure: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            levels: 1,
            reference: Reference::Exact,
            error_metric: ErrorMetric::Rho,
            normalize: false,
            display_target: None,
            initial_measure: None,
            output_dir: None,
        }
    }
}

/// A complete experiment: model, solver, reconstruction and driver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Builtin,
    pub solver: SolverConfig,
    #[serde(default)]
    pub reconstruction: ReconstructionSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a JSON config; relative paths inside it are taken relative to
    /// the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::from_json(&fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            for p in [&mut config.experiment.initial_measure, &mut config.experiment.output_dir].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.experiment.levels == 0 {
            return Err(Error::Config("experiment.levels must be at least 1".into()));
        }
        if self.reconstruction.initial.is_some() && self.solver.initial_reconstruction.is_some() {
            return Err(Error::Config("initial reconstruction given in both `solver` and `reconstruction`".into()));
        }
        if self.reconstruction.schedule.is_some() && self.solver.reconstruction.is_some() {
            return Err(Error::Config("reconstruction schedule given in both `solver` and `reconstruction`".into()));
        }
        if self.experiment.display_target == Some(0) {
            return Err(Error::Config("display_target must be at least 1".into()));
        }
        let base = self.level_config(0);
        if let Some(s) = &base.reconstruction {
            s.spec.validate()?;
        }
        if let Some(s) = &base.initial_reconstruction {
            s.validate()?;
        }
        Ok(())
    }

    /// Solver settings at refinement level `level`: `Δt / 2^ℓ`, `M̄_o · 2^ℓ`,
    /// `M̄ · 2^ℓ`, and the schedule kept at the same times.
    pub fn level_config(&self, level: usize) -> SolverConfig {
        let f = 1usize << level;
        let mut c = self.solver.clone();
        c.initial_reconstruction = c.initial_reconstruction.or(self.reconstruction.initial);
        c.reconstruction = c.reconstruction.or(self.reconstruction.schedule);
        c.steps *= f;
        if let Some(s) = &mut c.initial_reconstruction {
            s.target *= f;
        }
        if let Some(s) = &mut c.reconstruction {
            s.spec.target *= f;
            s.every *= f;
        }
        c
    }

    /// The same experiment with one model parameter replaced.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        c.model = c.model.with_param(param, value)?;
        c.model.validate()?;
        Ok(c)
    }
}
