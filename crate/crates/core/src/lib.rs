//! Split-step particle method for nonlocal structured population models.
//!
//! The state is an [`AtomicMeasure`]: a finite sum of weighted Dirac masses.
//! Each step transports atoms along the frozen growth field, spawns offspring
//! states, updates masses, and periodically reconstructs the measure on a
//! bounded number of atoms. Errors are measured in the ρ metric, which
//! sandwiches the flat metric.

pub mod error;
pub mod harness;
pub mod lp;
pub mod measure;
pub mod model;
pub mod reconstruction;
pub mod solver;

pub use error::{Error, ErrorClass, Result};
pub use measure::{AnyMeasure, AtomicMeasure, Cdf, Measure, MetricReport, ReferenceMeasure};
pub use reconstruction::{DomainPolicy, ReconstructionKind, ReconstructionResult, ReconstructionSpec};
pub use model::{BirthKernel, Builtin, BuiltinModel, Coefficient, Domain, Field, ModelSpec};
pub use solver::{simulate, SimulationTrace, SolverConfig};
