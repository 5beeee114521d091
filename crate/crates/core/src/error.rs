use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empty measure has no {0}")]
    EmptyMeasure(&'static str),

    #[error("W1 undefined for unequal masses ({left} vs {right}); pass normalize")]
    UnequalMass { left: f64, right: f64 },

    #[error("flat_exact restricted to small instances: combined support {size} exceeds cap {cap}")]
    SupportCap { size: usize, cap: usize },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("kernel support violates the discretization interval [{k1}, {k2}]: mass {outside} outside at parent {y}")]
    KernelSupport { y: f64, k1: f64, k2: f64, outside: f64 },

    #[error("explicit Euler stability bound exceeded; reduce Δt (max Δt·c = {dt_c})")]
    EulerStability { dt_c: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("atoms with positive mass lie outside the reconstruction interval [{k1}, {k2}] (support [{lo}, {hi}])")]
    OutsideInterval { lo: f64, hi: f64, k1: f64, k2: f64 },

    #[error("no snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Configuration,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidMeasure(_) => ErrorClass::Configuration,
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
            Error::Step { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn at_step(self, step: usize, time: f64) -> Error {
        Error::Step {
            step,
            time,
            source: Box::new(self),
        }
    }
}
