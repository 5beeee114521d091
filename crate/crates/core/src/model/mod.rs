//! Model coefficients and their freezing at grid times.
//!
//! A model is the triple `(b, c, η)`: growth speed `b`, net loss rate `c` and
//! birth kernel `η`. Each coefficient may depend on time and on the current
//! measure; [`Coefficient::freeze`] binds both and returns a plain function
//! of position.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::AtomicMeasure;

pub mod builtins;
mod kernel;

pub use builtins::{builtin_model, Builtin, BuiltinModel};
pub use kernel::{discretize_kernel, BirthKernel, Branch, BranchKernel, DiscretizedKernel, FrozenKernel, NoBirths};

/// A real function of position.
pub trait Field {
    fn eval(&self, x: f64) -> f64;

    /// `out[i] = f(xs[i])`.
    fn eval_slice(&self, xs: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.eval(x);
        }
    }

    /// One explicit Euler step of `x' = f(x)` from each `xs[i]` into `out[i]`.
    fn euler_step(&self, xs: &[f64], out: &mut [f64], dt: f64) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = x + dt * self.eval(x);
        }
    }

    /// One classical Runge-Kutta step of `x' = f(x)` from each `xs[i]` into
    /// `out[i]`.
    fn rk4_step(&self, xs: &[f64], out: &mut [f64], dt: f64) {
        let (half, sixth) = (0.5 * dt, dt / 6.0);
        for (o, &x) in out.iter_mut().zip(xs) {
            let k1 = self.eval(x);
            let k2 = self.eval(x + half * k1);
            let k3 = self.eval(x + half * k2);
            let k4 = self.eval(x + dt * k3);
            *o = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
}

impl<F: Fn(f64) -> f64> Field for F {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

pub type FrozenField<'a> = Box<dyn Field + 'a>;

/// A coefficient `(t, μ) ↦ (x ↦ value)`.
pub trait Coefficient: Send + Sync {
    fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure) -> Result<FrozenField<'a>>;
}

/// Coefficient depending on position only.
pub struct Local<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> Coefficient for Local<F> {
    fn freeze<'a>(&'a self, _t: f64, _mu: &'a AtomicMeasure) -> Result<FrozenField<'a>> {
        Ok(Box::new(&self.0))
    }
}

/// Coefficient built by a closure from the time and the measure.
pub struct Nonlocal<F>(pub F);

impl<F> Coefficient for Nonlocal<F>
where
    F: Fn(f64, &AtomicMeasure) -> Result<Box<dyn Field>> + Send + Sync,
{
    fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure) -> Result<FrozenField<'a>> {
        (self.0)(t, mu)
    }
}

/// Where the structural variable lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[0, ∞)`; the growth field must satisfy `b(0) ≥ 0`.
    HalfLine,
    Interval(f64, f64),
    WholeLine,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Domain::HalfLine => x >= 0.0,
            Domain::Interval(lo, hi) => (lo..=hi).contains(&x),
            Domain::WholeLine => x.is_finite(),
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        match *self {
            Domain::HalfLine => x.max(0.0),
            Domain::Interval(lo, hi) => x.clamp(lo, hi),
            Domain::WholeLine => x,
        }
    }

    /// Clamps every entry into the domain; false if any entry is not finite.
    pub(crate) fn clamp_all(&self, xs: &mut [f64]) -> bool {
        let mut finite = true;
        for x in xs.iter() {
            finite &= x.is_finite();
        }
        match *self {
            Domain::HalfLine => xs.iter_mut().for_each(|x| *x = x.max(0.0)),
            Domain::Interval(lo, hi) => xs.iter_mut().for_each(|x| *x = x.clamp(lo, hi)),
            Domain::WholeLine => {}
        }
        finite
    }
}

/// Which coefficients to freeze at a given point of the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezePoint {
    /// `b`, frozen against the measure before transport.
    Growth,
    /// `c` and `η`, frozen against the transported measure.
    LossAndKernel,
}

pub struct FrozenCoefficients<'a> {
    pub growth: Option<FrozenField<'a>>,
    pub loss: Option<FrozenField<'a>>,
    pub kernel: Option<Box<dyn FrozenKernel + 'a>>,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub growth: Arc<dyn Coefficient>,
    pub loss: Arc<dyn Coefficient>,
    pub kernel: Arc<dyn BirthKernel>,
    pub domain: Domain,
    /// Hölder exponent of the coefficients in time; the expected order of
    /// convergence.
    pub holder_alpha: f64,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        growth: impl Coefficient + 'static,
        loss: impl Coefficient + 'static,
        kernel: impl BirthKernel + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            growth: Arc::new(growth),
            loss: Arc::new(loss),
            kernel: Arc::new(kernel),
            domain: Domain::WholeLine,
            holder_alpha: 1.0,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    /// Binds `(t, μ_ref)` into the coefficients selected by `which`.
    pub fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure, which: FreezePoint) -> Result<FrozenCoefficients<'a>> {
        Ok(match which {
            FreezePoint::Growth => FrozenCoefficients {
                growth: Some(self.growth.freeze(t, mu)?),
                loss: None,
                kernel: None,
            },
            FreezePoint::LossAndKernel => FrozenCoefficients {
                growth: None,
                loss: Some(self.loss.freeze(t, mu)?),
                kernel: Some(self.kernel.freeze(t, mu)?),
            },
        })
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("branches", &self.kernel.branch_count())
            .field("domain", &self.domain)
            .field("holder_alpha", &self.holder_alpha)
            .finish_non_exhaustive()
    }
}
