//! The four reference models.
//!
//! - `mckendrick`: linear age-structured model with births at `x = 0`, whose
//!   stationary solution is the uniform density on `[0, 1]`.
//! - `selection_growth`: pure selection on the whole line with logistic
//!   competition, `c(μ)(x) = x² − A + ∫ dμ(y) / (1 + (x − y)²)`.
//! - `equal_fission`: size-structured cells dividing into two equal halves.
//! - `selection_mutation`: trait-structured selection with a compactly
//!   supported mutation kernel approximated by `r = 10` atoms.

use log::debug;
use serde::{Deserialize, Serialize};

use super::kernel::{BirthKernel, BranchKernel, FrozenKernel};
use super::{Coefficient, Domain, FrozenField, Local, ModelSpec};
use crate::error::{Error, Result};
use crate::measure::{AnyMeasure, AtomicMeasure, ReferenceMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    Mckendrick,
    SelectionGrowth {
        #[serde(rename = "A", alias = "a")]
        a: f64,
    },
    EqualFission,
    SelectionMutation {
        epsilon: f64,
    },
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Mckendrick => "mckendrick",
            Builtin::SelectionGrowth { .. } => "selection_growth",
            Builtin::EqualFission => "equal_fission",
            Builtin::SelectionMutation { .. } => "selection_mutation",
        }
    }

    /// Replaces the named scalar parameter (`A` or `epsilon`).
    pub fn with_param(self, param: &str, value: f64) -> Result<Self> {
        match (self, param) {
            (Builtin::SelectionGrowth { .. }, "A" | "a") => Ok(Builtin::SelectionGrowth { a: value }),
            (Builtin::SelectionMutation { .. }, "epsilon" | "eps") => Ok(Builtin::SelectionMutation { epsilon: value }),
            _ => Err(Error::Config(format!("model `{}` has no parameter `{param}`", self.name()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Builtin::SelectionGrowth { a } if !(0.0..=3.0).contains(&a) => {
                Err(Error::Config(format!("selection_growth needs A in [0, 3], got {a}")))
            }
            Builtin::SelectionMutation { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                Err(Error::Config(format!("selection_mutation needs epsilon in (0, 1), got {epsilon}")))
            }
            _ => Ok(()),
        }
    }
}

pub struct BuiltinModel {
    pub spec: ModelSpec,
    /// Default initial datum, to be atomized by an initial reconstruction.
    pub initial: AnyMeasure,
    /// Exact solution at any time, when known.
    pub exact: Option<ReferenceMeasure>,
    /// Invariant interval suitable for fixed-interval reconstructions.
    pub interval: (f64, f64),
}

pub fn builtin_model(which: Builtin) -> Result<BuiltinModel> {
    which.validate()?;
    Ok(match which {
        Builtin::Mckendrick => {
            let spec = ModelSpec::new(
                "mckendrick",
                Local(|x: f64| 0.2 * (1.0 - x)),
                Local(|_| 0.2),
                BranchKernel::boundary(0.0, Local(mckendrick_birth)),
            )
            .with_domain(Domain::HalfLine);
            let uniform = ReferenceMeasure::uniform(0.0, 1.0, 1.0)?;
            BuiltinModel {
                spec,
                initial: uniform.clone().into(),
                exact: Some(uniform),
                interval: (0.0, 1.0),
            }
        }
        Builtin::SelectionGrowth { a } => {
            let spec = ModelSpec::new("selection_growth", Local(|_| 0.0), SelectionLoss { a }, super::NoBirths);
            BuiltinModel {
                spec,
                initial: ReferenceMeasure::uniform(-2.0, 2.0, 1.0)?.into(),
                exact: None,
                interval: (-2.0, 2.0),
            }
        }
        Builtin::EqualFission => {
            let spec = ModelSpec::new(
                "equal_fission",
                Local(|x: f64| 0.1 * (1.0 - x)),
                Local(fission_rate),
                BranchKernel::new(vec![super::Branch::new(|y| y / 2.0, Local(|y| 2.0 * fission_rate(y)))]),
            )
            .with_domain(Domain::Interval(0.0, 1.0));
            BuiltinModel {
                spec,
                initial: fission_initial()?.into(),
                exact: None,
                interval: (0.0, 1.0),
            }
        }
        Builtin::SelectionMutation { epsilon } => {
            let spec = ModelSpec::new(
                "selection_mutation",
                Local(|_| 0.0),
                MutationLoss { epsilon },
                MutationKernel::new(epsilon, MUTATION_RANGE, MUTATION_BRANCHES),
            )
            .with_domain(Domain::Interval(0.0, 1.0));
            BuiltinModel {
                spec,
                initial: ReferenceMeasure::uniform(0.0, 1.0, 1.0)?.into(),
                exact: None,
                interval: (0.0, 1.0),
            }
        }
    })
}

pub fn mckendrick_birth(y: f64) -> f64 {
    2.4 * (y * y - y * y * y)
}

struct SelectionLoss {
    a: f64,
}

impl Coefficient for SelectionLoss {
    fn freeze<'a>(&'a self, _t: f64, mu: &'a AtomicMeasure) -> Result<FrozenField<'a>> {
        let a = self.a;
        Ok(Box::new(move |x: f64| {
            let competition = mu
                .iter()
                .fold(0.0, |acc, (y, m)| acc + m / (1.0 + (x - y) * (x - y)));
            x * x - a + competition
        }))
    }
}

/// Minimal dividing size.
pub const FISSION_MIN_SIZE: f64 = 0.25;
const FISSION_KNOT: f64 = 0.625;

/// Division-size density on `[1/4, 1]`; a C¹ spline of total mass 1.
pub fn fission_density(y: f64) -> f64 {
    if !(FISSION_MIN_SIZE..=1.0).contains(&y) {
        0.0
    } else if y <= FISSION_KNOT {
        let u = -2.0 / 3.0 + 8.0 / 3.0 * y;
        160.0 / 117.0 * u * u * u
    } else {
        let d = y - FISSION_KNOT;
        32.0 / 117.0 * (-20.0 + 40.0 * y + 320.0 / 3.0 * d * d + 5120.0 / 9.0 * d * d * d * (8.0 / 3.0 * y - 11.0 / 3.0))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `∫_y^1 φ`, the fraction of cells that have not divided by size `y`.
pub fn fission_survival(y: f64) -> f64 {
    if y <= FISSION_MIN_SIZE {
        1.0
    } else if y >= 1.0 {
        0.0
    } else if y <= FISSION_KNOT {
        horner(&[3079.0 / 3159.0, 1280.0 / 3159.0, -2560.0 / 1053.0, 20480.0 / 3159.0, -20480.0 / 3159.0], y)
    } else {
        // expanded in w = 1 − y to avoid cancellation near y = 1
        let w = 1.0 - y;
        w * horner(&[160.0 / 117.0, 640.0 / 117.0, 10240.0 / 1053.0, -81920.0 / 1053.0, 262144.0 / 3159.0], w)
    }
}

/// Division rate `β(y) = b(y) φ(y) / ∫_y^1 φ`.
pub fn fission_rate(y: f64) -> f64 {
    if !(FISSION_MIN_SIZE..=1.0).contains(&y) {
        return 0.0;
    }
    if y > FISSION_KNOT {
        let w = 1.0 - y;
        let tail_over_w = horner(&[160.0 / 117.0, 640.0 / 117.0, 10240.0 / 1053.0, -81920.0 / 1053.0, 262144.0 / 3159.0], w);
        if w * tail_over_w < 1e-12 {
            debug!("fission rate at y = {y}: survival below 1e-12, using the left limit");
            return FISSION_RATE_AT_MAX;
        }
        return 0.1 * fission_density(y) / tail_over_w;
    }
    0.1 * (1.0 - y) * fission_density(y) / fission_survival(y)
}

/// `lim_{y→1} β(y)`.
pub const FISSION_RATE_AT_MAX: f64 = 0.1;

/// Initial density `(1 − x)(x − 1/8)³` on `[1/8, 1]`, unnormalized.
fn fission_initial() -> Result<ReferenceMeasure> {
    let lo = FISSION_MIN_SIZE / 2.0;
    let cdf = move |x: f64| {
        let u = x - lo;
        let u4 = u * u * u * u;
        (1.0 - lo) * u4 / 4.0 - u4 * u / 5.0
    };
    ReferenceMeasure::from_cdf_fn(lo, 1.0, 4096, cdf)
}

/// Maximal distance between parent and offspring.
pub const MUTATION_RANGE: f64 = 0.4;
pub const MUTATION_BRANCHES: usize = 10;

pub fn trait_birth(x: f64) -> f64 {
    x * (1.0 - x)
}

struct MutationLoss {
    epsilon: f64,
}

impl Coefficient for MutationLoss {
    fn freeze<'a>(&'a self, _t: f64, mu: &'a AtomicMeasure) -> Result<FrozenField<'a>> {
        let death = 1.0 - (-mu.total_mass()).exp();
        let keep = 1.0 - self.epsilon;
        Ok(Box::new(move |x: f64| -keep * trait_birth(x) + death))
    }
}

/// `η(y) = ε B(y) Σ_p β_p(y) δ_{x̄_p(y)}` with `x̄_p(y) = y − a + (a/r)(2p − 1)`
/// and bump weights normalized over the branches landing in `[0, 1]`.
pub struct MutationKernel {
    epsilon: f64,
    a: f64,
    r: usize,
}

impl MutationKernel {
    pub fn new(epsilon: f64, a: f64, r: usize) -> Self {
        Self { epsilon, a, r }
    }

    pub fn offspring_state(&self, y: f64, p: usize) -> f64 {
        y - self.a + self.a / self.r as f64 * (2 * p + 1) as f64
    }

    /// Normalized mutation probabilities `β_p(y)`, `p = 0..r`; branches
    /// leaving `[0, 1]` get zero.
    pub fn probabilities(&self, y: f64) -> Vec<f64> {
        let a2 = self.a * self.a;
        let weights: Vec<f64> = (0..self.r)
            .map(|p| {
                let x = self.offspring_state(y, p);
                let d = x - y;
                if (0.0..=1.0).contains(&x) && d * d < a2 {
                    (-a2 / (a2 - d * d)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.into_iter().map(|w| w / total).collect()
        } else {
            weights
        }
    }
}

impl BirthKernel for MutationKernel {
    fn branch_count(&self) -> usize {
        self.r
    }

    fn freeze<'a>(&'a self, _t: f64, _mu: &'a AtomicMeasure) -> Result<Box<dyn FrozenKernel + 'a>> {
        Ok(Box::new(FrozenMutation(self)))
    }
}

struct FrozenMutation<'a>(&'a MutationKernel);

impl FrozenKernel for FrozenMutation<'_> {
    fn offspring(&self, ys: &[f64], positions: &mut [f64], rates: &mut [f64]) -> Result<()> {
        let k = self.0;
        let n = ys.len();
        for (i, &y) in ys.iter().enumerate() {
            let scale = k.epsilon * trait_birth(y);
            for (p, beta) in k.probabilities(y).into_iter().enumerate() {
                positions[p * n + i] = k.offspring_state(y, p);
                rates[p * n + i] = scale * beta;
            }
        }
        Ok(())
    }
}
