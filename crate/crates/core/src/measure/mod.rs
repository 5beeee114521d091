//! Finite nonnegative measures on the real line.
//!
//! Two concrete representations are used throughout the crate:
//!
//! - [`AtomicMeasure`]: a finite weighted sum of Dirac masses. This is the
//!   state evolved by the particle scheme.
//! - [`ReferenceMeasure`]: a measure described by a piecewise-linear
//!   cumulative distribution function, i.e. atoms plus pieces of uniform
//!   density. Exact solutions and initial data are given in this form.
//!
//! Both expose their distribution function as a [`Cdf`], which is what the
//! distances in [`metrics`] operate on.

use std::borrow::Cow;

use crate::error::{Error, Result};

pub mod flat;
pub mod io;
pub mod metrics;

pub use flat::{flat_exact, flat_exact_with_cap, FLAT_EXACT_DEFAULT_CAP};
pub use metrics::{metric_report, quantile, rho, w1, w1_by_quantiles, MetricReport};

/// Absolute tolerance used when two total masses must agree.
pub const MASS_EQ_TOL: f64 = 1e-12;

/// Common view over the measure representations.
pub trait Measure {
    /// Total mass, summed left to right.
    fn total_mass(&self) -> f64;

    /// Distribution function of the measure.
    fn to_cdf(&self) -> Cow<'_, Cdf>;

    /// Smallest closed interval carrying all of the mass, if any.
    fn support(&self) -> Option<(f64, f64)>;

    /// True when the measure stands for something with unbounded support
    /// that has been truncated for representation.
    fn unbounded_support(&self) -> bool {
        false
    }
}

/// A finite nonnegative combination of Dirac masses.
///
/// Positions are kept strictly increasing; atoms sharing a position are merged
/// by summing their masses in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl AtomicMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a measure from `(position, mass)` pairs in any order.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(x, m) in &atoms {
            check_atom(x, m)?;
        }
        // stable: merged masses are summed in input order
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut positions = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match positions.last() {
                Some(&last) if last == x => *masses.last_mut().unwrap() += m,
                _ => {
                    positions.push(x);
                    masses.push(m);
                }
            }
        }
        Ok(Self { positions, masses })
    }

    pub fn from_parts(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} positions but {} masses",
                positions.len(),
                masses.len()
            )));
        }
        if positions.windows(2).all(|w| w[0] < w[1]) {
            for (&x, &m) in positions.iter().zip(&masses) {
                check_atom(x, m)?;
            }
            Ok(Self { positions, masses })
        } else {
            Self::new(positions.into_iter().zip(masses))
        }
    }

    /// A single atom. Panics on a negative or non-finite input.
    pub fn dirac(x: f64, mass: f64) -> Self {
        check_atom(x, mass).expect("invalid Dirac mass");
        Self {
            positions: vec![x],
            masses: vec![mass],
        }
    }

    /// Caller guarantees strictly increasing positions and valid masses.
    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>, masses: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len(), masses.len());
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        Self { positions, masses }
    }

    /// Direct access for the solver, which keeps the invariants itself.
    pub(crate) fn parts_mut(&mut self) -> (&mut Vec<f64>, &mut Vec<f64>) {
        (&mut self.positions, &mut self.masses)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.positions, self.masses)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().fold(0.0, |acc, &m| acc + m)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite(), "scale factor must be finite and nonnegative");
        Self {
            positions: self.positions.clone(),
            masses: self.masses.iter().map(|m| m * factor).collect(),
        }
    }

    /// The probability measure `μ / M_μ`.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::EmptyMeasure("normalization"));
        }
        Ok(self.scaled(1.0 / total))
    }

    /// `(min, max)` over atoms carrying positive mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut it = self.iter().filter(|&(_, m)| m > 0.0).map(|(x, _)| x);
        let first = it.next()?;
        let last = it.last().unwrap_or(first);
        Some((first, last))
    }

    pub fn without_zero_atoms(&self) -> Self {
        let (positions, masses) = self.iter().filter(|&(_, m)| m > 0.0).unzip();
        Self { positions, masses }
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().fold(0.0, |acc, (x, m)| acc + m * f(x))
    }
}

fn check_atom(x: f64, m: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidMeasure(format!("non-finite position {x}")));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::InvalidMeasure(format!("mass {m} at {x} is not a finite nonnegative number")));
    }
    Ok(())
}

impl Measure for AtomicMeasure {
    fn total_mass(&self) -> f64 {
        AtomicMeasure::total_mass(self)
    }

    fn to_cdf(&self) -> Cow<'_, Cdf> {
        let mut knots = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (x, m) in self.iter() {
            let left = acc;
            acc += m;
            knots.push(Knot { x, left, right: acc });
        }
        Cow::Owned(Cdf { knots })
    }

    fn support(&self) -> Option<(f64, f64)> {
        AtomicMeasure::support(self)
    }
}

/// A knot of a piecewise-linear distribution function: `left = F(x-)` and
/// `right = F(x)`. Between consecutive knots `F` is affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// Right-continuous, nondecreasing, piecewise-linear distribution function.
///
/// `F = 0` left of the first knot and `F = total` right of the last one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cdf {
    knots: Vec<Knot>,
}

impl Cdf {
    pub fn from_knots(knots: Vec<Knot>) -> Result<Self> {
        let mut prev: Option<&Knot> = None;
        for k in &knots {
            if !(k.x.is_finite() && k.left.is_finite() && k.right.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite CDF knot".into()));
            }
            let floor = match prev {
                None => {
                    if k.left != 0.0 {
                        return Err(Error::InvalidMeasure("CDF must start at 0".into()));
                    }
                    0.0
                }
                Some(p) => {
                    if !(k.x > p.x) {
                        return Err(Error::InvalidMeasure("CDF knots must be strictly increasing".into()));
                    }
                    p.right
                }
            };
            if k.left < floor || k.right < k.left {
                return Err(Error::InvalidMeasure(format!("CDF decreases at x = {}", k.x)));
            }
            prev = Some(k);
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn total(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.right)
    }

    /// `F(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        // first knot strictly right of x
        let i = self.knots.partition_point(|k| k.x <= x);
        if i == 0 {
            return 0.0;
        }
        let a = &self.knots[i - 1];
        if a.x == x || i == self.knots.len() {
            return a.right;
        }
        interpolate(a, &self.knots[i], x)
    }

    /// `F(x-)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        // first knot at or right of x
        let i = self.knots.partition_point(|k| k.x < x);
        if i == self.knots.len() {
            return self.total();
        }
        let b = &self.knots[i];
        if b.x == x || i == 0 {
            return if b.x == x { b.left } else { 0.0 };
        }
        interpolate(&self.knots[i - 1], b, x)
    }

    /// Generalized inverse `sup{x : F(x) ≤ s}`, clamped to the support.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        if self.total() <= 0.0 {
            return Err(Error::EmptyMeasure("quantile"));
        }
        let i = self.knots.partition_point(|k| k.right <= s);
        if i == self.knots.len() {
            return Ok(self.knots[i - 1].x);
        }
        let b = &self.knots[i];
        if i > 0 && b.left > s {
            let a = &self.knots[i - 1];
            let t = (s - a.right) / (b.left - a.right);
            return Ok(a.x + t * (b.x - a.x));
        }
        Ok(b.x)
    }

    /// First and last positions where `F` changes value.
    pub fn support(&self) -> Option<(f64, f64)> {
        let total = self.total();
        if total <= 0.0 {
            return None;
        }
        let lo = self.knots.iter().position(|k| k.right > 0.0)?;
        // if F grows on the segment before `lo`, that segment starts at lo - 1
        let lo = if lo > 0 && self.knots[lo].left > 0.0 { lo - 1 } else { lo };
        let hi = self.knots.iter().position(|k| k.right >= total)?;
        let hi = if self.knots[hi].left < total || hi == 0 {
            hi
        } else {
            // F already equals total when arriving at `hi`, so the mass ends on
            // an earlier knot or inside the previous segment.
            let mut j = hi;
            while j > 0 && self.knots[j].left >= total && self.knots[j - 1].right >= total {
                j -= 1;
            }
            j
        };
        Some((self.knots[lo].x, self.knots[hi].x))
    }

    pub fn scaled(&self, factor: f64) -> Cdf {
        Cdf {
            knots: self
                .knots
                .iter()
                .map(|k| Knot {
                    x: k.x,
                    left: k.left * factor,
                    right: k.right * factor,
                })
                .collect(),
        }
    }
}

fn interpolate(a: &Knot, b: &Knot, x: f64) -> f64 {
    let t = (x - a.x) / (b.x - a.x);
    a.right + t * (b.left - a.right)
}

/// Measure given by a piecewise-linear distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMeasure {
    cdf: Cdf,
    unbounded: bool,
}

impl ReferenceMeasure {
    /// Builds the measure from `(x, F)` breakpoints.
    ///
    /// `F` is zero left of the first breakpoint and interpolated linearly
    /// between breakpoints with distinct `x`. Two consecutive breakpoints with
    /// the same `x` encode a jump (an atom). A first breakpoint with `F > 0` is
    /// an atom at that position.
    pub fn from_breakpoints(points: &[(f64, f64)]) -> Result<Self> {
        let mut knots: Vec<Knot> = Vec::with_capacity(points.len());
        for &(x, f) in points {
            match knots.last_mut() {
                Some(k) if k.x == x => {
                    if f < k.right {
                        return Err(Error::InvalidMeasure(format!("CDF decreases at x = {x}")));
                    }
                    k.right = f;
                }
                _ => knots.push(Knot { x, left: if knots.is_empty() { 0.0 } else { f }, right: f }),
            }
        }
        Ok(Self {
            cdf: Cdf::from_knots(knots)?,
            unbounded: false,
        })
    }

    /// Uniform density on `[a, b]` carrying `mass`.
    pub fn uniform(a: f64, b: f64, mass: f64) -> Result<Self> {
        if !(a < b) || !(mass >= 0.0) {
            return Err(Error::InvalidMeasure(format!("uniform measure needs a < b and mass ≥ 0, got [{a}, {b}], {mass}")));
        }
        Self::from_breakpoints(&[(a, 0.0), (b, mass)])
    }

    /// Samples an absolutely continuous distribution function on `pieces`
    /// equal cells of `[a, b]` and interpolates linearly in between.
    pub fn from_cdf_fn(a: f64, b: f64, pieces: usize, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        if !(a < b) || pieces == 0 {
            return Err(Error::InvalidMeasure("from_cdf_fn needs a < b and at least one piece".into()));
        }
        let base = cdf(a);
        let mut points = Vec::with_capacity(pieces + 1);
        let mut prev = 0.0_f64;
        for i in 0..=pieces {
            let x = if i == pieces { b } else { a + (b - a) * i as f64 / pieces as f64 };
            // rounding in the caller's formula must not make F decrease
            let f = (cdf(x) - base).max(prev);
            points.push((x, f));
            prev = f;
        }
        Self::from_breakpoints(&points)
    }

    pub fn from_atomic(mu: &AtomicMeasure) -> Self {
        Self {
            cdf: mu.to_cdf().into_owned(),
            unbounded: false,
        }
    }

    /// Marks the measure as a truncation of something with unbounded support.
    pub fn with_unbounded_support(mut self) -> Self {
        self.unbounded = true;
        self
    }

    pub fn cdf(&self) -> &Cdf {
        &self.cdf
    }

    pub fn total_mass(&self) -> f64 {
        self.cdf.total()
    }

    /// Breakpoints in the format accepted by [`Self::from_breakpoints`].
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.cdf.knots.len() * 2);
        for k in &self.cdf.knots {
            out.push((k.x, k.left));
            if k.right != k.left {
                out.push((k.x, k.right));
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cdf: self.cdf.scaled(factor),
            unbounded: self.unbounded,
        }
    }
}

impl Measure for ReferenceMeasure {
    fn total_mass(&self) -> f64 {
        self.cdf.total()
    }

    fn to_cdf(&self) -> Cow<'_, Cdf> {
        Cow::Borrowed(&self.cdf)
    }

    fn support(&self) -> Option<(f64, f64)> {
        self.cdf.support()
    }

    fn unbounded_support(&self) -> bool {
        self.unbounded
    }
}

/// Either representation, for APIs that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMeasure {
    Atomic(AtomicMeasure),
    Reference(ReferenceMeasure),
}

impl Measure for AnyMeasure {
    fn total_mass(&self) -> f64 {
        match self {
            AnyMeasure::Atomic(m) => m.total_mass(),
            AnyMeasure::Reference(m) => m.total_mass(),
        }
    }

    fn to_cdf(&self) -> Cow<'_, Cdf> {
        match self {
            AnyMeasure::Atomic(m) => m.to_cdf(),
            AnyMeasure::Reference(m) => m.to_cdf(),
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            AnyMeasure::Atomic(m) => Measure::support(m),
            AnyMeasure::Reference(m) => Measure::support(m),
        }
    }

    fn unbounded_support(&self) -> bool {
        match self {
            AnyMeasure::Atomic(_) => false,
            AnyMeasure::Reference(m) => m.unbounded_support(),
        }
    }
}

impl From<AtomicMeasure> for AnyMeasure {
    fn from(m: AtomicMeasure) -> Self {
        AnyMeasure::Atomic(m)
    }
}

impl From<ReferenceMeasure> for AnyMeasure {
    fn from(m: ReferenceMeasure) -> Self {
        AnyMeasure::Reference(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_examples() {
        assert_eq!(AtomicMeasure::empty().total_mass(), 0.0);
        assert_eq!(AtomicMeasure::dirac(0.5, 1.0).total_mass(), 1.0);
        let mu = AtomicMeasure::new([(0.0, 1.0 / 3.0), (1.0, 2.0 / 3.0)]).unwrap();
        assert_eq!(mu.total_mass(), 1.0);
        assert_eq!(ReferenceMeasure::uniform(0.0, 1.0, 2.5).unwrap().total_mass(), 2.5);
    }

    #[test]
    fn construction_merges_and_sorts() {
        let mu = AtomicMeasure::new([(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(mu.positions(), &[0.0, 1.0]);
        assert_eq!(mu.masses(), &[0.5, 0.5]);
        assert!(AtomicMeasure::new([(0.0, -1.0)]).is_err());
        assert!(AtomicMeasure::new([(f64::NAN, 1.0)]).is_err());
        assert!(AtomicMeasure::from_parts(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn support_ignores_zero_mass() {
        let mu = AtomicMeasure::new([(0.1, 0.5), (0.9, 0.0)]).unwrap();
        assert_eq!(mu.support(), Some((0.1, 0.1)));
        assert_eq!(AtomicMeasure::new([(0.0, 0.0)]).unwrap().support(), None);
    }

    #[test]
    fn cdf_evaluation() {
        let r = ReferenceMeasure::from_breakpoints(&[(0.0, 0.0), (1.0, 0.5), (1.0, 1.0), (2.0, 1.5)]).unwrap();
        let f = r.cdf();
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.5), 0.25);
        assert_eq!(f.eval_left(1.0), 0.5);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(1.5), 1.25);
        assert_eq!(f.eval(3.0), 1.5);
        assert_eq!(f.eval_left(0.0), 0.0);
        assert_eq!(r.support(), Some((0.0, 2.0)));
        assert_eq!(r.breakpoints(), vec![(0.0, 0.0), (1.0, 0.5), (1.0, 1.0), (2.0, 1.5)]);
    }

    #[test]
    fn reference_support_trims_flat_ends() {
        let r = ReferenceMeasure::from_breakpoints(&[(-1.0, 0.0), (0.0, 0.0), (1.0, 1.0), (3.0, 1.0)]).unwrap();
        assert_eq!(r.support(), Some((0.0, 1.0)));
        let atom = ReferenceMeasure::from_breakpoints(&[(0.5, 2.0)]).unwrap();
        assert_eq!(atom.support(), Some((0.5, 0.5)));
    }

    #[test]
    fn decreasing_breakpoints_rejected() {
        assert!(ReferenceMeasure::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(ReferenceMeasure::from_breakpoints(&[(1.0, 0.0), (0.0, 1.0)]).is_err());
    }
}
