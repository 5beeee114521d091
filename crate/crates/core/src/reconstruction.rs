//! Reducing a measure to a bounded number of atoms.
//!
//! Fixed-location reconstruction splits the interval `K` into `M̄` equal cells
//! and puts the mass of each cell at its midpoint. Fixed-equal-mass
//! reconstruction cuts the mass into `M̄` equal chunks from left to right and
//! puts each chunk at its barycenter. Both work on the distribution function,
//! so they apply to atomic and piecewise-linear measures alike.
//!
//! Output masses are chosen so that their left-to-right running sums hit the
//! input's cumulative masses exactly; the total mass is therefore preserved
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, Cdf, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionKind {
    FixedLocation,
    FixedEqualMass,
}

/// How the interval `K = [k1, k2]` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    /// Smallest interval containing the atoms with positive mass, recomputed
    /// at every call.
    SupportHull,
    /// A fixed interval; every atom with positive mass must lie inside it.
    FixedInterval(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSpec {
    pub kind: ReconstructionKind,
    /// Number of output atoms `M̄`.
    pub target: usize,
    #[serde(default = "support_hull")]
    pub domain: DomainPolicy,
}

fn support_hull() -> DomainPolicy {
    DomainPolicy::SupportHull
}

impl ReconstructionSpec {
    pub fn new(kind: ReconstructionKind, target: usize) -> Self {
        Self {
            kind,
            target,
            domain: DomainPolicy::SupportHull,
        }
    }

    pub fn on_interval(mut self, k1: f64, k2: f64) -> Self {
        self.domain = DomainPolicy::FixedInterval(k1, k2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target == 0 {
            return Err(Error::Config("reconstruction target M̄ must be at least 1".into()));
        }
        if let DomainPolicy::FixedInterval(k1, k2) = self.domain {
            if !(k1 < k2) || !k1.is_finite() || !k2.is_finite() {
                return Err(Error::Config(format!("reconstruction interval [{k1}, {k2}] must satisfy k1 < k2")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub measure: AtomicMeasure,
    /// A-priori bound on `W1(μ, result)`, scaled by the total mass.
    pub error_bound: f64,
    pub interval: (f64, f64),
}

/// `(min, max)` over atoms carrying positive mass.
pub fn support_interval(mu: &AtomicMeasure) -> Result<(f64, f64)> {
    mu.support().ok_or(Error::EmptyMeasure("support"))
}

pub fn reconstruct<M: Measure + ?Sized>(mu: &M, spec: &ReconstructionSpec) -> Result<ReconstructionResult> {
    match spec.kind {
        ReconstructionKind::FixedLocation => fixed_location(mu, spec.target, spec.domain),
        ReconstructionKind::FixedEqualMass => fixed_equal_mass(mu, spec.target, spec.domain),
    }
}

fn interval_for(cdf: &Cdf, domain: DomainPolicy) -> Result<(f64, f64)> {
    let (lo, hi) = cdf.support().ok_or(Error::EmptyMeasure("reconstruction"))?;
    match domain {
        DomainPolicy::SupportHull => Ok((lo, hi)),
        DomainPolicy::FixedInterval(k1, k2) => {
            if lo < k1 || hi > k2 {
                Err(Error::OutsideInterval { lo, hi, k1, k2 })
            } else {
                Ok((k1, k2))
            }
        }
    }
}

pub fn fixed_location<M: Measure + ?Sized>(mu: &M, target: usize, domain: DomainPolicy) -> Result<ReconstructionResult> {
    ReconstructionSpec::new(ReconstructionKind::FixedLocation, target).on_domain(domain).validate()?;
    let cdf = mu.to_cdf();
    let total = cdf.total();
    let (k1, k2) = interval_for(&cdf, domain)?;
    let width = k2 - k1;
    if width == 0.0 {
        return Ok(ReconstructionResult {
            measure: AtomicMeasure::dirac(k1, total),
            error_bound: 0.0,
            interval: (k1, k2),
        });
    }
    let dx = width / target as f64;
    let mut cells = Vec::with_capacity(target);
    for j in 1..=target {
        let cum = if j == target { total } else { cdf.eval_left(k1 + j as f64 * dx) };
        cells.push((k1 + (j as f64 - 0.5) * dx, cum));
    }
    Ok(ReconstructionResult {
        measure: from_cumulative(cells),
        error_bound: width / (2.0 * target as f64) * total,
        interval: (k1, k2),
    })
}

pub fn fixed_equal_mass<M: Measure + ?Sized>(mu: &M, target: usize, domain: DomainPolicy) -> Result<ReconstructionResult> {
    ReconstructionSpec::new(ReconstructionKind::FixedEqualMass, target).on_domain(domain).validate()?;
    let cdf = mu.to_cdf();
    let total = cdf.total();
    let (k1, k2) = interval_for(&cdf, domain)?;
    let width = k2 - k1;
    let mut pieces = Pieces::new(&cdf);
    let levels = pieces.levels();
    // chunk ends within rounding of an input level are moved onto it, so that
    // an atom ending exactly at a chunk boundary is not split by round-off
    let tol = 4.0 * f64::EPSILON * total;
    let mut chunks = Vec::with_capacity(target);
    let mut lo = 0.0;
    for j in 1..=target {
        let hi = if j == target { total } else { snap((j as f64 * total) / target as f64, &levels, tol) };
        let hi = hi.max(lo);
        if hi > lo {
            chunks.push((pieces.barycenter(lo, hi), hi));
        }
        lo = hi;
    }
    Ok(ReconstructionResult {
        measure: from_cumulative(chunks),
        error_bound: width / target as f64 * total,
        interval: (k1, k2),
    })
}

impl ReconstructionSpec {
    fn on_domain(mut self, domain: DomainPolicy) -> Self {
        self.domain = domain;
        self
    }
}

fn snap(s: f64, levels: &[f64], tol: f64) -> f64 {
    let i = levels.partition_point(|&l| l < s);
    let near = [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|k| levels.get(k).copied())
        .min_by(|a, b| (a - s).abs().total_cmp(&(b - s).abs()));
    match near {
        Some(l) if (l - s).abs() <= tol => l,
        _ => s,
    }
}

/// Builds atoms from `(position, cumulative mass after this atom)` pairs with
/// nondecreasing positions, so that the running sum of the output masses
/// reproduces every cumulative value exactly.
fn from_cumulative(cells: Vec<(f64, f64)>) -> AtomicMeasure {
    let mut collapsed: Vec<(f64, f64)> = Vec::with_capacity(cells.len());
    let mut last_cum = 0.0;
    for (x, cum) in cells {
        let cum = cum.max(last_cum);
        if cum == last_cum {
            continue;
        }
        last_cum = cum;
        match collapsed.last_mut() {
            Some(prev) if x <= prev.0 => prev.1 = cum,
            _ => collapsed.push((x, cum)),
        }
    }
    let mut positions = Vec::with_capacity(collapsed.len());
    let mut masses = Vec::with_capacity(collapsed.len());
    let mut partial = Vec::with_capacity(collapsed.len());
    let mut acc = 0.0;
    for &(x, cum) in &collapsed {
        let d = increment(acc, cum).unwrap_or((cum - acc).max(0.0));
        partial.push(acc);
        acc += d;
        positions.push(x);
        masses.push(d);
    }
    if let Some(&(_, total)) = collapsed.last() {
        if acc != total {
            land_on_total(&mut masses, &partial, total);
        }
    }
    AtomicMeasure::from_sorted_unchecked(positions, masses)
}

/// Some sums cannot be reached from a given partial sum because both
/// neighbouring candidates round away from it. Moves the partial sum before
/// the last atom onto a multiple of `ulp(total)`, from where the last
/// difference is exact.
fn land_on_total(masses: &mut [f64], partial: &[f64], total: f64) {
    let n = masses.len();
    if n < 2 {
        return;
    }
    let u = total.next_up() - total;
    let mid = ((partial[n - 1] / u).round() * u).min(total);
    if let Some(m) = increment(partial[n - 2], mid) {
        let d = total - mid;
        if partial[n - 2] + m + d == total {
            masses[n - 2] = m;
            masses[n - 1] = d;
            return;
        }
    }
    debug_assert!(false, "cannot land on total {total}");
}

/// A nonnegative `d` with `acc + d == target` in floating point, if one
/// exists near `target - acc`.
pub(crate) fn increment(acc: f64, target: f64) -> Option<f64> {
    let mut d = (target - acc).max(0.0);
    for _ in 0..64 {
        let s = acc + d;
        if s == target {
            return Some(d);
        }
        d = if s < target { d.next_up() } else { d.next_down().max(0.0) };
    }
    None
}

/// The quantile function of a piecewise-linear CDF as a sequence of pieces on
/// which it is affine in the mass variable `s`.
struct Pieces {
    /// `(s0, s1, x0, x1)`: on `[s0, s1]` the quantile runs linearly from `x0` to `x1`.
    pieces: Vec<(f64, f64, f64, f64)>,
    cursor: usize,
}

impl Pieces {
    fn new(cdf: &Cdf) -> Self {
        let mut pieces = Vec::with_capacity(2 * cdf.knots().len());
        let mut prev: Option<(f64, f64)> = None;
        for k in cdf.knots() {
            if let Some((px, ps)) = prev {
                if k.left > ps {
                    pieces.push((ps, k.left, px, k.x));
                }
            }
            if k.right > k.left {
                pieces.push((k.left, k.right, k.x, k.x));
            }
            prev = Some((k.x, k.right));
        }
        Self { pieces, cursor: 0 }
    }

    /// Cumulative levels at which pieces end, increasing.
    fn levels(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.1).collect()
    }

    /// Mean position of the mass between cumulative levels `lo < hi`.
    /// Calls must come with nondecreasing `lo`.
    fn barycenter(&mut self, lo: f64, hi: f64) -> f64 {
        while self.cursor < self.pieces.len() && self.pieces[self.cursor].1 <= lo {
            self.cursor += 1;
        }
        let mut weight = 0.0;
        let mut moment = 0.0;
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        for &(s0, s1, x0, x1) in &self.pieces[self.cursor..] {
            if s0 >= hi {
                break;
            }
            let u = s0.max(lo);
            let v = s1.min(hi);
            if v <= u {
                continue;
            }
            let at = |s: f64| x0 + (s - s0) / (s1 - s0) * (x1 - x0);
            let (xu, xv) = if x0 == x1 { (x0, x0) } else { (at(u), at(v)) };
            weight += v - u;
            moment += (v - u) * 0.5 * (xu + xv);
            xmin = xmin.min(xu);
            xmax = xmax.max(xv);
        }
        if xmin >= xmax {
            return xmin;
        }
        (moment / weight).clamp(xmin, xmax)
    }
}
