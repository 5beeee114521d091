//! Wasserstein-1, the ρ metric and the bounds it gives on the flat metric.

use serde::Serialize;

use super::{Cdf, Measure, MASS_EQ_TOL};
use crate::error::{Error, Result};

/// Generalized inverse distribution function, `sup{x : F(x) ≤ s}`.
///
/// `s` outside `[0, total_mass]` is clamped.
pub fn quantile<M: Measure + ?Sized>(mu: &M, s: f64) -> Result<f64> {
    let cdf = mu.to_cdf();
    cdf.quantile(s.clamp(0.0, cdf.total()))
}

fn checked_cdfs<'a, A, B>(a: &'a A, b: &'a B, normalize: bool) -> Result<(Cdf, Cdf)>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if !(ma > 0.0) || !(mb > 0.0) {
        return Err(Error::EmptyMeasure("Wasserstein distance"));
    }
    let (fa, fb) = (a.to_cdf(), b.to_cdf());
    if normalize {
        Ok((fa.scaled(1.0 / ma), fb.scaled(1.0 / mb)))
    } else if (ma - mb).abs() > MASS_EQ_TOL {
        Err(Error::UnequalMass { left: ma, right: mb })
    } else {
        Ok((fa.into_owned(), fb.into_owned()))
    }
}

/// `W1(μ1, μ2) = ∫ |F1 − F2| dx`, integrated exactly cell by cell.
///
/// With `normalize` both measures are first scaled to probability measures;
/// otherwise their masses must agree to within [`MASS_EQ_TOL`].
pub fn w1<A, B>(a: &A, b: &B, normalize: bool) -> Result<f64>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (fa, fb) = checked_cdfs(a, b, normalize)?;
    Ok(cdf_area(&fa, &fb))
}

/// `W1` via `∫ |F1⁻¹(s) − F2⁻¹(s)| ds`. Same contract as [`w1`].
pub fn w1_by_quantiles<A, B>(a: &A, b: &B, normalize: bool) -> Result<f64>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (fa, fb) = checked_cdfs(a, b, normalize)?;
    let top = fa.total().min(fb.total());
    let mut levels: Vec<f64> = fa
        .knots()
        .iter()
        .chain(fb.knots())
        .flat_map(|k| [k.left, k.right])
        .filter(|&s| s < top)
        .chain([0.0, top])
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    // both inverses are affine strictly inside each level cell; sample two
    // interior points and extend to the cell ends
    let mut total = 0.0;
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = hi - lo;
        if h <= 0.0 {
            continue;
        }
        let p = lo + 0.25 * h;
        let q = lo + 0.75 * h;
        let dp = fa.quantile(p)? - fb.quantile(p)?;
        let dq = fa.quantile(q)? - fb.quantile(q)?;
        let half = (dq - dp) / 2.0;
        total += abs_linear_integral(dp - half, dq + half, h);
    }
    Ok(total)
}

/// `∫_0^h |d0 + (d1 − d0) t/h| dt`.
fn abs_linear_integral(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * h * (d0 + d1).abs()
    } else {
        0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// Values `(F(g−), F(g))` of `cdf` on an increasing grid.
fn on_grid(cdf: &Cdf, grid: &[f64]) -> Vec<(f64, f64)> {
    let knots = cdf.knots();
    let total = cdf.total();
    let mut i = 0;
    grid.iter()
        .map(|&g| {
            while i < knots.len() && knots[i].x < g {
                i += 1;
            }
            if i < knots.len() && knots[i].x == g {
                (knots[i].left, knots[i].right)
            } else if i == 0 {
                (0.0, 0.0)
            } else if i == knots.len() {
                (total, total)
            } else {
                let (a, b) = (&knots[i - 1], &knots[i]);
                let v = a.right + (g - a.x) / (b.x - a.x) * (b.left - a.right);
                (v, v)
            }
        })
        .collect()
}

fn cdf_area(fa: &Cdf, fb: &Cdf) -> f64 {
    let mut grid: Vec<f64> = fa.knots().iter().chain(fb.knots()).map(|k| k.x).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let va = on_grid(fa, &grid);
    let vb = on_grid(fb, &grid);
    let mut total = 0.0;
    for k in 1..grid.len() {
        let d0 = va[k - 1].1 - vb[k - 1].1;
        let d1 = va[k].0 - vb[k].0;
        total += abs_linear_integral(d0, d1, grid[k] - grid[k - 1]);
    }
    total
}

/// `ρ(μ1, μ2) = min(M1, M2)·W1(μ̃1, μ̃2) + |M1 − M2|`, with `ρ(μ, 0) = M_μ`.
pub fn rho<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let gap = (ma - mb).abs();
    if ma == 0.0 || mb == 0.0 {
        return Ok(gap);
    }
    Ok(ma.min(mb) * w1(a, b, true)? + gap)
}

/// Lower-bound constant relating ρ to the flat metric on an interval of
/// length `width`: `(1/3)·min(1, 2/width)`.
pub fn c_k(width: f64) -> f64 {
    if width.is_infinite() {
        0.0
    } else if width <= 0.0 {
        1.0 / 3.0
    } else {
        (1.0 / 3.0) * (2.0 / width).min(1.0)
    }
}

/// Interval containing the supports of both measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportInterval {
    Bounded(f64, f64),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub w1_normalized: f64,
    pub mass_gap: f64,
    pub rho: f64,
    /// `c_k · rho`, a lower bound for the flat distance.
    pub flat_lower: f64,
    /// Equal to `rho`, an upper bound for the flat distance.
    pub flat_upper: f64,
    pub c_k: f64,
    pub interval: SupportInterval,
}

pub fn metric_report<A, B>(a: &A, b: &B) -> Result<MetricReport>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let w1_normalized = w1(a, b, true)?;
    let mass_gap = (ma - mb).abs();
    let rho = ma.min(mb) * w1_normalized + mass_gap;
    let interval = if a.unbounded_support() || b.unbounded_support() {
        SupportInterval::Unbounded
    } else {
        match (a.support(), b.support()) {
            (Some((a1, a2)), Some((b1, b2))) => SupportInterval::Bounded(a1.min(b1), a2.max(b2)),
            _ => return Err(Error::EmptyMeasure("support")),
        }
    };
    let c_k = match interval {
        SupportInterval::Bounded(lo, hi) => c_k(hi - lo),
        SupportInterval::Unbounded => 0.0,
    };
    Ok(MetricReport {
        w1_normalized,
        mass_gap,
        rho,
        flat_lower: c_k * rho,
        flat_upper: rho,
        c_k,
        interval,
    })
}
