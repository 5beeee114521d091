//! Exact flat (bounded-Lipschitz) distance between small atomic measures.
//!
//! On the line the supremum over test functions with `|φ| ≤ 1` and Lipschitz
//! constant 1 only depends on the values `φ_i` at the merged support points,
//! and the Lipschitz condition reduces to adjacent pairs. With `ψ = φ + 1`
//! the problem becomes
//!
//! ```text
//! max Σ d_i ψ_i − Σ d_i   s.t.  ψ_i ≤ 2,  ±(ψ_{i+1} − ψ_i) ≤ x_{i+1} − x_i,  ψ ≥ 0
//! ```
//!
//! which the dense simplex in [`crate::lp`] solves from the origin.

use super::AtomicMeasure;
use crate::error::{Error, Result};
use crate::lp;

pub const FLAT_EXACT_DEFAULT_CAP: usize = 200;

pub fn flat_exact(a: &AtomicMeasure, b: &AtomicMeasure) -> Result<f64> {
    flat_exact_with_cap(a, b, FLAT_EXACT_DEFAULT_CAP)
}

pub fn flat_exact_with_cap(a: &AtomicMeasure, b: &AtomicMeasure, cap: usize) -> Result<f64> {
    let (xs, ds) = signed_difference(a, b);
    if xs.len() > cap {
        return Err(Error::SupportCap { size: xs.len(), cap });
    }
    let (xs, ds): (Vec<f64>, Vec<f64>) = xs.into_iter().zip(ds).filter(|&(_, d)| d != 0.0).unzip();
    match xs.len() {
        0 => return Ok(0.0),
        1 => return Ok(ds[0].abs()),
        _ => {}
    }

    let n = xs.len();
    let mut rows = Vec::with_capacity(3 * n - 2);
    let mut rhs = Vec::with_capacity(3 * n - 2);
    for i in 0..n {
        rows.push(vec![(i, 1.0)]);
        rhs.push(2.0);
    }
    for i in 0..n - 1 {
        let gap = xs[i + 1] - xs[i];
        rows.push(vec![(i + 1, 1.0), (i, -1.0)]);
        rhs.push(gap);
        rows.push(vec![(i, 1.0), (i + 1, -1.0)]);
        rhs.push(gap);
    }
    let sol = lp::maximize(&ds, &rows, &rhs)?;
    let shift: f64 = ds.iter().sum();
    Ok((sol.objective - shift).max(0.0))
}

/// Merged support of `a` and `b` with the mass difference `a − b` at each point.
fn signed_difference(a: &AtomicMeasure, b: &AtomicMeasure) -> (Vec<f64>, Vec<f64>) {
    let (pa, ma) = (a.positions(), a.masses());
    let (pb, mb) = (b.positions(), b.masses());
    let mut xs = Vec::with_capacity(pa.len() + pb.len());
    let mut ds = Vec::with_capacity(pa.len() + pb.len());
    let (mut i, mut j) = (0, 0);
    while i < pa.len() || j < pb.len() {
        if j == pb.len() || (i < pa.len() && pa[i] < pb[j]) {
            xs.push(pa[i]);
            ds.push(ma[i]);
            i += 1;
        } else if i == pa.len() || pb[j] < pa[i] {
            xs.push(pb[j]);
            ds.push(-mb[j]);
            j += 1;
        } else {
            xs.push(pa[i]);
            ds.push(ma[i] - mb[j]);
            i += 1;
            j += 1;
        }
    }
    (xs, ds)
}
