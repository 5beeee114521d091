//! Dense tableau simplex for small linear programs.
//!
//! Solves `max c·y` subject to `A y ≤ b`, `y ≥ 0` with `b ≥ 0`, so the origin
//! is a feasible starting vertex. Bland's rule prevents cycling.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub y: Vec<f64>,
}

/// `rows[i]` lists the nonzero `(column, coefficient)` entries of row `i`.
pub fn maximize(c: &[f64], rows: &[Vec<(usize, f64)>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = rows.len();
    if b.len() != m {
        return Err(Error::Lp(format!("{m} rows but {} right-hand sides", b.len())));
    }
    if let Some(bad) = b.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::Lp(format!("right-hand side {bad} is negative; origin infeasible")));
    }
    let width = n + m + 1;
    let rhs = n + m;
    // rows 0..m are constraints, row m is the objective
    let mut t = vec![0.0; (m + 1) * width];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            if j >= n {
                return Err(Error::Lp(format!("column {j} out of range")));
            }
            t[i * width + j] += v;
        }
        t[i * width + n + i] = 1.0;
        t[i * width + rhs] = b[i];
    }
    for (j, &cj) in c.iter().enumerate() {
        t[m * width + j] = -cj;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for _ in 0..MAX_PIVOTS {
        let obj = &t[m * width..(m + 1) * width];
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -EPS) else {
            let mut y = vec![0.0; n];
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    y[var] = t[i * width + rhs];
                }
            }
            return Ok(LpSolution {
                objective: t[m * width + rhs],
                y,
            });
        };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + enter];
            if a > EPS {
                let ratio = t[i * width + rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        if ratio < best - EPS * best.abs().max(1.0) {
                            Some((i, ratio))
                        } else if ratio <= best + EPS * best.abs().max(1.0) && basis[i] < basis[l] {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Lp("problem is unbounded".into()));
        };
        pivot(&mut t, width, r, enter);
        basis[r] = enter;
    }
    Err(Error::Lp(format!("no optimum after {MAX_PIVOTS} pivots")))
}

fn pivot(t: &mut [f64], width: usize, r: usize, col: usize) {
    let rows = t.len() / width;
    let p = t[r * width + col];
    for v in &mut t[r * width..(r + 1) * width] {
        *v /= p;
    }
    let (before, rest) = t.split_at_mut(r * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |row: &mut [f64]| {
        let f = row[col];
        if f != 0.0 {
            for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            row[col] = 0.0;
        }
    };
    before.chunks_exact_mut(width).for_each(eliminate);
    after.chunks_exact_mut(width).for_each(eliminate);
    debug_assert_eq!(rows, before.len() / width + 1 + after.len() / width);
}
