use super::{Coefficient, Field, FrozenField};
use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, ReferenceMeasure};

/// A birth kernel frozen at `(t_k, μ¹_k)`.
pub trait FrozenKernel {
    /// For parents `ys` and each branch `p`, writes the offspring state to
    /// `positions[p * ys.len() + i]` and the birth rate to
    /// `rates[p * ys.len() + i]`. Both slices have length
    /// `branch_count · ys.len()`.
    fn offspring(&self, ys: &[f64], positions: &mut [f64], rates: &mut [f64]) -> Result<()>;

    /// The rates alone, for callers that know where offspring land.
    fn rates(&self, ys: &[f64], rates: &mut [f64]) -> Result<()> {
        let mut positions = vec![0.0; rates.len()];
        self.offspring(ys, &mut positions, rates)
    }
}

/// `η(t, μ)(y) = Σ_p β_p(t, μ)(y) δ_{x̄_p(y)}`.
pub trait BirthKernel: Send + Sync {
    fn branch_count(&self) -> usize;

    /// The state every newborn is placed at, when there is exactly one
    /// branch and its offspring map is constant.
    fn boundary_state(&self) -> Option<f64> {
        None
    }

    fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure) -> Result<Box<dyn FrozenKernel + 'a>>;
}

/// The kernel with no branches.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoBirths;

impl BirthKernel for NoBirths {
    fn branch_count(&self) -> usize {
        0
    }

    fn freeze<'a>(&'a self, _t: f64, _mu: &'a AtomicMeasure) -> Result<Box<dyn FrozenKernel + 'a>> {
        Ok(Box::new(NoBirths))
    }
}

impl FrozenKernel for NoBirths {
    fn offspring(&self, _ys: &[f64], _positions: &mut [f64], _rates: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// One offspring map `x̄_p` with its rate `β_p`.
pub struct Branch {
    map: Box<dyn Field + Send + Sync>,
    fixed: Option<f64>,
    rate: Box<dyn Coefficient>,
}

impl Branch {
    pub fn new(map: impl Fn(f64) -> f64 + Send + Sync + 'static, rate: impl Coefficient + 'static) -> Self {
        Self {
            map: Box::new(map),
            fixed: None,
            rate: Box::new(rate),
        }
    }

    /// A branch whose offspring all land at `x`.
    pub fn fixed(x: f64, rate: impl Coefficient + 'static) -> Self {
        Self {
            map: Box::new(move |_| x),
            fixed: Some(x),
            rate: Box::new(rate),
        }
    }
}

/// Kernel given as an explicit list of branches.
pub struct BranchKernel {
    branches: Vec<Branch>,
}

impl BranchKernel {
    pub fn new(branches: Vec<Branch>) -> Self {
        Self { branches }
    }

    /// Single branch placing every newborn at `x_b`.
    pub fn boundary(x_b: f64, rate: impl Coefficient + 'static) -> Self {
        Self::new(vec![Branch::fixed(x_b, rate)])
    }
}

impl BirthKernel for BranchKernel {
    fn branch_count(&self) -> usize {
        self.branches.len()
    }

    fn boundary_state(&self) -> Option<f64> {
        match self.branches.as_slice() {
            [only] => only.fixed,
            _ => None,
        }
    }

    fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure) -> Result<Box<dyn FrozenKernel + 'a>> {
        let rates = self
            .branches
            .iter()
            .map(|b| b.rate.freeze(t, mu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(FrozenBranches { kernel: self, rates }))
    }
}

struct FrozenBranches<'a> {
    kernel: &'a BranchKernel,
    rates: Vec<FrozenField<'a>>,
}

impl FrozenKernel for FrozenBranches<'_> {
    fn offspring(&self, ys: &[f64], positions: &mut [f64], rates: &mut [f64]) -> Result<()> {
        let n = ys.len();
        for (p, (branch, rate)) in self.kernel.branches.iter().zip(&self.rates).enumerate() {
            let span = p * n..(p + 1) * n;
            match branch.fixed {
                Some(x) => positions[span.clone()].fill(x),
                None => branch.map.eval_slice(ys, &mut positions[span.clone()]),
            }
            rate.eval_slice(ys, &mut rates[span]);
        }
        Ok(())
    }

    fn rates(&self, ys: &[f64], rates: &mut [f64]) -> Result<()> {
        let n = ys.len();
        for (p, rate) in self.rates.iter().enumerate() {
            rate.eval_slice(ys, &mut rates[p * n..(p + 1) * n]);
        }
        Ok(())
    }
}

/// Atomic approximation of a kernel given as a measure in `x` for each
/// parent: `K` is cut into `r` equal cells and branch `p` places the cell's
/// mass at its center.
pub struct DiscretizedKernel<F> {
    kernel: F,
    k1: f64,
    k2: f64,
    centers: Vec<f64>,
}

/// Builds a [`DiscretizedKernel`] from `kernel(t, μ, y)` on `K = [k1, k2]`.
pub fn discretize_kernel<F>(kernel: F, k: (f64, f64), r: usize) -> Result<DiscretizedKernel<F>>
where
    F: Fn(f64, &AtomicMeasure, f64) -> Result<ReferenceMeasure> + Send + Sync,
{
    let (k1, k2) = k;
    if r == 0 || !(k1 < k2) {
        return Err(Error::Config(format!("kernel discretization needs r ≥ 1 and k1 < k2, got r = {r}, K = [{k1}, {k2}]")));
    }
    let dx = (k2 - k1) / r as f64;
    let centers = (0..r).map(|p| k1 + (p as f64 + 0.5) * dx).collect();
    Ok(DiscretizedKernel { kernel, k1, k2, centers })
}

impl<F> DiscretizedKernel<F>
where
    F: Fn(f64, &AtomicMeasure, f64) -> Result<ReferenceMeasure> + Send + Sync,
{
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Masses of the kernel slice at `y` on each cell of `K`, checking that it
    /// carries no mass outside `K`.
    pub fn cell_masses(&self, t: f64, mu: &AtomicMeasure, y: f64) -> Result<Vec<f64>> {
        let slice = (self.kernel)(t, mu, y)?;
        let cdf = slice.cdf();
        let r = self.centers.len();
        let dx = (self.k2 - self.k1) / r as f64;
        let inside = cdf.eval(self.k2) - cdf.eval_left(self.k1);
        let outside = slice.total_mass() - inside;
        if outside > 1e-12 * slice.total_mass().max(1.0) {
            return Err(Error::KernelSupport {
                y,
                k1: self.k1,
                k2: self.k2,
                outside,
            });
        }
        let mut prev = cdf.eval_left(self.k1);
        Ok((1..=r)
            .map(|p| {
                let cum = if p == r { cdf.eval(self.k2) } else { cdf.eval_left(self.k1 + p as f64 * dx) };
                let m = (cum - prev).max(0.0);
                prev = cum;
                m
            })
            .collect())
    }
}

impl<F> BirthKernel for DiscretizedKernel<F>
where
    F: Fn(f64, &AtomicMeasure, f64) -> Result<ReferenceMeasure> + Send + Sync,
{
    fn branch_count(&self) -> usize {
        self.centers.len()
    }

    fn boundary_state(&self) -> Option<f64> {
        match self.centers.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    fn freeze<'a>(&'a self, t: f64, mu: &'a AtomicMeasure) -> Result<Box<dyn FrozenKernel + 'a>> {
        Ok(Box::new(FrozenDiscretized { kernel: self, t, mu }))
    }
}

struct FrozenDiscretized<'a, F> {
    kernel: &'a DiscretizedKernel<F>,
    t: f64,
    mu: &'a AtomicMeasure,
}

impl<F> FrozenKernel for FrozenDiscretized<'_, F>
where
    F: Fn(f64, &AtomicMeasure, f64) -> Result<ReferenceMeasure> + Send + Sync,
{
    fn offspring(&self, ys: &[f64], positions: &mut [f64], rates: &mut [f64]) -> Result<()> {
        let n = ys.len();
        for (i, &y) in ys.iter().enumerate() {
            for (p, m) in self.kernel.cell_masses(self.t, self.mu, y)?.into_iter().enumerate() {
                positions[p * n + i] = self.kernel.centers[p];
                rates[p * n + i] = m;
            }
        }
        Ok(())
    }
}
