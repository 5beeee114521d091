use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::model::{Domain, Field, FrozenKernel};

use super::config::{Integrator, MassUpdate, OffspringPolicy, Positivity};

/// Marks a `(parent, branch)` pair that produces no offspring.
pub const NO_TARGET: usize = usize::MAX;

/// Advances each `xs[i]` by one step of size `dt` under `b` into `out[i]`.
pub(crate) fn advance(xs: &[f64], out: &mut [f64], b: &dyn Field, dt: f64, integrator: Integrator) {
    match integrator {
        Integrator::Euler => b.euler_step(xs, out, dt),
        Integrator::Rk4 => b.rk4_step(xs, out, dt),
    }
}

/// Restores strictly increasing positions after a move: sorts if needed and
/// merges atoms closer than `tol`, summing their masses. Returns the number
/// of atoms removed.
pub(crate) fn sort_and_merge(positions: &mut Vec<f64>, masses: &mut Vec<f64>, tol: f64) -> usize {
    let mut separated = true;
    for (a, b) in positions.iter().zip(&positions[1.min(positions.len())..]) {
        separated &= b - a > tol;
    }
    if separated {
        return 0;
    }
    if !positions.windows(2).all(|w| w[0] <= w[1]) {
        let mut pairs: Vec<(f64, f64)> = positions.iter().copied().zip(masses.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (x, m)) in pairs.into_iter().enumerate() {
            positions[i] = x;
            masses[i] = m;
        }
    }
    let n = positions.len();
    let mut w = 0;
    for r in 1..n {
        if positions[r] - positions[w] <= tol {
            masses[w] += masses[r];
        } else {
            w += 1;
            positions[w] = positions[r];
            masses[w] = masses[r];
        }
    }
    positions.truncate(w + 1);
    masses.truncate(w + 1);
    n - (w + 1)
}

/// Birth rates must be finite and nonnegative.
pub(crate) fn check_rates(rates: &[f64]) -> Result<()> {
    match rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        Some(r) if r.is_finite() => Err(Error::Model(format!("negative birth rate {r}"))),
        Some(r) => Err(Error::NonFinite(format!("birth rate {r}"))),
        None => Ok(()),
    }
}

/// `Σ β_j m_j` after checking the rates; positive exactly when some atom
/// with mass has a positive rate, barring underflow.
pub(crate) fn birth_weight(rates: &[f64], masses: &[f64]) -> Result<f64> {
    let mut bad = false;
    let mut sum = 0.0;
    for (&r, &m) in rates.iter().zip(masses) {
        bad |= !(r >= 0.0 && r <= f64::MAX);
        sum += r * m;
    }
    if bad {
        check_rates(rates)?;
    }
    Ok(sum)
}

pub(crate) fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} at index {i}: {}", xs[i]))),
        None => Ok(()),
    }
}

/// Moves every atom along the characteristic of `b` over one step of size
/// `dt`. Masses are unchanged; atoms landing within `merge_tol` of each
/// other are merged.
pub fn transport_step(mu: &AtomicMeasure, b: &dyn Field, dt: f64, integrator: Integrator, merge_tol: f64) -> Result<AtomicMeasure> {
    let mut positions = vec![0.0; mu.len()];
    advance(mu.positions(), &mut positions, b, dt, integrator);
    let mut masses = mu.masses().to_vec();
    check_finite(&positions, "transported position")?;
    sort_and_merge(&mut positions, &mut masses, merge_tol);
    Ok(AtomicMeasure::from_sorted_unchecked(positions, masses))
}

/// The transported atoms extended by the offspring states, together with
/// the map from `(branch p, parent i)` to the index of `x̄_p(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    /// Existing and new states, strictly increasing.
    pub positions: Vec<f64>,
    /// Current masses; new states carry zero.
    pub masses: Vec<f64>,
    /// Index in `positions` of each parent atom.
    pub parents: Vec<usize>,
    /// `targets[p * n + i]` is the index of the state receiving the births
    /// of parent `i` on branch `p`, or [`NO_TARGET`].
    pub targets: Vec<usize>,
    /// `β_p(x_i)` in the same layout.
    pub rates: Vec<f64>,
    pub new_states: usize,
    /// Candidates discarded for lying outside the domain.
    pub dropped: usize,
}

/// Computes the offspring states of every atom of `mu` under the frozen
/// kernel and adds those not already present (within `tol`) with zero mass.
///
/// Pairs with zero rate or a massless parent create no state.
pub fn spawn_offspring_states(
    mu: &AtomicMeasure,
    kernel: &dyn FrozenKernel,
    branches: usize,
    domain: Domain,
    policy: OffspringPolicy,
    tol: f64,
) -> Result<Offspring> {
    let n = mu.len();
    let mut cand_pos = vec![0.0; branches * n];
    let mut rates = vec![0.0; branches * n];
    kernel.offspring(mu.positions(), &mut cand_pos, &mut rates)?;
    check_rates(&rates)?;

    let masses = mu.masses();
    let mut dropped = 0;
    let mut kept: Vec<(f64, usize)> = Vec::new();
    for (idx, (x, rate)) in cand_pos.iter().zip(rates.iter_mut()).enumerate() {
        if *rate == 0.0 || masses[idx % n.max(1)] == 0.0 {
            continue;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("offspring state of parent {}: {x}", idx % n)));
        }
        let x = if domain.contains(*x) {
            *x
        } else {
            match policy {
                OffspringPolicy::Drop => {
                    dropped += 1;
                    *rate = 0.0;
                    continue;
                }
                OffspringPolicy::Clamp => domain.clamp(*x),
            }
        };
        kept.push((x, idx));
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Group candidates, then match each group against the existing atoms.
    enum Slot {
        Existing(usize),
        New(usize),
    }
    let existing = mu.positions();
    let mut new_pos: Vec<f64> = Vec::new();
    let mut slot_of = vec![0usize; kept.len()];
    let mut slots: Vec<Slot> = Vec::new();
    let mut g = 0;
    while g < kept.len() {
        let rep = kept[g].0;
        let mut end = g + 1;
        while end < kept.len() && kept[end].0 - rep <= tol {
            end += 1;
        }
        let j = existing.partition_point(|&p| p < rep - tol);
        let slot = if j < n && existing[j] <= rep + tol {
            Slot::Existing(j)
        } else {
            new_pos.push(rep);
            Slot::New(new_pos.len() - 1)
        };
        for s in &mut slot_of[g..end] {
            *s = slots.len();
        }
        slots.push(slot);
        g = end;
    }

    // Merge existing and new states.
    let total = n + new_pos.len();
    let mut positions = Vec::with_capacity(total);
    let mut ext_masses = Vec::with_capacity(total);
    let mut parents = Vec::with_capacity(n);
    let mut new_index = Vec::with_capacity(new_pos.len());
    let (mut i, mut q) = (0, 0);
    while i < n || q < new_pos.len() {
        if q == new_pos.len() || (i < n && existing[i] < new_pos[q]) {
            parents.push(positions.len());
            positions.push(existing[i]);
            ext_masses.push(masses[i]);
            i += 1;
        } else {
            new_index.push(positions.len());
            positions.push(new_pos[q]);
            ext_masses.push(0.0);
            q += 1;
        }
    }

    let mut targets = vec![NO_TARGET; branches * n];
    for (&(_, idx), &s) in kept.iter().zip(&slot_of) {
        targets[idx] = match slots[s] {
            Slot::Existing(j) => parents[j],
            Slot::New(q) => new_index[q],
        };
    }
    Ok(Offspring {
        positions,
        masses: ext_masses,
        parents,
        targets,
        rates,
        new_states: new_pos.len(),
        dropped,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    /// `max |Δt·c|` over all states.
    pub max_dt_c: f64,
    /// Masses floored at zero in clamp mode.
    pub clamped: usize,
}

/// `max |Δt·c|`, failing on a non-finite rate.
fn max_dt_c(c: &[f64], dt: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut finite = true;
    for &ci in c {
        finite &= ci.is_finite();
        worst = worst.max((dt * ci).abs());
    }
    if !finite {
        check_finite(c, "loss rate")?;
    }
    Ok(worst)
}

/// One explicit Euler step of the mass equations:
/// `m_i ← m_i (1 − Δt c_i) + Δt Σ β_p(x_j) m_j` over the pairs `(j, p)`
/// whose offspring land on state `i`.
pub fn mass_update_euler(off: &Offspring, c: &[f64], dt: f64, positivity: Positivity) -> Result<(Vec<f64>, UpdateStats)> {
    let mut stats = UpdateStats {
        max_dt_c: max_dt_c(c, dt)?,
        clamped: 0,
    };
    if positivity == Positivity::Strict {
        if let Some(worst) = off
            .masses
            .iter()
            .zip(c)
            .filter(|(m, _)| **m > 0.0)
            .map(|(_, c)| dt * c)
            .filter(|v| *v > 1.0)
            .reduce(f64::max)
        {
            return Err(Error::EulerStability { dt_c: worst });
        }
    }
    let mut out: Vec<f64> = off.masses.iter().zip(c).map(|(m, c)| m * (1.0 - dt * c)).collect();
    let n = off.parents.len();
    for (idx, (&t, &rate)) in off.targets.iter().zip(&off.rates).enumerate() {
        if t != NO_TARGET {
            out[t] += dt * rate * off.masses[off.parents[idx % n]];
        }
    }
    for m in &mut out {
        if *m < 0.0 {
            *m = 0.0;
            stats.clamped += 1;
        }
    }
    Ok((out, stats))
}

/// `x ↦ (1 − e^{−x}) / x`, continuous at 0.
fn h(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `∫_0^T e^{−c s} e^{−λ (T − s)} ds`.
fn source_integral(c: f64, lambda: f64, t: f64) -> f64 {
    (-(c.min(lambda)) * t).exp() * t * h((c - lambda).abs() * t)
}

/// Exact integration of the frozen linear mass equations when every newborn
/// lands on one state `x_b`: other atoms decay as `e^{−c_i Δt}`, and `m_b`
/// solves `m_b' = −λ_b m_b + Σ_j β(x_j) m_j e^{−c_j s}` with
/// `λ_b = c_b − β(x_b)` in closed form.
pub fn mass_update_boundary_ode(off: &Offspring, c: &[f64], dt: f64) -> Result<(Vec<f64>, UpdateStats)> {
    let n = off.parents.len();
    if off.targets.len() > n {
        return Err(Error::Config(format!(
            "boundary_ode mass update needs a single-branch kernel, got {} branches",
            off.targets.len() / n.max(1)
        )));
    }
    let mut boundary = None;
    for &t in off.targets.iter().filter(|t| **t != NO_TARGET) {
        match boundary {
            None => boundary = Some(t),
            Some(b) if b != t => {
                return Err(Error::Config("boundary_ode mass update needs a single offspring state".into()));
            }
            _ => {}
        }
    }
    let stats = UpdateStats {
        max_dt_c: max_dt_c(c, dt)?,
        clamped: 0,
    };

    // Consecutive atoms usually share their loss rate; reuse the exponentials.
    let mut last_c = f64::NAN;
    let mut last_decay = 1.0;
    let mut out: Vec<f64> = off
        .masses
        .iter()
        .zip(c)
        .map(|(&m, &ci)| {
            if ci != last_c {
                last_c = ci;
                last_decay = (-ci * dt).exp();
            }
            m * last_decay
        })
        .collect();

    if let Some(b) = boundary {
        let self_rate = off
            .parents
            .iter()
            .position(|&p| p == b)
            .map_or(0.0, |i| if off.targets[i] == b { off.rates[i] } else { 0.0 });
        let lambda = c[b] - self_rate;
        let mut mb = off.masses[b] * (-lambda * dt).exp();
        let (mut last_c, mut last_e) = (f64::NAN, 0.0);
        for (i, (&t, &rate)) in off.targets.iter().zip(&off.rates).enumerate() {
            let j = off.parents[i];
            if t == NO_TARGET || j == b {
                continue;
            }
            let cj = c[j];
            if cj != last_c {
                last_c = cj;
                last_e = source_integral(cj, lambda, dt);
            }
            mb += rate * off.masses[j] * last_e;
        }
        out[b] = mb;
    }
    Ok((out, stats))
}

/// In-place mass update for kernels whose births all land on state `b`.
/// `rates[j]` is the birth rate of atom `j` itself, aligned with `masses`.
pub(crate) fn single_state_update(
    masses: &mut [f64],
    rates: &[f64],
    c: &[f64],
    b: usize,
    dt: f64,
    mode: MassUpdate,
    positivity: Positivity,
) -> Result<UpdateStats> {
    let mut stats = UpdateStats::default();
    match mode {
        MassUpdate::ExplicitEuler => {
            stats.max_dt_c = max_dt_c(c, dt)?;
            if positivity == Positivity::Strict && stats.max_dt_c > 1.0 {
                if let Some(worst) = masses.iter().zip(c).filter(|(m, _)| **m > 0.0).map(|(_, c)| dt * c).filter(|v| *v > 1.0).reduce(f64::max) {
                    return Err(Error::EulerStability { dt_c: worst });
                }
            }
            let mut births = 0.0;
            for ((m, &r), &ci) in masses.iter_mut().zip(rates).zip(c) {
                births += r * *m;
                *m *= 1.0 - dt * ci;
            }
            masses[b] += dt * births;
            for m in masses.iter_mut() {
                if *m < 0.0 {
                    *m = 0.0;
                    stats.clamped += 1;
                }
            }
        }
        MassUpdate::BoundaryOde => {
            let lambda = c[b] - rates[b];
            let mb = masses[b] * (-lambda * dt).exp();
            masses[b] = 0.0;
            let (mut last_c, mut decay, mut source) = (f64::NAN, 1.0, 0.0);
            let mut births = 0.0;
            let mut worst = 0.0f64;
            for ((m, &r), &ci) in masses.iter_mut().zip(rates).zip(c) {
                if ci != last_c {
                    if !ci.is_finite() {
                        return Err(Error::NonFinite(format!("loss rate {ci}")));
                    }
                    last_c = ci;
                    decay = (-ci * dt).exp();
                    source = source_integral(ci, lambda, dt);
                    worst = worst.max((dt * ci).abs());
                }
                births += r * *m * source;
                *m *= decay;
            }
            masses[b] = mb + births;
            stats.max_dt_c = worst;
        }
    }
    Ok(stats)
}
