//! Acceptance suite. Runs every criterion in sequence and prints one
//! pass/fail line per criterion with its runtime.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitpop::harness::{
    convergence_study, longtime_run, mass_clusters, mass_outside, parameter_sweep, ErrorReport, ExperimentConfig,
};
use splitpop::lp::maximize;
use splitpop::measure::metrics::{metric_report, rho, w1};
use splitpop::measure::flat_exact;
use splitpop::model::builtins::{MutationKernel, MUTATION_BRANCHES, MUTATION_RANGE};
use splitpop::model::{Local, NoBirths};
use splitpop::reconstruction::{fixed_equal_mass, fixed_location, DomainPolicy};
use splitpop::solver::{simulate, Positivity, SolverConfig};
use splitpop::{AnyMeasure, AtomicMeasure, Error, ModelSpec};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_atoms(rng: &mut ChaCha8Rng, max_atoms: usize, lo: f64, hi: f64) -> AtomicMeasure {
    let n = rng.random_range(1..=max_atoms);
    AtomicMeasure::new((0..n).map(|_| (rng.random_range(lo..hi), 1.0 - rng.random::<f64>()))).unwrap()
}

fn example1(levels: usize, schedule: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "model": {{"name": "mckendrick"}},
            "solver": {{"final_time": 10.0, "steps": 100, "mass_update": "boundary_ode", "record_diagnostics": false}},
            "reconstruction": {{
                "initial": {{"kind": "fixed_location", "target": 10, "domain": {{"fixed_interval": [0.0, 1.0]}}}}
                {schedule}
            }},
            "experiment": {{"levels": {levels}, "error_metric": "rho_doubled_mass_gap"}}
        }}"#
    ))
    .unwrap()
}

/// Errors must stay within 15% of the published values at the two coarsest
/// levels and within 25% afterwards.
fn compare_to_table(report: &ErrorReport, table: &[f64]) -> Check {
    for (row, &expected) in report.rows.iter().zip(table) {
        let tol = if row.level < 2 { 0.15 } else { 0.25 };
        ensure!(rel(row.err, expected) <= tol, "level {}: Err {:.5e} vs {:.5e}", row.level, row.err, expected);
    }
    Ok(String::new())
}

fn table1() -> Check {
    const TABLE: [f64; 11] = [
        1.2532e-2, 5.0543e-3, 2.2225e-3, 1.0349e-3, 4.9832e-4, 2.4438e-4, 1.2099e-4, 6.0198e-5, 3.0024e-5, 1.4993e-5, 7.4920e-6,
    ];
    let start = Instant::now();
    let report = convergence_study(&example1(11, "")).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(report.failure.is_none(), "level failed: {:?}", report.failure);
    ensure!(report.rows.len() == 11, "{} rows", report.rows.len());
    compare_to_table(&report, &TABLE)?;
    let q_rho = report.orders_of(|r| r.rho);
    for i in 8..=10 {
        let (q, qr) = (report.rows[i].q.unwrap(), q_rho[i].unwrap());
        ensure!((0.95..=1.15).contains(&q), "q at level {i} = {q}");
        ensure!((0.95..=1.15).contains(&qr), "q under plain rho at level {i} = {qr}");
    }
    ensure!(secs < 120.0, "levels 0-10 took {secs:.1} s");
    Ok(format!(
        "Err(0.1) = {:.5e}, Err(0.05) = {:.5e}, final q = {:.5}, final q (plain rho) = {:.5}, study {secs:.1} s",
        report.rows[0].err,
        report.rows[1].err,
        report.rows[10].q.unwrap(),
        q_rho[10].unwrap()
    ))
}

fn table2() -> Check {
    const LOCATION: [f64; 11] = [
        3.4657e-1, 1.1670e-1, 3.4080e-2, 1.1863e-2, 3.6874e-3, 1.6866e-3, 6.8067e-4, 3.3212e-4, 1.5814e-4, 7.4507e-5, 3.6414e-5,
    ];
    const EQUAL_MASS: [f64; 11] = [
        8.8838e-2, 2.9437e-2, 1.0879e-2, 4.4725e-3, 1.9907e-3, 9.3351e-4, 4.5131e-4, 2.2178e-4, 1.0992e-4, 5.4719e-5, 2.7299e-5,
    ];
    let loc = r#", "schedule": {"kind": "fixed_location", "target": 10, "domain": {"fixed_interval": [0.0, 1.0]}, "every": 10}"#;
    let eqm = r#", "schedule": {"kind": "fixed_equal_mass", "target": 10, "every": 10}"#;
    let loc = convergence_study(&example1(11, loc)).map_err(|e| e.to_string())?;
    let eqm = convergence_study(&example1(11, eqm)).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for (name, report, table) in [("fixed-location", &loc, &LOCATION), ("fixed-equal-mass", &eqm, &EQUAL_MASS)] {
        ensure!(report.failure.is_none() && report.rows.len() == 11, "{name}: incomplete study");
        compare_to_table(report, table).map_err(|e| format!("{name}: {e}"))?;
        let q = report.rows[10].q.unwrap();
        let qr = report.orders_of(|r| r.rho)[10].unwrap();
        ensure!((0.95..=1.2).contains(&q), "{name}: final q = {q}");
        ensure!((0.95..=1.2).contains(&qr), "{name}: final q under plain rho = {qr}");
        summary.push(format!("{name} final q = {q:.4} (plain rho {qr:.4})"));
    }
    for (a, b) in loc.rows.iter().zip(&eqm.rows).filter(|(a, _)| a.dt <= 0.025) {
        ensure!(b.err <= a.err, "level {}: equal-mass {:.4e} > fixed-location {:.4e}", a.level, b.err, a.err);
    }
    Ok(summary.join(", "))
}

fn reconstruction_bounds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let mu = random_atoms(&mut rng, 100, 0.0, 10.0);
        let target = rng.random_range(1..=60);
        let (lo, hi) = mu.support().unwrap();
        let width = hi - lo;
        let l = fixed_location(&mu, target, DomainPolicy::SupportHull).unwrap().measure;
        let m = fixed_equal_mass(&mu, target, DomainPolicy::SupportHull).unwrap().measure;
        ensure!(l.total_mass() == mu.total_mass(), "case {case}: fixed-location mass {} vs {}", l.total_mass(), mu.total_mass());
        ensure!(m.total_mass() == mu.total_mass(), "case {case}: equal-mass mass {} vs {}", m.total_mass(), mu.total_mass());
        let (wl, wm) = (w1(&mu, &l, true).unwrap(), w1(&mu, &m, true).unwrap());
        let (bl, bm) = (width / (2.0 * target as f64), width / target as f64);
        ensure!(wl <= bl * (1.0 + 1e-12), "case {case}: fixed-location W1 {wl} > {bl}");
        ensure!(wm <= bm * (1.0 + 1e-12), "case {case}: equal-mass W1 {wm} > {bm}");
        if bl > 0.0 {
            worst = worst.max(wl / bl).max(wm / bm);
        }
    }
    Ok(format!("1000 measures, worst W1/bound = {worst:.4}"))
}

fn metric_sandwich() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tightest: f64 = f64::INFINITY;
    for case in 0..500 {
        let a = random_atoms(&mut rng, 8, 0.0, 10.0);
        let b = random_atoms(&mut rng, 8, 0.0, 10.0);
        let report = metric_report(&a, &b).unwrap();
        let flat = flat_exact(&a, &b).unwrap();
        ensure!(report.flat_lower <= flat + 1e-9, "case {case}: C_K rho {} > flat {flat}", report.flat_lower);
        ensure!(flat <= report.rho + 1e-9, "case {case}: flat {flat} > rho {}", report.rho);
        tightest = tightest.min(report.rho - flat);
    }
    for case in 0..100 {
        let (x, y) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let flat = flat_exact(&AtomicMeasure::dirac(x, 1.0), &AtomicMeasure::dirac(y, 1.0)).unwrap();
        let expected = f64::min(2.0, (x - y).abs());
        ensure!((flat - expected).abs() <= 1e-9, "dirac case {case}: {flat} vs {expected}");
    }
    Ok(format!("500 pairs + 100 dirac pairs, min(rho - flat) = {tightest:.3e}"))
}

fn conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu0 = random_atoms(&mut rng, 50, 0.0, 1.0);
    let init: AnyMeasure = mu0.clone().into();

    let drift = ModelSpec::new("drift", Local(|x: f64| 0.1 + 0.05 * x.sin()), Local(|_| 0.0), NoBirths);
    let trace = simulate(&drift, &init, &SolverConfig::new(10.0, 10_000)).map_err(|e| e.to_string())?;
    let gap = rel(trace.final_measure.total_mass(), mu0.total_mass());
    ensure!(gap <= 1e-14, "transport-only mass drift {gap:e}");

    let (lambda, dt, n) = (0.7, 0.01, 1000);
    let death = ModelSpec::new("death", Local(|_| 0.0), Local(move |_| lambda), NoBirths);
    let trace = simulate(&death, &init, &SolverConfig::new(dt * n as f64, n)).map_err(|e| e.to_string())?;
    let factor = 1.0 - lambda * dt;
    for (&m0, &m) in mu0.masses().iter().zip(trace.final_measure.masses()) {
        let mut expected = m0;
        for _ in 0..n {
            expected *= factor;
        }
        ensure!(m == expected, "constant death: {m} vs recurrence {expected}");
        ensure!(rel(m, m0 * factor.powi(n as i32)) < 1e-12, "constant death: {m} vs closed form");
    }

    let harsh = ModelSpec::new("harsh", Local(|_| 0.0), Local(|x: f64| 5.0 + 20.0 * x), NoBirths);
    let mut config = SolverConfig::new(1.0, 10);
    match simulate(&harsh, &init, &config) {
        Err(Error::Step { source, .. }) if matches!(*source, Error::EulerStability { .. }) => {}
        other => return Err(format!("stability guard not raised: {:?}", other.map(|t| t.final_measure.total_mass()))),
    }
    config.positivity = Positivity::Clamp;
    config.snapshot_times = (0..=10).map(|k| k as f64 / 10.0).collect();
    let trace = simulate(&harsh, &init, &config).map_err(|e| e.to_string())?;
    let negative = trace.snapshots.iter().flat_map(|s| s.measure.masses()).filter(|&&m| m < 0.0).count();
    ensure!(negative == 0, "{negative} negative masses under clamping");
    let clamped: usize = trace.diagnostics.iter().map(|d| d.clamped).sum();
    Ok(format!("transport drift {gap:.1e}, death recurrence exact over {n} steps, {clamped} clamped masses, guard raised"))
}

fn selection_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "model": {"name": "selection_growth", "A": 0.5},
            "solver": {"final_time": 2000.0, "steps": 20000, "record_diagnostics": false},
            "reconstruction": {"initial": {"kind": "fixed_location", "target": 200, "domain": {"fixed_interval": [-2.0, 2.0]}}}
        }"#,
    )
    .unwrap()
}

fn example2() -> Check {
    let sweep = parameter_sweep(&selection_config(), "A", &[0.0, 0.5, 2.5]).map_err(|e| e.to_string())?;
    let finals: Vec<&AtomicMeasure> = sweep
        .points
        .iter()
        .map(|p| p.outcome.as_ref().map_err(|e| format!("A = {}: {}", p.value, e.message)))
        .collect::<Result<_, _>>()?;
    ensure!(finals[0].total_mass() < 1.0, "A = 0: final mass {} not below initial", finals[0].total_mass());
    let half = 0.5f64.sqrt();
    let outside = mass_outside(finals[1], -half, half) / finals[1].total_mass();
    ensure!(outside < 1e-6, "A = 0.5: mass fraction outside |x| <= sqrt(A) is {outside:e}");
    let clusters = mass_clusters(finals[2], 0.05, 0.01);
    ensure!(clusters.len() >= 2, "A = 2.5: {} clusters", clusters.len());
    let centers: Vec<String> = clusters.iter().map(|c| format!("{:.2}", 0.5 * (c.lo + c.hi))).collect();
    Ok(format!("A = 0.5 outside fraction {outside:.1e}; A = 2.5 clusters at [{}]", centers.join(", ")))
}

fn checkpoint_rhos(snapshots: &[splitpop::solver::Snapshot]) -> Vec<f64> {
    snapshots.windows(2).map(|w| rho(&w[0].measure, &w[1].measure).unwrap()).collect()
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn example3() -> Check {
    let times: Vec<String> = (0..=8).map(|k| format!("{}", 25 * k)).collect();
    let config = ExperimentConfig::from_json(&format!(
        r#"{{
            "model": {{"name": "equal_fission"}},
            "solver": {{"final_time": 200.0, "steps": 4000, "snapshot_times": [5, 10, {}], "record_diagnostics": false}},
            "reconstruction": {{
                "initial": {{"kind": "fixed_equal_mass", "target": 700}},
                "schedule": {{"kind": "fixed_equal_mass", "target": 700, "every": 4}}
            }},
            "experiment": {{"normalize": true}}
        }}"#,
        times.join(", ")
    ))
    .unwrap();
    let run = longtime_run(&config).map_err(|e| e.to_string())?;
    let (early, checkpoints): (Vec<_>, Vec<_>) = run.normalized.iter().cloned().partition(|s| s.time == 5.0 || s.time == 10.0);
    let masses: Vec<f64> = run.trace.snapshots.iter().map(|s| s.measure.total_mass()).collect();
    ensure!(masses.windows(2).all(|w| w[1] > w[0]), "total mass not strictly increasing: {masses:?}");
    let rhos = checkpoint_rhos(&checkpoints);
    let last = &rhos[rhos.len() - 4..];
    ensure!(strictly_decreasing(last), "late rho(t, t+25) not decreasing: {last:?}");
    let early_rho = rho(&early[0].measure, &early[1].measure).unwrap();
    ensure!(last[3] < early_rho, "rho(175, 200) = {} not below rho(5, 10) = {early_rho}", last[3]);
    Ok(format!(
        "late rho(t, t+25) = [{}], mass {:.3e} -> {:.3e}",
        last.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>().join(", "),
        masses[0],
        masses[masses.len() - 1]
    ))
}

fn example4() -> Check {
    for epsilon in [0.1, 0.0125] {
        let kernel = MutationKernel::new(epsilon, MUTATION_RANGE, MUTATION_BRANCHES);
        for i in 0..=1000 {
            let y = i as f64 / 1000.0;
            let sum: f64 = kernel.probabilities(y).iter().sum();
            ensure!((sum - 1.0).abs() < 1e-12, "sum of branch weights at y = {y} is {sum}");
        }
    }
    let times: Vec<String> = (0..=10).map(|k| format!("{}", 50 * k)).collect();
    let mut late = Vec::new();
    for epsilon in [0.1, 0.0125] {
        let config = ExperimentConfig::from_json(&format!(
            r#"{{
                "model": {{"name": "selection_mutation", "epsilon": {epsilon}}},
                "solver": {{"final_time": 500.0, "steps": 20000, "snapshot_times": [{}], "record_diagnostics": false}},
                "reconstruction": {{
                    "initial": {{"kind": "fixed_location", "target": 100, "domain": {{"fixed_interval": [0.0, 1.0]}}}},
                    "schedule": {{"kind": "fixed_location", "target": 100, "domain": {{"fixed_interval": [0.0, 1.0]}}, "every": 2}}
                }},
                "experiment": {{"normalize": true}}
            }}"#,
            times.join(", ")
        ))
        .unwrap();
        let run = longtime_run(&config).map_err(|e| e.to_string())?;
        let rhos = checkpoint_rhos(&run.normalized);
        let last = &rhos[rhos.len() - 5..];
        ensure!(strictly_decreasing(last), "epsilon = {epsilon}: late rho not decreasing: {last:?}");
        late.push(last[4]);
    }
    ensure!(late[0] < late[1], "epsilon = 0.1 late rho {} not below epsilon = 0.0125 late rho {}", late[0], late[1]);
    Ok(format!("rho(450, 500): epsilon 0.1 -> {:.2e}, epsilon 0.0125 -> {:.2e}", late[0], late[1]))
}

/// Kantorovich-Rubinstein dual over all pairs of support points:
/// `max Σ (a - b)(u) f(u)` over 1-Lipschitz `f`, shifted to `0 ≤ f ≤ diam`.
fn brute_force_w1(a: &AtomicMeasure, b: &AtomicMeasure) -> f64 {
    let mut points: Vec<f64> = a.positions().iter().chain(b.positions()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let weight = |u: f64| -> f64 {
        a.iter().filter(|&(x, _)| x == u).map(|(_, m)| m).sum::<f64>() - b.iter().filter(|&(x, _)| x == u).map(|(_, m)| m).sum::<f64>()
    };
    let c: Vec<f64> = points.iter().map(|&u| weight(u)).collect();
    let diam = points[points.len() - 1] - points[0];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..points.len() {
        rows.push(vec![(k, 1.0)]);
        rhs.push(diam);
        for l in 0..points.len() {
            if k != l {
                rows.push(vec![(k, 1.0), (l, -1.0)]);
                rhs.push((points[k] - points[l]).abs());
            }
        }
    }
    maximize(&c, &rows, &rhs).unwrap().objective
}

fn w1_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let a = random_atoms(&mut rng, 6, 0.0, 10.0);
        let b = random_atoms(&mut rng, 6, 0.0, 10.0);
        let fast = w1(&a, &b, true).unwrap();
        let oracle = brute_force_w1(&a.normalized().unwrap(), &b.normalized().unwrap());
        ensure!((fast - oracle).abs() <= 1e-10, "case {case}: w1 {fast} vs oracle {oracle}");
        worst = worst.max((fast - oracle).abs());
    }
    Ok(format!("500 pairs, max |w1 - oracle| = {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 table 1 reproduction", table1),
        ("2 table 2 reproduction", table2),
        ("3 reconstruction bounds", reconstruction_bounds),
        ("4 metric sandwich", metric_sandwich),
        ("5 conservation and positivity", conservation),
        ("6 selection-growth long run", example2),
        ("7 equal-fission long run", example3),
        ("8 selection-mutation long run", example4),
        ("9 w1 oracle equivalence", w1_oracle),
    ];
    let limits = [120.0, f64::INFINITY, 10.0, 30.0, f64::INFINITY, 180.0, 180.0, 240.0, f64::INFINITY];
    let mut failed = 0;
    let mut lines = Vec::new();
    for ((name, f), limit) in criteria.into_iter().zip(limits) {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(_) if secs >= limit => Err(format!("runtime {secs:.1} s exceeds {limit} s")),
            other => other,
        };
        let line = match &outcome {
            Ok(detail) => format!("PASS  criterion {name:<32} {secs:>7.2} s  {detail}"),
            Err(why) => {
                failed += 1;
                format!("FAIL  criterion {name:<32} {secs:>7.2} s  {why}")
            }
        };
        println!("{line}");
        lines.push(line);
    }
    println!("\nacceptance summary");
    for line in &lines {
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
