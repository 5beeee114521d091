//! Fixtures shared by the benchmarks.

use splitpop::AtomicMeasure;

/// `n` atoms spread over `[0, 1]` with uneven spacing and masses, total mass 1.
pub fn spread_measure(n: usize) -> AtomicMeasure {
    let atoms = (0..n).map(|i| {
        let s = (i as f64 + 0.5) / n as f64;
        (s * s, (1.0 + (7.0 * s).sin() * 0.5) / n as f64)
    });
    AtomicMeasure::new(atoms).unwrap()
}
