use proptest::prelude::*;

use splitpop::measure::io::{read_measure, write_atomic, write_reference};
use splitpop::measure::metrics::{metric_report, rho, w1, w1_by_quantiles};
use splitpop::measure::flat_exact;
use splitpop::{AnyMeasure, AtomicMeasure, ReferenceMeasure};

fn atoms(max: usize) -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((0.0..10.0f64, 0.01..1.0f64), 1..=max).prop_map(|v| AtomicMeasure::new(v).unwrap())
}

/// Monotone matching of sorted unit-mass pieces, valid in one dimension.
fn greedy_w1(a: &AtomicMeasure, b: &AtomicMeasure) -> f64 {
    let (a, b) = (a.normalized().unwrap(), b.normalized().unwrap());
    let mut xa: Vec<(f64, f64)> = a.iter().collect();
    let mut xb: Vec<(f64, f64)> = b.iter().collect();
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < xa.len() && j < xb.len() {
        let moved = xa[i].1.min(xb[j].1);
        cost += moved * (xa[i].0 - xb[j].0).abs();
        xa[i].1 -= moved;
        xb[j].1 -= moved;
        if xa[i].1 <= 1e-15 {
            i += 1;
        }
        if xb[j].1 <= 1e-15 {
            j += 1;
        }
    }
    cost
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rho_is_a_metric_on_equal_mass(a in atoms(10), b in atoms(10), c in atoms(10)) {
        let (a, b, c) = (a.normalized().unwrap(), b.normalized().unwrap(), c.normalized().unwrap());
        let ab = rho(&a, &b).unwrap();
        prop_assert!((ab - rho(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(rho(&a, &a).unwrap() <= 1e-12);
        prop_assert!(ab <= rho(&a, &c).unwrap() + rho(&c, &b).unwrap() + 1e-12);
        if a != b {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn flat_is_sandwiched(a in atoms(8), b in atoms(8)) {
        let r = metric_report(&a, &b).unwrap();
        let flat = flat_exact(&a, &b).unwrap();
        prop_assert!(r.flat_lower <= flat + 1e-9);
        prop_assert!(flat <= r.flat_upper + 1e-9);
    }

    #[test]
    fn flat_between_diracs(x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let flat = flat_exact(&AtomicMeasure::dirac(x, 1.0), &AtomicMeasure::dirac(y, 1.0)).unwrap();
        prop_assert!((flat - (x - y).abs().min(2.0)).abs() <= 1e-9);
    }

    #[test]
    fn w1_matches_greedy_transport(a in atoms(6), b in atoms(6)) {
        prop_assert!((w1(&a, &b, true).unwrap() - greedy_w1(&a, &b)).abs() <= 1e-10);
    }

    #[test]
    fn cdf_and_quantile_forms_agree(a in atoms(20), b in atoms(20)) {
        prop_assert!((w1(&a, &b, true).unwrap() - w1_by_quantiles(&a, &b, true).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn rho_of_scaled_copy_is_the_mass_gap(a in atoms(10), m in 0.01..5.0f64) {
        let p = a.normalized().unwrap();
        let r = rho(&p.scaled(m), &p).unwrap();
        prop_assert!((r - (m - 1.0).abs()).abs() <= 1e-12);
    }

    #[test]
    fn atomic_csv_round_trips(a in atoms(30)) {
        let mut buf = Vec::new();
        write_atomic(&a, &mut buf).unwrap();
        prop_assert_eq!(read_measure(&buf[..]).unwrap(), AnyMeasure::Atomic(a));
    }

    #[test]
    fn reference_csv_round_trips(lo in -5.0..0.0f64, width in 0.1..5.0f64, mass in 0.1..3.0f64) {
        let r = ReferenceMeasure::uniform(lo, lo + width, mass).unwrap();
        let mut buf = Vec::new();
        write_reference(&r, &mut buf).unwrap();
        prop_assert_eq!(read_measure(&buf[..]).unwrap(), AnyMeasure::Reference(r));
    }
}
