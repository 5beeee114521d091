use splitpop::harness::{convergence_study, ExperimentConfig};
use splitpop::solver::Integrator;

fn example1(levels: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "model": {{"name": "mckendrick"}},
            "solver": {{"final_time": 10.0, "steps": 100, "mass_update": "boundary_ode", "record_diagnostics": false}},
            "reconstruction": {{"initial": {{"kind": "fixed_location", "target": 10, "domain": {{"fixed_interval": [0.0, 1.0]}}}}}},
            "experiment": {{"levels": {levels}}}
        }}"#
    ))
    .unwrap()
}

#[test]
fn orders_are_exact_log_ratios() {
    let report = convergence_study(&example1(5)).unwrap();
    assert_eq!(report.rows[0].q, None);
    for w in report.rows.windows(2) {
        assert_eq!(w[1].q.unwrap(), (w[0].err / w[1].err).log2());
    }
}

#[test]
fn euler_transport_is_still_first_order() {
    let mut config = example1(8);
    config.solver.integrator = Integrator::Euler;
    let report = convergence_study(&config).unwrap();
    let q = report.rows.last().unwrap().q.unwrap();
    assert!((0.9..=1.15).contains(&q), "final q = {q}");
    let qs: Vec<f64> = report.rows.iter().filter_map(|r| r.q).collect();
    assert!(qs.windows(2).skip(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs() + 0.02), "{qs:?}");
}
