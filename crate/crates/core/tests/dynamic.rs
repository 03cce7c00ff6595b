use std::path::Path;

use evnum::feeder::ChargerSite;
use evnum::{generate_arrivals, run_scenario, Algorithm, FeederFiles, ScenarioConfig, MINUTES_PER_DAY};

fn sites(n: usize) -> Vec<ChargerSite> {
    (0..n)
        .map(|id| ChargerSite { id, site: format!("S{id}"), bus: format!("B{id}"), max_rate: 1.0, weight: 1.0 })
        .collect()
}

#[test]
fn arrival_statistics_over_many_seeds() {
    let rate = 0.05;
    let start = 240;
    let chargers = sites(1000);
    let seeds = 1000;
    let (mut count, mut gap_sum, mut gaps) = (0usize, 0.0, 0usize);
    for seed in 0..seeds {
        let cfg = ScenarioConfig {
            seed,
            arrival_rate: rate,
            arrival_start_minute: start,
            ..ScenarioConfig::new(Algorithm::Primal)
        };
        let arrivals = generate_arrivals(&cfg, &chargers).unwrap();
        count += arrivals.len();
        for w in arrivals.windows(2) {
            gap_sum += (w[1].arrival_minute - w[0].arrival_minute) as f64;
            gaps += 1;
        }
        assert!(arrivals.iter().all(|s| s.arrival_minute >= start && s.arrival_minute < MINUTES_PER_DAY));
    }
    let expected = rate * (MINUTES_PER_DAY - start) as f64;
    let mean = count as f64 / seeds as f64;
    assert!((mean - expected).abs() / expected < 0.1, "mean count {mean}, expected {expected}");
    let mean_gap = gap_sum / gaps as f64;
    assert!((mean_gap - 1.0 / rate).abs() * rate < 0.1, "mean gap {mean_gap}");
}

fn bundled() -> (evnum::Feeder, evnum::LoadShapes) {
    FeederFiles::in_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/eulv")).load().unwrap()
}

#[test]
fn primal_day_never_overloads() {
    let (f, shapes) = bundled();
    let report = run_scenario(&ScenarioConfig::new(Algorithm::Primal), &f, &shapes).unwrap();
    assert_eq!(report.violation_minutes(), 0);
    assert!(report.minutes.iter().all(|m| m.max_violation <= 1e-9));
    assert_eq!(report.completed_sessions(), report.sessions.len());
    assert!((report.total_energy_kwh() - 24.0 * report.sessions.len() as f64).abs() < 1e-6);
}

#[test]
fn more_dual_rounds_per_minute_reduce_violations() {
    let (f, shapes) = bundled();
    let one = run_scenario(&ScenarioConfig::new(Algorithm::Dual), &f, &shapes).unwrap();
    let many = run_scenario(
        &ScenarioConfig { iterations_per_minute: 20, ..ScenarioConfig::new(Algorithm::Dual) },
        &f,
        &shapes,
    )
    .unwrap();
    assert!(one.violation_minutes() > 0);
    assert!(
        many.violation_minutes() < one.violation_minutes(),
        "{} vs {}",
        many.violation_minutes(),
        one.violation_minutes()
    );
}

#[test]
fn uncontrolled_day_overloads() {
    let (f, shapes) = bundled();
    let report = run_scenario(&ScenarioConfig::new(Algorithm::Uncontrolled), &f, &shapes).unwrap();
    assert!(report.violation_minutes() > 0);
}

#[test]
fn reports_are_reproducible() {
    let (f, shapes) = bundled();
    for algorithm in [Algorithm::Dual, Algorithm::Primal] {
        let cfg = ScenarioConfig { seed: 11, ..ScenarioConfig::new(algorithm) };
        let a = run_scenario(&cfg, &f, &shapes).unwrap();
        let b = run_scenario(&cfg, &f, &shapes).unwrap();
        assert_eq!(a.lines_csv(), b.lines_csv());
        assert_eq!(a.sessions_csv(), b.sessions_csv());
        assert_eq!(a.minutes_csv(), b.minutes_csv());
    }
}
