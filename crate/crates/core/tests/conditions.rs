//! Standing-condition verdicts on the reference fixtures.

use ergodic_core::model::fixtures::{default_params, log_attracting, log_nat, shlog_ent};
use ergodic_core::model::{verify_conditions, DiffusionModel, LeftBoundary};
use ergodic_core::potentials::build_table;
use ergodic_core::Error;

#[test]
fn reference_fixtures_pass() {
    let p = default_params();
    let nat = verify_conditions(&log_nat(), &p, 1e-9).unwrap();
    assert_eq!(nat.left_boundary_class, LeftBoundary::Natural);
    assert!(nat.all_pass(), "{:?}", nat.failures());
    let ent = verify_conditions(&shlog_ent(), &p, 1e-9).unwrap();
    assert_eq!(ent.left_boundary_class, LeftBoundary::Entrance);
    assert!(ent.all_pass(), "{:?}", ent.failures());
}

#[test]
fn attracting_boundary_is_reported() {
    let r = verify_conditions(&log_attracting(), &default_params(), 1e-9).unwrap();
    assert_eq!(r.left_boundary_class, LeftBoundary::Attracting);
    assert!(!r.speed_finite_left);
    assert!(r.failures().contains(&"left boundary is attracting"));
}

#[test]
fn decreasing_reward_fails_monotonicity() {
    let m = log_nat().with_reward(|x: f64| 1.0 / (1.0 + x));
    let r = verify_conditions(&m, &default_params(), 1e-9).unwrap();
    assert!(!r.c_monotone && !r.c_increases);
}

#[test]
fn negative_reward_is_rejected() {
    let m = DiffusionModel::new(0.0, f64::INFINITY, 0.5, |x| x * (1.0 - x), |x| 0.5 * x, |x| x - 0.25).unwrap();
    let e = verify_conditions(&m, &default_params(), 1e-9).unwrap_err();
    assert!(matches!(e, Error::NegativeReward { .. }), "{e:?}");
}

#[test]
fn attracting_table_reports_non_integrable_speed() {
    assert!(build_table(&log_attracting(), 500, 1e-8).is_err());
}
