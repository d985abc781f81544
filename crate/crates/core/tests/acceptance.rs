//! Acceptance suite: one test per check, each printing a PASS/FAIL line.
//! Run with `cargo test -p modal-ofb --test acceptance -- --nocapture`.

use modal_ofb::par::Execution;
use modal_ofb::verify::{self, CheckResult};

fn report(results: &[CheckResult]) {
    for r in results {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

#[test]
fn criterion_1_spectral_exactness() {
    report(&[verify::spectral_exactness()]);
}

#[test]
fn criterion_2_gain_identity() {
    report(&[verify::gain_identity()]);
}

#[test]
fn criterion_3_scaling_slopes() {
    report(&verify::scaling_slopes(Execution::Parallel));
}

#[test]
fn criterion_4_linear_envelope() {
    report(&[verify::linear_envelope()]);
}

#[test]
fn criterion_5_reference_scenario() {
    report(&verify::reference_reproduction());
}

#[test]
fn criterion_6_observer_envelope() {
    report(&[verify::guaranteed_observer_envelope()]);
}

#[test]
fn criterion_7_sensor_minimality() {
    report(&[verify::sensor_minimality(verify::DEFAULT_SEED)]);
}

#[test]
fn criterion_8_consistency() {
    report(&verify::consistency());
}
