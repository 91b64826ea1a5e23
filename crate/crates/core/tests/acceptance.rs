//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line with the measured values.

use std::sync::Mutex;

use helmdamp::validation::run_criterion;

// Runtime budgets are part of several criteria, so criteria run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn check(id: u8) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let outcome = run_criterion(id);
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_01_exact_identities() {
    check(1);
}

#[test]
fn criterion_02_eigensolver_oracle_equivalence() {
    check(2);
}

#[test]
fn criterion_03_undamped_cavity_divergence() {
    check(3);
}

#[test]
fn criterion_04_damping_monotonicity_and_decay() {
    check(4);
}

#[test]
fn criterion_05_gamma_r_correspondence() {
    check(5);
}

#[test]
fn criterion_06_wavenumber_robustness() {
    check(6);
}

#[test]
fn criterion_07_n_scaling() {
    check(7);
}

#[test]
fn criterion_08_end_to_end_cross_validation() {
    check(8);
}

#[test]
fn criterion_09_greens_field_qualitative() {
    check(9);
}

#[test]
fn criterion_10_fd_convergence_order() {
    check(10);
}
