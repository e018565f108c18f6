//! Analytic per-sample gradients against central finite differences.

mod common;

use common::oracle::*;

#[test]
fn classic_gradient_matches_finite_differences() {
    let worst = classic_gradient_worst_error();
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn cosine_gradient_matches_finite_differences() {
    let worst = cosine_gradient_worst_error();
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn linfac_gradient_matches_in_plane_finite_differences() {
    let worst = linfac_gradient_worst_error();
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn paramat_gradient_matches_finite_differences() {
    let worst = paramat_gradient_worst_error();
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn oracle_detects_a_wrong_gradient() {
    let x = [0.3, -1.2, 2.0];
    let numeric = numeric_gradient(&x, |v| v.iter().map(|a| a * a).sum());
    assert!(relative_error(&[0.6, -2.4, 4.0], &numeric) < 1e-8);
    assert!(relative_error(&[0.6, -2.4, 4.4], &numeric) > TOL);
}
