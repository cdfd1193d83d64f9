mod common;

use common::*;

const TOL: f64 = 1e-3;

#[test]
fn elbo_matches_finite_differences() {
    let err = elbo_gradient_error();
    assert!(err < TOL, "{err}");
}

#[test]
fn kl_mean_gradient_matches_finite_differences() {
    let err = kl_mean_gradient_error();
    assert!(err < TOL, "{err}");
}

#[test]
fn excitation_matches_finite_differences() {
    let err = excitation_gradient_error();
    assert!(err < TOL, "{err}");
}

#[test]
fn inhibition_heads_match_and_latent_gradient_is_reversed() {
    let err = inhibition_gradient_error();
    assert!(err < TOL, "{err}");
}

#[test]
fn style_loss_matches_finite_differences() {
    let err = style_gradient_error();
    assert!(err < TOL, "{err}");
}

#[test]
fn recon_and_cycle_match_finite_differences() {
    let (r, c) = (recon_gradient_error(), cycle_gradient_error());
    assert!(r < TOL && c < TOL, "{r} {c}");
}

#[test]
fn gradient_penalty_matches_finite_differences() {
    let err = gradient_penalty_error();
    assert!(err < TOL, "{err}");
}
