//! Central finite-difference checks for every reverse-mode gradient, with
//! all random draws held fixed.

mod common;

use common::{energy_fd_error, mlp_fd_error, policy_bnn, policy_fd_error};
use latent_bnn::envs::narrow_passage_mdp;

const TOL: f64 = 1e-3;

#[test]
fn mlp_backward_matches_differences() {
    for case in 0..20 {
        let e = mlp_fd_error(case);
        assert!(e < TOL, "case {case}: rel err {e}");
    }
}

#[test]
fn alpha_energy_gradient_matches_differences() {
    for case in 0..20 {
        let e = energy_fd_error(case);
        assert!(e < TOL, "case {case}: rel err {e}");
    }
}

#[test]
fn policy_gradient_through_bnn_matches_differences() {
    for case in 0..20 {
        let e = policy_fd_error(&policy_bnn(case), case);
        assert!(e < TOL, "case {case}: rel err {e}");
    }
}

#[test]
fn policy_gradient_through_true_dynamics_matches_differences() {
    let mdp = narrow_passage_mdp();
    for case in 0..20 {
        let e = policy_fd_error(&mdp, case);
        assert!(e < TOL, "case {case}: rel err {e}");
    }
}
