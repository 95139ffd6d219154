//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use subiso::cert::{find_subisotropic_covariance, verify_certificate};
use subiso::linalg::orthonormal_basis;

fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

/// Criterion 2: 500 random subspaces (n <= 64, dim <= (1-delta)n,
/// delta in {0.1, 0.25, 0.5}) solved at (a, eta) = (delta/10, 10/(9 delta))
/// all pass verification at tol 1e-7 within 10^4 iterations.
#[test]
fn criterion_2_certificate_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let tol = 1e-7;
    let mut failures = 0usize;
    let mut max_n = 0usize;
    for case in 0..500 {
        let n = rng.gen_range(4..=64);
        let delta = [0.1, 0.25, 0.5][case % 3];
        let max_dim = ((1.0 - delta) * n as f64).floor() as usize;
        // Half the cases sit at the extreme dimension, half below it.
        let dim = if case % 2 == 0 { max_dim } else { rng.gen_range(0..=max_dim) };
        let rows: Vec<DVector<f64>> = (0..dim)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let w = orthonormal_basis(&rows, 1e-9);
        let (a, eta) = (delta / 10.0, 10.0 / (9.0 * delta));
        match find_subisotropic_covariance(&w, n, a, eta, tol, 10_000) {
            Ok(cert) => {
                if !verify_certificate(&cert, &w, tol).pass() {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
        max_n = max_n.max(n);
    }
    report(
        "criterion 2 (certificate soundness)",
        failures == 0,
        &format!("{failures}/500 failures on random subspaces up to n = {max_n}"),
    );
}
