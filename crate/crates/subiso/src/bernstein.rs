//! Bernstein tail bound, relaxed by a concentration factor `beta`.

/// Upper-tail bound for `S = sum_i a_i X_i` around its mean when each `X_i`
/// is a 0-1 variable with mean `x_i`:
///
/// `exp(-(t^2/beta) / (2 * (sum_i a_i^2 (x_i - x_i^2) + M t / 3)))`,
/// with `M = max_i |a_i|`.
///
/// When the variance term vanishes the sum is deterministic: the bound is 1
/// at `t = 0` and 0 for `t > 0` (the degenerate case is flagged by
/// [`is_degenerate`], not an error).
pub fn bernstein_tail_bound(a: &[f64], x: &[f64], t: f64, beta: f64) -> f64 {
    assert_eq!(a.len(), x.len(), "coefficient/mean length mismatch");
    assert!(t >= 0.0, "tail point must be nonnegative");
    assert!(beta >= 1.0, "beta must be at least 1");
    let variance: f64 = a.iter().zip(x).map(|(ai, xi)| ai * ai * (xi - xi * xi)).sum();
    if variance <= 0.0 {
        return if t == 0.0 { 1.0 } else { 0.0 };
    }
    let m = a.iter().fold(0.0f64, |acc, ai| acc.max(ai.abs()));
    let denom = 2.0 * (variance + m * t / 3.0);
    (-(t * t / beta) / denom).exp()
}

/// True when the bound at `(a, x)` is degenerate: no coordinate carries any
/// randomness, so any positive tail is impossible.
pub fn is_degenerate(a: &[f64], x: &[f64]) -> bool {
    a.iter().zip(x).map(|(ai, xi)| ai * ai * (xi - xi * xi)).sum::<f64>() <= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_half_matches_formula() {
        let n = 10;
        let a = vec![1.0; n];
        let x = vec![0.5; n];
        for t in [0.5, 1.0, 3.0] {
            let expected = (-(t * t) / (2.0 * (n as f64 / 4.0 + t / 3.0))).exp();
            let got = bernstein_tail_bound(&a, &x, t, 1.0);
            assert!((got - expected).abs() < 1e-15, "t = {t}");
        }
    }

    #[test]
    fn zero_tail_point_is_one() {
        assert_eq!(bernstein_tail_bound(&[1.0], &[0.5], 0.0, 1.0), 1.0);
        assert_eq!(bernstein_tail_bound(&[0.0], &[0.0], 0.0, 2.0), 1.0);
    }

    #[test]
    fn deterministic_coordinates_give_zero_bound() {
        let a = [1.0, -1.0];
        let x = [0.0, 1.0];
        assert!(is_degenerate(&a, &x));
        assert_eq!(bernstein_tail_bound(&a, &x, 0.5, 1.0), 0.0);
        assert_eq!(bernstein_tail_bound(&a, &x, 0.0, 1.0), 1.0);
    }

    #[test]
    fn beta_loosens_the_bound() {
        let a = vec![1.0; 8];
        let x = vec![0.3; 8];
        let tight = bernstein_tail_bound(&a, &x, 2.0, 1.0);
        let loose = bernstein_tail_bound(&a, &x, 2.0, 40.0);
        assert!(loose > tight);
        assert!(loose < 1.0);
    }
}
