//! Gauss quadrature rules via the Golub–Welsch eigenvalue method.
//!
//! Hermite rules integrate against the standard normal density (so they
//! compute plain Gaussian expectations); Legendre rules are used to
//! integrate polynomial integrands exactly on subintervals.

use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(offdiag: &[f64], weight_mass: f64) -> Rule {
    let n = offdiag.len() + 1;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for (k, &b) in offdiag.iter().enumerate() {
        jacobi[(k, k + 1)] = b;
        jacobi[(k + 1, k)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, weight_mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// n-point rule for E[f(Z)], Z standard normal: E[f(Z)] = sum w_i f(x_i).
///
/// Built from the physicists' Hermite recurrence (off-diagonal sqrt(k/2))
/// and rescaled by sqrt(2); weights sum to 1 exactly up to rounding.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut rule = golub_welsch(&offdiag, 1.0);
    // Physicists' nodes t integrate e^{-t^2}; substitute z = sqrt(2) t and
    // normalize the total mass sqrt(pi) away.
    let total: f64 = rule.weights.iter().sum();
    for w in &mut rule.weights {
        *w /= total;
    }
    for x in &mut rule.nodes {
        *x *= std::f64::consts::SQRT_2;
    }
    let rule = Arc::new(rule);
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// n-point rule for ∫_0^1 f(u) du, exact for polynomials of degree 2n-1.
pub fn gauss_legendre_unit(n: usize) -> Arc<Rule> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut rule = golub_welsch(&offdiag, 2.0);
    // Map [-1, 1] onto [0, 1].
    for x in &mut rule.nodes {
        *x = 0.5 * (*x + 1.0);
    }
    for w in &mut rule.weights {
        *w *= 0.5;
    }
    let rule = Arc::new(rule);
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// Pairwise (tree) summation; the fixed association order keeps parallel
/// and serial evaluations bit-identical.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(16);
        let m0 = pairwise_sum(&rule.weights);
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        let m4: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn hermite_log_cosh_converges() {
        // E[log cosh(a Z)] has no closed form; node doubling should move
        // the value by far less than the coarse rule's own error.
        let f = |x: f64| (0.9f64 * x).cosh().ln();
        let at = |n: usize| -> f64 {
            let r = gauss_hermite(n);
            r.nodes.iter().zip(&r.weights).map(|(x, w)| w * f(*x)).sum()
        };
        let d32 = (at(16) - at(32)).abs();
        let d64 = (at(32) - at(64)).abs();
        assert!(d64 < 1e-7, "d64 = {d64:.3e}");
        assert!(d64 < d32 / 10.0, "doubling should gain an order: {d32:.3e} -> {d64:.3e}");
    }

    #[test]
    fn legendre_exactness() {
        let rule = gauss_legendre_unit(4);
        // Exact for degree 7: ∫_0^1 u^7 du = 1/8.
        let v: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(7))
            .sum();
        assert!((v - 0.125).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..101).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
