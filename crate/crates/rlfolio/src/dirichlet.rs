//! Dirichlet distribution support for the stochastic allocation policy.
//!
//! The policy network emits concentrations `alpha` (softplus output plus
//! one, so every entry exceeds 1); actions are weight vectors sampled from
//! `Dirichlet(alpha)`. Training needs the exact log-density and entropy and
//! their gradients with respect to `alpha`, so those live here alongside the
//! sampler.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

/// Samples a weight vector from `Dirichlet(alpha)` via normalized Gamma
/// draws. All concentrations must be positive; callers construct them as
/// `softplus(..) + 1`, so this asserts rather than returning an error.
pub fn sample<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    assert!(
        !alpha.is_empty() && alpha.iter().all(|a| *a > 0.0),
        "Dirichlet concentrations must be positive"
    );
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|a| Gamma::new(*a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let sum: f64 = draws.iter().sum();
        // A zero draw would put the sample on the simplex boundary where the
        // log-density blows up; retry (vanishingly rare for alpha >= 1).
        if sum > 0.0 && draws.iter().all(|g| *g > 0.0) {
            return draws.iter().map(|g| g / sum).collect();
        }
    }
}

/// Exact log-density of `w` under `Dirichlet(alpha)`:
/// `ln G(a0) - sum ln G(a_i) + sum (a_i - 1) ln w_i` with `a0 = sum a_i`.
pub fn log_pdf(alpha: &[f64], w: &[f64]) -> f64 {
    assert_eq!(alpha.len(), w.len());
    let a0: f64 = alpha.iter().sum();
    let mut v = ln_gamma(a0);
    for (a, w) in alpha.iter().zip(w) {
        v -= ln_gamma(*a);
        v += (a - 1.0) * w.ln();
    }
    v
}

/// Gradient of [`log_pdf`] with respect to each concentration:
/// `psi(a0) - psi(a_i) + ln w_i`.
pub fn log_pdf_grad_alpha(alpha: &[f64], w: &[f64]) -> Vec<f64> {
    let a0: f64 = alpha.iter().sum();
    let d0 = digamma(a0);
    alpha
        .iter()
        .zip(w)
        .map(|(a, w)| d0 - digamma(*a) + w.ln())
        .collect()
}

/// Differential entropy of `Dirichlet(alpha)`.
pub fn entropy(alpha: &[f64]) -> f64 {
    let k = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let mut h = -ln_gamma(a0) + (a0 - k) * digamma(a0);
    for a in alpha {
        h += ln_gamma(*a) - (a - 1.0) * digamma(*a);
    }
    h
}

/// Gradient of [`entropy`] with respect to each concentration:
/// `(a0 - K) psi'(a0) - (a_i - 1) psi'(a_i)`.
pub fn entropy_grad_alpha(alpha: &[f64]) -> Vec<f64> {
    let k = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let t0 = trigamma(a0);
    alpha
        .iter()
        .map(|a| (a0 - k) * t0 - (a - 1.0) * trigamma(*a))
        .collect()
}

/// Trigamma `psi'(x)` for positive `x`: recurrence up to `x >= 10`, then the
/// asymptotic Bernoulli series. Accurate to ~1e-13 on the ranges used here.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma domain is x > 0");
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/2x^2 + 1/6x^3 - 1/30x^5 + 1/42x^7 - 1/30x^9 + 5/66x^11
    acc + inv
        + 0.5 * inv2
        + inv2
            * inv
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}
