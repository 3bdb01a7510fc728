//! Closed-form bit accounting for the compressed adaptive machine.

use crate::compress::plan_segments_acif;

/// Standard normal CDF by rational approximation (|error| < 7.5e-8).
pub fn normal_cdf(x: f64) -> f64 {
    // Hastings-type fit to the complementary density tail.
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.2316419 * z);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = pdf * poly;
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Probability that a Gaussian sample lands outside mu +- n*sigma.
pub fn switch_probability(n: f64) -> f64 {
    2.0 * normal_cdf(-n)
}

/// Expected total bits for `os_s` samples under a segment plan with
/// `l_ac` segments, switch rate `p_m`, and bias-link ratio `phi_m`:
///
///   bits = os_s * (log2 K + eta * p_m - log2 phi_m)
///
/// This is the closed form of the component sum
/// eta*M + os_s*(log2 K - eta) + os_s*rho with M = p_m*os_s and the
/// real-valued bias width rho = eta - log2 phi_m.
pub fn analytic_bits(os_s: f64, k: u32, l_ac: u32, p_m: f64, phi_m: f64) -> f64 {
    let eta = (l_ac as f64).log2();
    os_s * ((k as f64).log2() + eta * p_m - phi_m.log2())
}

/// Alternative grouping that scales both the bias saving and the residual
/// reduction by the segment width:
///
///   bits = os_s * (log2 K + eta * (p_m - log2 phi_m - 1))
///
/// Kept for comparison studies; it understates the component sum whenever
/// eta > 1.
pub fn analytic_bits_factored(os_s: f64, k: u32, l_ac: u32, p_m: f64, phi_m: f64) -> f64 {
    let eta = (l_ac as f64).log2();
    os_s * ((k as f64).log2() + eta * (p_m - phi_m.log2() - 1.0))
}

/// Largest switch rate at which the compressed adaptive machine still beats
/// the fixed-bias machine when the latter oversamples by `nu` > 1:
///
///   p_m < (nu - 1) * log2 K / eta + log2 phi_m / eta
pub fn break_even_switch_rate(k: u32, l_ac: u32, nu: f64, phi_m: f64) -> f64 {
    let eta = (l_ac as f64).log2();
    ((nu - 1.0) * (k as f64).log2() + phi_m.log2()) / eta
}

/// Upper bound on total bits for a Gaussian amplitude process N(mu, sigma^2):
/// segments sized to `n` deviations give switch rate 2*(1 - Phi(n)); the
/// amplitude bound is taken at `n_tilde` deviations. Uses the integer bias
/// width the codec would allocate, so the bound dominates the realized count.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_bit_bound(
    mu: f64,
    sigma: f64,
    n: f64,
    n_tilde: f64,
    os_s: f64,
    k: u32,
    beta: f64,
    c_max: f64,
) -> f64 {
    let p_m = switch_probability(n);
    let c_bound = c_max.max(mu + n_tilde * sigma);
    let plan = plan_segments_acif(sigma, mu + sigma, c_bound, beta, k);
    let eta = plan.eta as f64;
    os_s * (eta * p_m + ((k as f64).log2() - eta) + plan.rho as f64)
}
