//! Scalar special functions shared by the density and oracle code.

use statrs::function::{erf, gamma};

pub use statrs::function::gamma::ln_gamma;

/// `Σ ln Γ(aᵢ)` summed in descending magnitude order.
pub fn sum_ln_gamma(args: impl IntoIterator<Item = f64>) -> f64 {
    let mut terms: Vec<f64> = args.into_iter().map(gamma::ln_gamma).collect();
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    terms.iter().sum()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    statrs::function::beta::beta_reg(a, b, x.clamp(0.0, 1.0))
}
