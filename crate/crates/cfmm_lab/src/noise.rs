//! Real noise traders: preference-shock trades gated by gas.

use crate::error::{invalid, Result};
use crate::numerics::normal_pdf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub sigma_n: f64,
    pub beta: f64,
    /// Arrivals per unit time (simulation only).
    pub rate: f64,
}

impl NoiseParams {
    pub fn new(sigma_n: f64, beta: f64, rate: f64) -> Result<Self> {
        if !(sigma_n > 0.0) {
            return Err(invalid("sigma_n", "shock standard deviation must be positive"));
        }
        if !(beta > 0.0) {
            return Err(invalid("beta", "depth elasticity must be positive"));
        }
        if !(rate >= 0.0) {
            return Err(invalid("rate", "arrival rate must be non-negative"));
        }
        Ok(Self { sigma_n, beta, rate })
    }
}

/// Signed A quantity bought from the pool (positive = buy) for shock `xi`.
pub fn optimal_noise_trade(xi: f64, k: f64, beta: f64, gas: f64) -> f64 {
    let depth = k.powf(beta);
    if 0.5 * depth * xi * xi >= gas {
        depth * xi
    } else {
        0.0
    }
}

/// Expected B-denominated fee flow per arrival.
pub fn expected_noise_fee_rate(q_price: f64, k: f64, beta: f64, sigma_n: f64, gas: f64, gamma: f64) -> f64 {
    let depth = k.powf(beta);
    let threshold = (2.0 * gas / depth).sqrt() / sigma_n;
    q_price * (gamma.exp() - (-gamma).exp()) * depth * sigma_n * normal_pdf(threshold)
}
