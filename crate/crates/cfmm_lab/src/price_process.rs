//! CEX relative-price and variance dynamics.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub mu: f64,
    /// Signed volatility; consumers use `sigma²`.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub mu: f64,
    pub kappa: f64,
    pub v_bar: f64,
    pub xi: f64,
    pub v0: f64,
}

impl HestonParams {
    pub fn new(mu: f64, kappa: f64, v_bar: f64, xi: f64, v0: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa", "mean-reversion speed must be positive"));
        }
        if !(v_bar > 0.0) {
            return Err(invalid("v_bar", "long-run variance must be positive"));
        }
        if !(xi >= 0.0) {
            return Err(invalid("xi", "vol-of-variance must be non-negative"));
        }
        if !(v0 >= 0.0) {
            return Err(invalid("v0", "initial variance must be non-negative"));
        }
        Ok(Self { mu, kappa, v_bar, xi, v0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub p: f64,
    pub v: f64,
    pub t: f64,
}

/// Price of A in units of B when both follow GBMs driven by one Brownian motion.
pub fn reduce_numeraire(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> GbmParams {
    GbmParams {
        mu: mu_a - mu_b + sigma_b * (sigma_b - sigma_a),
        sigma: sigma_a - sigma_b,
    }
}

/// Exact log-normal step; the variance field is set to `sigma²`.
pub fn step_gbm(state: MarketState, params: &GbmParams, dt: f64, z: f64) -> MarketState {
    let s2 = params.sigma * params.sigma;
    MarketState {
        p: state.p * ((params.mu - 0.5 * s2) * dt + params.sigma * dt.sqrt() * z).exp(),
        v: s2,
        t: state.t + dt,
    }
}

/// Full-truncation Euler step with independent price and variance shocks.
pub fn step_heston(
    state: MarketState,
    params: &HestonParams,
    dt: f64,
    z_p: f64,
    z_v: f64,
) -> MarketState {
    let v_pos = state.v.max(0.0);
    let v_next = state.v + params.kappa * (params.v_bar - v_pos) * dt + params.xi * (v_pos * dt).sqrt() * z_v;
    MarketState {
        p: state.p * ((params.mu - 0.5 * v_pos) * dt + (v_pos * dt).sqrt() * z_p).exp(),
        v: v_next.max(0.0),
        t: state.t + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn numeraire_reduction_examples() {
        let same = reduce_numeraire(0.1, 0.3, 0.1, 0.3);
        assert_eq!((same.mu, same.sigma), (0.0, 0.0));
        let r = reduce_numeraire(0.1, 0.3, 0.05, 0.2);
        assert!((r.mu - 0.03).abs() < 1e-15 && (r.sigma - 0.1).abs() < 1e-15);
        let riskless = reduce_numeraire(0.0, 0.4, 0.0, 0.0);
        assert_eq!((riskless.mu, riskless.sigma), (0.0, 0.4));
    }

    #[test]
    fn numeraire_reduction_matches_simulated_ratio() {
        // simulate both assets on a common Brownian path and fit the log ratio
        let (mu_a, s_a, mu_b, s_b) = (0.1, 0.3, 0.05, 0.2);
        let dt: f64 = 1e-3;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let la = (mu_a - 0.5 * s_a * s_a) * dt + s_a * dt.sqrt() * z;
            let lb = (mu_b - 0.5 * s_b * s_b) * dt + s_b * dt.sqrt() * z;
            let r = la - lb;
            sum += r;
            sum2 += r * r;
        }
        let m = sum / n as f64;
        let var = sum2 / n as f64 - m * m;
        let red = reduce_numeraire(mu_a, s_a, mu_b, s_b);
        let s2 = red.sigma * red.sigma;
        assert!((var / dt - s2).abs() < 4.0 * s2 * (2.0 / n as f64).sqrt());
        let implied_mu = m / dt + 0.5 * var / dt;
        let se = (var / n as f64).sqrt() / dt;
        assert!((implied_mu - red.mu).abs() < 4.0 * se, "{implied_mu} vs {}", red.mu);
    }

    #[test]
    fn gbm_step_examples() {
        let s = MarketState { p: 100.0, v: 0.0, t: 0.0 };
        let still = step_gbm(s, &GbmParams { mu: 0.0, sigma: 0.0 }, 0.5, 1.7);
        assert_eq!(still.p, 100.0);
        let grown = step_gbm(s, &GbmParams { mu: 0.05, sigma: 0.0 }, 1.0, -2.0);
        assert!((grown.p - 100.0 * 0.05_f64.exp()).abs() < 1e-12);
        assert_eq!(grown.t, 1.0);
    }

    #[test]
    fn gbm_split_steps_compound() {
        let params = GbmParams { mu: 0.07, sigma: 0.0 };
        let s = MarketState { p: 3.0, v: 0.0, t: 0.0 };
        let once = step_gbm(s, &params, 1.0, 0.0);
        let mut split = s;
        for _ in 0..8 {
            split = step_gbm(split, &params, 0.125, 0.0);
        }
        assert!(((once.p - split.p) / once.p).abs() < 1e-12);
    }

    #[test]
    fn gbm_log_moments() {
        let params = GbmParams { mu: 0.1, sigma: 0.4 };
        let dt = 0.01;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = MarketState { p: 1.0, v: 0.0, t: 0.0 };
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = step_gbm(s, &params, dt, z).p.ln();
            sum += r;
            sum2 += r * r;
        }
        let m = sum / n as f64;
        let var = sum2 / n as f64 - m * m;
        let target_var = 0.16 * dt;
        assert!((m - (0.1 - 0.08) * dt).abs() < 4.0 * (target_var / n as f64).sqrt());
        let var_se = target_var * (2.0 / n as f64).sqrt();
        assert!((var - target_var).abs() < 4.0 * var_se);
    }

    #[test]
    fn heston_step_examples() {
        let params = HestonParams::new(0.0, 2.0, 0.04, 0.5, 0.04).unwrap();
        let at_mean = step_heston(MarketState { p: 1.0, v: 0.04, t: 0.0 }, &params, 0.01, 0.3, 0.0);
        assert!((at_mean.v - 0.04).abs() < 1e-15);
        let from_zero = step_heston(MarketState { p: 1.0, v: 0.0, t: 0.0 }, &params, 0.01, 0.3, -5.0);
        assert!((from_zero.v - 0.0008).abs() < 1e-15);
        assert_eq!(from_zero.p, 1.0);
    }

    #[test]
    fn heston_without_vol_of_var_converges_monotonically() {
        let params = HestonParams::new(0.0, 3.0, 0.09, 0.0, 0.5).unwrap();
        let mut s = MarketState { p: 1.0, v: 0.5, t: 0.0 };
        for _ in 0..5000 {
            let next = step_heston(s, &params, 0.001, 0.0, 1.0);
            assert!(next.v <= s.v && next.v >= params.v_bar);
            s = next;
        }
        assert!((s.v - 0.09).abs() < 1e-5);
    }

    #[test]
    fn heston_ergodic_mean() {
        let params = HestonParams::new(0.0, 5.0, 0.04, 0.3, 0.04).unwrap();
        let dt = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = MarketState { p: 1.0, v: 0.04, t: 0.0 };
        let n = 1_000_000;
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            let zp: f64 = StandardNormal.sample(&mut rng);
            let zv: f64 = StandardNormal.sample(&mut rng);
            s = step_heston(s, &params, dt, zp, zv);
            assert!(s.v >= 0.0 && s.p > 0.0);
            vs.push(s.v);
        }
        // batch-means standard error to account for autocorrelation
        let batches = 100;
        let size = n / batches;
        let means: Vec<f64> = vs.chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let sd = (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        let se = sd / (batches as f64).sqrt();
        // Euler full truncation carries an O(dt) bias; allow it on top of the noise band
        assert!((grand - 0.04).abs() < 3.0 * se + 2e-4, "mean {grand}, se {se}");
    }

    #[test]
    fn heston_rejects_bad_params() {
        assert!(HestonParams::new(0.0, 0.0, 0.04, 0.1, 0.0).is_err());
        assert!(HestonParams::new(0.0, 1.0, -1.0, 0.1, 0.0).is_err());
    }
}
