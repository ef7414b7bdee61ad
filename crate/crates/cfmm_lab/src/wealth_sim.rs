//! Monte Carlo LP wealth paths and the agent-based market simulator.

use crate::amm_pool::{PoolState, Side};
use crate::error::{invalid, Error, Result};
use crate::jump_returns::{jump_return, jump_return_ext};
use crate::lp_objective::{gas_fee, lambda_endogenous, psi_noise_yield, MarkDistribution, Mode, ModelParams, VolRegime};
use crate::noise::optimal_noise_trade;
use crate::numerics::linear_fit;
use crate::price_process::{step_gbm, step_heston, GbmParams, HestonParams, MarketState};
use crate::race::{expected_overrun_ratio, run_race, FillRole, RaceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};
use rayon::prelude::*;

/// Independent RNG stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LPPosition {
    pub theta: f64,
    pub wealth: f64,
    pub a_out: f64,
    pub debt: f64,
}

impl LPPosition {
    /// Balance sheet with AMM inventory worth θW at pool price `p`, financed by debt θW.
    pub fn at_allocation(theta: f64, wealth: f64, p: f64) -> Self {
        Self { theta, wealth, a_out: wealth / p, debt: theta * wealth }
    }

    /// `a_out·p + (R_A·p + R_B) − debt` with the AMM leg split evenly at price `p`.
    pub fn marked_wealth(&self, p: f64) -> f64 {
        self.a_out * p + self.theta * self.wealth - self.debt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    pub side: Side,
    pub m: f64,
    pub u: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    /// Cumulative noise-fee income in numéraire.
    pub fee_income: f64,
}

fn draw_overshoot<R: Rng + ?Sized>(mark: &MarkDistribution, v: f64, rng: &mut R) -> f64 {
    match *mark {
        MarkDistribution::PointMass { overshoot } => overshoot,
        MarkDistribution::HalfNormal { variance_scale } => {
            let z: f64 = StandardNormal.sample(rng);
            (variance_scale * v).sqrt() * z.abs()
        }
        MarkDistribution::Exponential { mean_scale } => {
            let mean = mean_scale * v.sqrt();
            if mean > 0.0 {
                Exp::new(1.0 / mean).map(|d| d.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    pub horizon: f64,
    pub dt: f64,
    /// Record wealth every this many steps (t = 0 always recorded).
    pub sample_every: usize,
}

impl PathSettings {
    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(invalid("dt", "time step and horizon must be positive"));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", "must be at least 1"));
        }
        Ok((self.horizon / self.dt).round() as usize)
    }
}

/// One wealth path under a constant allocation θ, starting from unit wealth.
///
/// Coefficients that depend on the price level (overrun ratio, noise yield) are
/// evaluated at `params.cex_price`, the same snapshot used by the objective.
pub fn simulate_wealth_path(
    theta: f64,
    params: &ModelParams,
    mode: Mode,
    settings: PathSettings,
    seed: u64,
    path_index: u64,
) -> Result<WealthPath> {
    params.validate()?;
    let n = settings.steps()?;
    let dt = settings.dt;
    let mut rng = path_rng(seed, path_index);
    let heston = match params.volatility {
        VolRegime::Heston { kappa, v_bar, xi, v0 } if mode == Mode::Extended => {
            Some(HestonParams::new(params.mu, kappa, v_bar, xi, v0)?)
        }
        _ => None,
    };
    let mut v = match (mode, params.volatility) {
        (Mode::Extended, VolRegime::Heston { v0, .. }) => v0,
        _ => params.baseline_variance(),
    };
    let mut log_w = 0.0_f64;
    let mut path = WealthPath { times: vec![0.0], wealth: vec![1.0], jumps: Vec::new(), fee_income: 0.0 };
    for step in 1..=n {
        let t = step as f64 * dt;
        let (drift, psi, lambdas, overruns) = coefficients(theta, v, params, mode);
        let z: f64 = StandardNormal.sample(&mut rng);
        path.fee_income += theta * log_w.exp() * psi * dt;
        log_w += (drift - 0.5 * v) * dt + (v * dt).sqrt() * z;
        for (i, side) in [Side::Buy, Side::Sell].into_iter().enumerate() {
            let rate = lambdas[i] * dt;
            if rate <= 0.0 {
                continue;
            }
            let count = Poisson::new(rate).map(|d| d.sample(&mut rng)).unwrap_or(0.0) as usize;
            for _ in 0..count {
                let eps = draw_overshoot(&params.mark, v, &mut rng);
                let m = match side {
                    Side::Buy => (params.gamma + eps).exp(),
                    Side::Sell => (-params.gamma - eps).exp(),
                };
                let j = match mode {
                    Mode::Baseline => jump_return(m, params.gamma, side)?,
                    Mode::Extended => jump_return_ext(m, overruns[i], params.gamma, side)?,
                };
                if !(1.0 + theta * j > 0.0) {
                    return Err(Error::WealthNonPositive { t });
                }
                log_w += (theta * j).ln_1p();
                path.jumps.push(JumpEvent { t, side, m, u: overruns[i], j });
            }
        }
        if let Some(h) = &heston {
            let zv: f64 = StandardNormal.sample(&mut rng);
            v = step_heston(MarketState { p: 1.0, v, t }, h, dt, 0.0, zv).v;
        }
        if step % settings.sample_every == 0 || step == n {
            path.times.push(t);
            path.wealth.push(log_w.exp());
        }
    }
    Ok(path)
}

fn coefficients(theta: f64, v: f64, params: &ModelParams, mode: Mode) -> (f64, f64, [f64; 2], [f64; 2]) {
    let base = params.mu - params.r_star * theta;
    match mode {
        Mode::Baseline => (base, 0.0, [params.lambda_minus_bar, params.lambda_plus_bar], [0.0; 2]),
        Mode::Extended => {
            let psi = psi_noise_yield(theta, v, params.cex_price, params.pool_price, params).psi;
            let k = params.k_bar * theta * theta;
            let mut lambdas = [0.0; 2];
            let mut overruns = [0.0; 2];
            for (i, side) in [Side::Buy, Side::Sell].into_iter().enumerate() {
                lambdas[i] = lambda_endogenous(theta, v, params, side).lambda;
                overruns[i] = expected_overrun_ratio(k, v, params.cex_price, params.beta, params.gamma, side, params.u_max);
            }
            (base + theta * psi, psi, lambdas, overruns)
        }
    }
}

/// Independent paths in parallel; output ordered by path index.
pub fn simulate_wealth_paths(
    theta: f64,
    params: &ModelParams,
    mode: Mode,
    settings: PathSettings,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<WealthPath>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_wealth_path(theta, params, mode, settings, seed, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub slope: f64,
    pub std_error: f64,
}

const JACKKNIFE_GROUPS: usize = 20;

/// Growth rate of `E[(W_t/W_0)^{1−η}]`: OLS slope of its log on t, jackknife standard error.
pub fn estimate_growth_rate(paths: &[WealthPath], eta: f64) -> Result<GrowthEstimate> {
    if paths.len() < 100 {
        return Err(Error::InsufficientData(format!("need at least 100 paths, got {}", paths.len())));
    }
    let times = &paths[0].times;
    if times.len() < 2 || times.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::InsufficientData("need at least two distinct sample times".into()));
    }
    if paths.iter().any(|p| p.times.len() != times.len()) {
        return Err(Error::InsufficientData("paths have different sampling grids".into()));
    }
    if paths.iter().flat_map(|p| &p.wealth).any(|w| !(*w > 0.0)) {
        return Err(Error::WealthNonPositive { t: f64::NAN });
    }
    let e = 1.0 - eta;
    let slope_of = |skip: Option<usize>| -> f64 {
        let mut sums = vec![0.0; times.len()];
        let mut count = 0usize;
        for (i, p) in paths.iter().enumerate() {
            if skip == Some(i % JACKKNIFE_GROUPS) {
                continue;
            }
            count += 1;
            for (s, w) in sums.iter_mut().zip(&p.wealth) {
                *s += (w / p.wealth[0]).powf(e);
            }
        }
        let y: Vec<f64> = sums.iter().map(|s| (s / count as f64).ln()).collect();
        linear_fit(times, &y).0
    };
    let slope = slope_of(None);
    let partial: Vec<f64> = (0..JACKKNIFE_GROUPS).map(|g| slope_of(Some(g))).collect();
    let mean = partial.iter().sum::<f64>() / JACKKNIFE_GROUPS as f64;
    let g = JACKKNIFE_GROUPS as f64;
    let var = (g - 1.0) / g * partial.iter().map(|s| (s - mean).powi(2)).sum::<f64>();
    Ok(GrowthEstimate { slope, std_error: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraderKind {
    ArbWinner,
    ArbOverrun,
    Noise,
}

impl TraderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraderKind::ArbWinner => "arb_winner",
            TraderKind::ArbOverrun => "arb_overrun",
            TraderKind::Noise => "noise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "arb_winner" => Some(TraderKind::ArbWinner),
            "arb_overrun" => Some(TraderKind::ArbOverrun),
            "noise" => Some(TraderKind::Noise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    pub t: f64,
    pub kind: TraderKind,
    pub side: Side,
    /// Pool A reserve change.
    pub delta_a: f64,
    /// B change on the pool-and-LP side (the trader's flow, negated; fee included).
    pub delta_b: f64,
    pub fee: f64,
    pub gas: f64,
    pub cex_price: f64,
    pub pnl: f64,
    pub race_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSnapshot {
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub q_pool: f64,
    pub gas: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceSettings {
    pub enabled: bool,
    pub beliefs: Vec<f64>,
    pub kappa_bel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub params: ModelParams,
    pub initial_price: f64,
    /// Pool invariant is `k_bar·pool_theta²`.
    pub pool_theta: f64,
    pub race: RaceSettings,
    /// Noise arrivals per unit time.
    pub noise_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRun {
    pub trades: Vec<TradeRecord>,
    pub market: Vec<MarketSnapshot>,
    pub pools: Vec<PoolState>,
    pub lp_fee_income: f64,
    pub races: u64,
    pub clamp_events: u64,
    /// Noise orders larger than the pool's reserve of the requested asset; they revert.
    pub rejected_noise: u64,
}

/// Agent-based market: CEX price/variance, gas, arbitrage races and noise flow.
///
/// Per step: advance (P, v); gas g(v); if the pool is out of band an arbitrage block
/// arrives with probability `1 − e^{−λ̄·dt}` and a race is run on a spread draw
/// Δ ~ N(0, v); then Poisson noise arrivals trade against the live pool.
impl MarketConfig {
    /// Race participants actually simulated: only the first belief when races are disabled.
    pub fn race_config(&self) -> Result<RaceConfig> {
        let p = &self.params;
        let beliefs = if self.race.enabled { self.race.beliefs.clone() } else { self.race.beliefs.iter().take(1).copied().collect() };
        RaceConfig::new(beliefs, p.beta, p.gamma, self.race.kappa_bel, p.u_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.initial_price > 0.0) {
            return Err(invalid("initial_price", "must be positive"));
        }
        if !(self.pool_theta > 0.0) {
            return Err(invalid("pool_theta", "pool scale must be positive"));
        }
        if !(self.noise_rate >= 0.0) {
            return Err(invalid("noise_rate", "must be non-negative"));
        }
        self.race_config().map(|_| ())
    }
}

pub fn simulate_market(cfg: &MarketConfig, horizon: f64, dt: f64, seed: u64) -> Result<MarketRun> {
    let params = &cfg.params;
    cfg.validate()?;
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(invalid("dt", "time step and horizon must be positive"));
    }
    let race_cfg = cfg.race_config()?;
    let n = (horizon / dt).round() as usize;
    let mut rng = path_rng(seed, 0);
    let noise_shock = Normal::new(0.0, params.sigma_n).map_err(|e| invalid("sigma_n", e.to_string()))?;
    let noise_count = if cfg.noise_rate > 0.0 { Poisson::new(cfg.noise_rate * dt).ok() } else { None };

    let k = params.k_bar * cfg.pool_theta * cfg.pool_theta;
    let mut pool = PoolState::from_invariant(k, cfg.initial_price, params.gamma)?;
    let (mut state, heston, gbm) = match params.volatility {
        VolRegime::Constant { sigma } => (
            MarketState { p: cfg.initial_price, v: sigma * sigma, t: 0.0 },
            None,
            Some(GbmParams { mu: params.mu, sigma }),
        ),
        VolRegime::Heston { kappa, v_bar, xi, v0 } => (
            MarketState { p: cfg.initial_price, v: v0, t: 0.0 },
            Some(HestonParams::new(params.mu, kappa, v_bar, xi, v0)?),
            None,
        ),
    };
    let mut run = MarketRun {
        trades: Vec::new(),
        market: Vec::with_capacity(n),
        pools: Vec::with_capacity(n),
        lp_fee_income: 0.0,
        races: 0,
        clamp_events: 0,
        rejected_noise: 0,
    };

    for _ in 0..n {
        let zp: f64 = StandardNormal.sample(&mut rng);
        state = match (&heston, &gbm) {
            (Some(h), _) => {
                let zv: f64 = StandardNormal.sample(&mut rng);
                step_heston(state, h, dt, zp, zv)
            }
            (None, Some(g)) => step_gbm(state, g, dt, zp),
            (None, None) => unreachable!("volatility regime is always set"),
        };
        let (t, p, v) = (state.t, state.p, state.v);
        let gas = gas_fee(v, params);

        let mis = pool.mispricing(p);
        if !mis.in_band {
            let bar = if mis.log_gap > 0.0 { params.lambda_minus_bar } else { params.lambda_plus_bar };
            let arrives = bar > 0.0 && rng.random::<f64>() < 1.0 - (-bar * dt).exp();
            if arrives {
                let z: f64 = StandardNormal.sample(&mut rng);
                let delta = v.sqrt() * z;
                let outcome = run_race(delta, gas, &pool, p, &race_cfg, &mut rng)?;
                if !outcome.fills.is_empty() {
                    let id = run.races;
                    run.races += 1;
                    if outcome.clamped {
                        run.clamp_events += 1;
                    }
                    let side = outcome.side.unwrap_or(Side::Buy);
                    for fill in &outcome.fills {
                        run.lp_fee_income += fill.swap.fee_paid_out;
                        run.trades.push(TradeRecord {
                            t,
                            kind: match fill.role {
                                FillRole::Winner => TraderKind::ArbWinner,
                                FillRole::Overrun => TraderKind::ArbOverrun,
                            },
                            side,
                            delta_a: fill.swap.delta_a,
                            delta_b: -fill.swap.trader_b_flow,
                            fee: fill.swap.fee_paid_out,
                            gas,
                            cex_price: p,
                            pnl: fill.pnl,
                            race_id: Some(id),
                        });
                    }
                    pool = outcome.pool_after;
                }
            }
        }

        let arrivals = noise_count.as_ref().map(|d| d.sample(&mut rng) as usize).unwrap_or(0);
        for _ in 0..arrivals {
            let xi = noise_shock.sample(&mut rng);
            let q = optimal_noise_trade(xi, pool.invariant(), params.beta, gas);
            if q == 0.0 {
                continue;
            }
            let swap = match pool.execute_swap(-q) {
                Ok(s) => s,
                Err(Error::ReserveExhausted { .. }) => {
                    run.rejected_noise += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            run.lp_fee_income += swap.fee_paid_out;
            run.trades.push(TradeRecord {
                t,
                kind: TraderKind::Noise,
                side: if q > 0.0 { Side::Buy } else { Side::Sell },
                delta_a: swap.delta_a,
                delta_b: -swap.trader_b_flow,
                fee: swap.fee_paid_out,
                gas,
                cex_price: p,
                pnl: -swap.delta_a * p + swap.trader_b_flow - gas,
                race_id: None,
            });
            pool = swap.new_pool;
        }

        run.market.push(MarketSnapshot { t, p, v, q_pool: pool.price(), gas });
        run.pools.push(pool);
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_objective::{phi, Objective};

    fn base_params() -> ModelParams {
        ModelParams {
            mu: 0.06,
            r_star: 0.02,
            eta: 2.0,
            rho: 0.2,
            gamma: 0.003,
            lambda_minus_bar: 3.0,
            lambda_plus_bar: 3.0,
            theta_min: 0.0,
            theta_max: 1.0,
            beta: 0.75,
            k_bar: 1.0,
            sigma_n: 0.3,
            gas_g0: 0.01,
            gas_c: 0.5,
            gas_p: 2.0,
            volatility: VolRegime::Constant { sigma: 0.3 },
            u_max: 0.99,
            cex_price: 1.0,
            pool_price: 1.0,
            mark: MarkDistribution::HalfNormal { variance_scale: 1.0 },
        }
    }

    const SETTINGS: PathSettings = PathSettings { horizon: 1.0, dt: 1e-3, sample_every: 100 };

    #[test]
    fn pure_gbm_wealth_moments() {
        let mut p = base_params();
        p.lambda_minus_bar = 0.0;
        p.lambda_plus_bar = 0.0;
        let paths = simulate_wealth_paths(0.0, &p, Mode::Baseline, SETTINGS, 4000, 7).unwrap();
        let logs: Vec<f64> = paths.iter().map(|p| p.wealth.last().unwrap().ln()).collect();
        let n = logs.len() as f64;
        let m = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((m - (0.06 - 0.045)).abs() < 4.0 * (0.09 / n).sqrt());
        assert!((var - 0.09).abs() < 4.0 * 0.09 * (2.0 / n).sqrt());
        assert!(paths.iter().all(|p| p.jumps.is_empty()));
    }

    #[test]
    fn baseline_jumps_are_losses() {
        let p = base_params();
        let path = simulate_wealth_path(0.5, &p, Mode::Baseline, SETTINGS, 3, 0).unwrap();
        assert!(!path.jumps.is_empty());
        assert!(path.jumps.iter().all(|j| j.j <= 0.0));
    }

    #[test]
    fn paths_are_deterministic_and_independent_of_scheduling() {
        let p = base_params();
        let a = simulate_wealth_paths(0.4, &p, Mode::Extended, SETTINGS, 16, 99).unwrap();
        let b: Vec<WealthPath> = (0..16).map(|i| simulate_wealth_path(0.4, &p, Mode::Extended, SETTINGS, 99, i).unwrap()).collect();
        assert_eq!(a, b);
        assert_ne!(a[0].wealth, a[1].wealth);
    }

    #[test]
    fn growth_rate_of_deterministic_wealth() {
        let g = 0.07;
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let path = WealthPath { wealth: times.iter().map(|t| (g * t).exp()).collect(), times, jumps: vec![], fee_income: 0.0 };
        let est = estimate_growth_rate(&vec![path; 100], 3.0).unwrap();
        assert!((est.slope - (1.0 - 3.0) * g).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn growth_rate_rejects_degenerate_input() {
        let path = WealthPath { times: vec![0.0], wealth: vec![1.0], jumps: vec![], fee_income: 0.0 };
        assert!(estimate_growth_rate(&vec![path.clone(); 100], 2.0).is_err());
        assert!(estimate_growth_rate(&vec![path; 10], 2.0).is_err());
    }

    #[test]
    fn baseline_growth_matches_objective() {
        let p = base_params();
        let theta = 0.0;
        let paths = simulate_wealth_paths(theta, &p, Mode::Baseline, SETTINGS, 4000, 5).unwrap();
        let est = estimate_growth_rate(&paths, p.eta).unwrap();
        let target = (1.0 - p.eta) * phi(theta, &p, Mode::Baseline, 0.0).unwrap();
        assert!((est.slope - target).abs() < 2.0 * est.std_error + 1e-3, "{est:?} vs {target}");
    }

    #[test]
    fn growth_sign_follows_risk_aversion() {
        let mut p = base_params();
        p.mu = 0.15;
        p.volatility = VolRegime::Constant { sigma: 0.1 };
        for eta in [0.5, 3.0] {
            p.eta = eta;
            let phi_val = Objective::new(&p, Mode::Baseline, 0.0).unwrap().value(0.3).unwrap();
            let paths = simulate_wealth_paths(0.3, &p, Mode::Baseline, SETTINGS, 2000, 8).unwrap();
            let est = estimate_growth_rate(&paths, eta).unwrap();
            assert_eq!(est.slope.signum(), ((1.0 - eta) * phi_val).signum());
        }
    }

    #[test]
    fn fee_income_accrues_in_extended_mode() {
        let p = base_params();
        let path = simulate_wealth_path(0.5, &p, Mode::Extended, SETTINGS, 1, 0).unwrap();
        assert!(path.fee_income > 0.0);
    }

    #[test]
    fn balance_sheet_identity() {
        let pos = LPPosition::at_allocation(0.4, 10.0, 2.5);
        assert!((pos.marked_wealth(2.5) - 10.0).abs() < 1e-12);
    }

    fn market_config(enabled: bool) -> MarketConfig {
        let mut params = base_params();
        params.volatility = VolRegime::Heston { kappa: 2.0, v_bar: 0.3, xi: 0.5, v0: 0.3 };
        params.lambda_minus_bar = 200.0;
        params.lambda_plus_bar = 200.0;
        params.gas_g0 = 1e-4;
        params.gas_c = 1e-3;
        params.sigma_n = 0.02;
        MarketConfig {
            params,
            initial_price: 1.0,
            pool_theta: 1.0,
            race: RaceSettings { enabled, beliefs: vec![4.0; 4], kappa_bel: 1.0 },
            noise_rate: 100.0,
        }
    }

    #[test]
    fn market_without_flow_is_empty() {
        let mut cfg = market_config(true);
        cfg.params.lambda_minus_bar = 0.0;
        cfg.params.lambda_plus_bar = 0.0;
        cfg.noise_rate = 0.0;
        let run = simulate_market(&cfg, 0.5, 1e-3, 1).unwrap();
        assert!(run.trades.is_empty());
        assert_eq!(run.market.len(), 500);
    }

    #[test]
    fn market_run_accounting() {
        let cfg = market_config(true);
        let run = simulate_market(&cfg, 1.0, 1e-3, 2).unwrap();
        let again = simulate_market(&cfg, 1.0, 1e-3, 2).unwrap();
        assert_eq!(run, again);
        assert!(run.trades.iter().any(|t| t.kind == TraderKind::ArbOverrun));

        let fees: f64 = run.trades.iter().map(|t| t.fee).sum();
        assert!(((fees - run.lp_fee_income) / run.lp_fee_income).abs() < 1e-9);

        let k0 = cfg.params.k_bar;
        for pool in &run.pools {
            assert!(((pool.invariant() - k0) / k0).abs() < 1e-9);
        }

        // overrun executions lose relative to the winner of their race
        let mut by_race: std::collections::BTreeMap<u64, Vec<&TradeRecord>> = Default::default();
        for t in run.trades.iter().filter(|t| t.race_id.is_some()) {
            by_race.entry(t.race_id.unwrap()).or_default().push(t);
        }
        for fills in by_race.values() {
            let winner = fills.iter().find(|t| t.kind == TraderKind::ArbWinner).unwrap();
            for f in fills.iter().filter(|t| t.kind == TraderKind::ArbOverrun) {
                assert!(f.pnl < winner.pnl);
                assert!(f.pnl < 0.0);
            }
        }

        // stream is ordered in time
        assert!(run.trades.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn disabled_races_have_no_overrun() {
        let run = simulate_market(&market_config(false), 1.0, 1e-3, 3).unwrap();
        assert!(run.trades.iter().any(|t| t.kind == TraderKind::ArbWinner));
        assert!(run.trades.iter().all(|t| t.kind != TraderKind::ArbOverrun));
    }
}
