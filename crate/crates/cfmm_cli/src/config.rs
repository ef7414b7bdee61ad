//! Scenario files: JSON, one unit-bearing key per physical quantity.
//!
//! Time is measured in abstract "time units" (rates are `_per_time`, variances
//! `_per_time` as well); money is in the numéraire asset B.

use crate::error::{CliError, CliResult};
use cfmm_lab::lp_objective::{MarkDistribution, Mode, ModelParams, VolRegime};
use cfmm_lab::wealth_sim::{MarketConfig, PathSettings, RaceSettings};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub model: ModelSection,
    pub volatility: VolatilitySection,
    pub mark: MarkSection,
    pub race: RaceSection,
    pub noise: NoiseSection,
    pub run: RunSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub asset_drift_per_time: f64,
    pub lending_rate_per_time: f64,
    pub risk_aversion: f64,
    pub discount_rate_per_time: f64,
    pub amm_log_fee: f64,
    pub arb_rate_buy_per_time: f64,
    pub arb_rate_sell_per_time: f64,
    pub theta_min_wealth_share: f64,
    pub theta_max_wealth_share: f64,
    pub depth_elasticity: f64,
    /// Pool invariant per squared wealth share: K = this · θ².
    pub pool_scale_numeraire_sq: f64,
    pub gas_base_numeraire: f64,
    pub gas_coeff_numeraire: f64,
    pub gas_variance_power: f64,
    pub overrun_clamp_reserve_fraction: f64,
    pub cex_price_numeraire: f64,
    pub pool_price_numeraire: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilitySection {
    Constant {
        sigma_per_sqrt_time: f64,
    },
    Heston {
        mean_reversion_per_time: f64,
        long_run_variance_per_time: f64,
        vol_of_variance_per_time: f64,
        initial_variance_per_time: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkSection {
    /// Log-overshoot |N(0, multiple · v)|.
    HalfNormal { variance_multiple: f64 },
    /// Exponential log-overshoot with mean `multiple · sqrt(v)`.
    Exponential { mean_multiple_of_sqrt_variance: f64 },
    PointMass { log_overshoot: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceSection {
    pub enabled: bool,
    /// Each potential arbitrageur's believed number of competitors.
    pub believed_competitors: Vec<f64>,
    pub belief_sensitivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub shock_sd: f64,
    pub arrival_rate_per_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Baseline,
    Extended,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Mode {
        match m {
            ModeName::Baseline => Mode::Baseline,
            ModeName::Extended => Mode::Extended,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceGrid {
    Linspace {
        first_variance_per_time: f64,
        last_variance_per_time: f64,
        points: usize,
    },
    ValuesVariancePerTime(Vec<f64>),
}

impl VarianceGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            VarianceGrid::ValuesVariancePerTime(v) => v.clone(),
            VarianceGrid::Linspace { points: 1, first_variance_per_time, .. } => vec![*first_variance_per_time],
            VarianceGrid::Linspace { first_variance_per_time: a, last_variance_per_time: b, points } => {
                let n = *points;
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub horizon_time: f64,
    pub step_time: f64,
    pub initial_price_numeraire: f64,
    pub pool_theta_wealth_share: f64,
    pub wealth_paths: usize,
    pub wealth_theta_wealth_share: f64,
    pub wealth_mode: ModeName,
    pub wealth_sample_every_steps: usize,
    pub v_grid: VarianceGrid,
    pub window_time: f64,
    pub cex_log_fee: f64,
    pub granger_max_lag: usize,
    pub volatility_buckets: usize,
}

// internal parameter name → config key, for error messages
const KEY_NAMES: &[(&str, &str)] = &[
    ("eta", "model.risk_aversion"),
    ("rho", "model.discount_rate_per_time"),
    ("gamma", "model.amm_log_fee"),
    ("lambda_bar", "model.arb_rate_buy_per_time"),
    ("theta_min", "model.theta_min_wealth_share"),
    ("beta", "model.depth_elasticity"),
    ("k_bar", "model.pool_scale_numeraire_sq"),
    ("sigma_n", "noise.shock_sd"),
    ("gas_g0", "model.gas_base_numeraire"),
    ("gas_p", "model.gas_variance_power"),
    ("u_max", "model.overrun_clamp_reserve_fraction"),
    ("cex_price", "model.cex_price_numeraire"),
    ("sigma", "volatility.constant.sigma_per_sqrt_time"),
    ("kappa", "volatility.heston.mean_reversion_per_time"),
    ("v_bar", "volatility.heston.long_run_variance_per_time"),
    ("xi", "volatility.heston.vol_of_variance_per_time"),
    ("v0", "volatility.heston.initial_variance_per_time"),
    ("mark_law", "mark"),
    ("beliefs", "race.believed_competitors"),
    ("n_potential", "race.believed_competitors"),
    ("pool_theta", "run.pool_theta_wealth_share"),
    ("kappa_bel", "race.belief_sensitivity"),
    ("noise_rate", "noise.arrival_rate_per_time"),
    ("initial_price", "run.initial_price_numeraire"),
    ("dt", "run.step_time"),
    ("sample_every", "run.wealth_sample_every_steps"),
];

fn config_key(name: &str) -> &str {
    KEY_NAMES.iter().find(|(n, _)| *n == name).map_or(name, |(_, k)| k)
}

// 1-based line of the first occurrence of the key's last segment, if present
fn line_of(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next()?;
    let needle = format!("\"{leaf}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|(key, reason)| {
            let at = line_of(text, &key).map(|l| format!("line {l}: ")).unwrap_or_default();
            CliError::Config { path: path.to_path_buf(), message: format!("{at}`{key}`: {reason}") }
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), (String, String)> {
        let fail = |key: &str, reason: &str| Err((key.to_string(), reason.to_string()));
        let bad = |e: cfmm_lab::Error| match e {
            cfmm_lab::Error::InvalidParameter { name, reason } => (config_key(name).to_string(), reason),
            other => ("config".to_string(), other.to_string()),
        };
        self.market_config().validate().map_err(bad)?;
        let r = &self.run;
        if !(r.step_time > 0.0) {
            return fail("run.step_time", "must be positive");
        }
        if !(r.horizon_time >= r.step_time) {
            return fail("run.horizon_time", "must cover at least one step");
        }
        if !(r.initial_price_numeraire > 0.0) {
            return fail("run.initial_price_numeraire", "must be positive");
        }
        if !(r.pool_theta_wealth_share > 0.0) {
            return fail("run.pool_theta_wealth_share", "must be positive");
        }
        if !(r.wealth_theta_wealth_share >= 0.0) {
            return fail("run.wealth_theta_wealth_share", "must be non-negative");
        }
        if r.wealth_sample_every_steps == 0 {
            return fail("run.wealth_sample_every_steps", "must be at least 1");
        }
        if !(r.window_time > 0.0) {
            return fail("run.window_time", "must be positive");
        }
        if !(r.cex_log_fee >= 0.0) {
            return fail("run.cex_log_fee", "must be non-negative");
        }
        if r.granger_max_lag == 0 {
            return fail("run.granger_max_lag", "must be at least 1");
        }
        if r.volatility_buckets == 0 {
            return fail("run.volatility_buckets", "must be at least 1");
        }
        if let VarianceGrid::Linspace { points: 0, .. } = r.v_grid {
            return fail("run.v_grid", "needs at least one point");
        }
        let grid = r.v_grid.values();
        if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return fail("run.v_grid", "variances must be positive and strictly increasing");
        }
        if !(self.noise.arrival_rate_per_time >= 0.0) {
            return fail("noise.arrival_rate_per_time", "must be non-negative");
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            mu: m.asset_drift_per_time,
            r_star: m.lending_rate_per_time,
            eta: m.risk_aversion,
            rho: m.discount_rate_per_time,
            gamma: m.amm_log_fee,
            lambda_minus_bar: m.arb_rate_buy_per_time,
            lambda_plus_bar: m.arb_rate_sell_per_time,
            theta_min: m.theta_min_wealth_share,
            theta_max: m.theta_max_wealth_share,
            beta: m.depth_elasticity,
            k_bar: m.pool_scale_numeraire_sq,
            sigma_n: self.noise.shock_sd,
            gas_g0: m.gas_base_numeraire,
            gas_c: m.gas_coeff_numeraire,
            gas_p: m.gas_variance_power,
            volatility: match self.volatility {
                VolatilitySection::Constant { sigma_per_sqrt_time } => VolRegime::Constant { sigma: sigma_per_sqrt_time },
                VolatilitySection::Heston {
                    mean_reversion_per_time,
                    long_run_variance_per_time,
                    vol_of_variance_per_time,
                    initial_variance_per_time,
                } => VolRegime::Heston {
                    kappa: mean_reversion_per_time,
                    v_bar: long_run_variance_per_time,
                    xi: vol_of_variance_per_time,
                    v0: initial_variance_per_time,
                },
            },
            u_max: m.overrun_clamp_reserve_fraction,
            cex_price: m.cex_price_numeraire,
            pool_price: m.pool_price_numeraire,
            mark: match self.mark {
                MarkSection::HalfNormal { variance_multiple } => MarkDistribution::HalfNormal { variance_scale: variance_multiple },
                MarkSection::Exponential { mean_multiple_of_sqrt_variance } => {
                    MarkDistribution::Exponential { mean_scale: mean_multiple_of_sqrt_variance }
                }
                MarkSection::PointMass { log_overshoot } => MarkDistribution::PointMass { overshoot: log_overshoot },
            },
        }
    }

    pub fn market_config(&self) -> MarketConfig {
        MarketConfig {
            params: self.model_params(),
            initial_price: self.run.initial_price_numeraire,
            pool_theta: self.run.pool_theta_wealth_share,
            race: RaceSettings {
                enabled: self.race.enabled,
                beliefs: self.race.believed_competitors.clone(),
                kappa_bel: self.race.belief_sensitivity,
            },
            noise_rate: self.noise.arrival_rate_per_time,
        }
    }

    pub fn path_settings(&self) -> PathSettings {
        PathSettings {
            horizon: self.run.horizon_time,
            dt: self.run.step_time,
            sample_every: self.run.wealth_sample_every_steps,
        }
    }
}
