//! The LP's reduced CRRA drift objective Φ(θ), its derivatives and maximization.

use crate::amm_pool::Side;
use crate::error::{invalid, Error, Result};
use crate::jump_returns::{jump_return, jump_return_ext, jump_return_ext_derivs};
use crate::noise::expected_noise_fee_rate;
use crate::numerics::{gauss_legendre, normal_pdf, normal_sf};
use crate::price_process::HestonParams;
use crate::race::expected_overrun_ratio;
use rayon::prelude::*;
use std::sync::OnceLock;

const QUAD_NODES: usize = 64;
const SCAN_POINTS: usize = 256;
const THETA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Exogenous intensities, no gas, no overrun flow, no noise fees.
    Baseline,
    /// Gas-gated intensities, overrun flow, noise-fee yield, variance `v`.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolRegime {
    Constant { sigma: f64 },
    Heston { kappa: f64, v_bar: f64, xi: f64, v0: f64 },
}

/// Law of the log-overshoot ε ≥ 0 beyond the band edge at a correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkDistribution {
    /// ε ~ |N(0, scale·v)|
    HalfNormal { variance_scale: f64 },
    /// ε ~ Exp with mean `mean_scale·sqrt(v)`
    Exponential { mean_scale: f64 },
    /// ε fixed
    PointMass { overshoot: f64 },
}

impl MarkDistribution {
    /// Quadrature nodes (ε, weight) at variance `v`; weights sum to one.
    pub fn nodes(&self, v: f64) -> Vec<(f64, f64)> {
        let (upper, density): (f64, Box<dyn Fn(f64) -> f64>) = match *self {
            MarkDistribution::PointMass { overshoot } => return vec![(overshoot, 1.0)],
            MarkDistribution::HalfNormal { variance_scale } => {
                let s = (variance_scale * v).sqrt();
                if s == 0.0 {
                    return vec![(0.0, 1.0)];
                }
                (9.0 * s, Box::new(move |e| normal_pdf(e / s)))
            }
            MarkDistribution::Exponential { mean_scale } => {
                let mean = mean_scale * v.sqrt();
                if mean == 0.0 {
                    return vec![(0.0, 1.0)];
                }
                (40.0 * mean, Box::new(move |e| (-e / mean).exp()))
            }
        };
        let (x, w) = legendre();
        let half = 0.5 * upper;
        let mut out: Vec<(f64, f64)> = x
            .iter()
            .zip(w)
            .map(|(xi, wi)| {
                let e = half * (xi + 1.0);
                (e, wi * density(e))
            })
            .collect();
        let total: f64 = out.iter().map(|n| n.1).sum();
        for n in &mut out {
            n.1 /= total;
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarkDistribution::HalfNormal { variance_scale } => variance_scale >= 0.0,
            MarkDistribution::Exponential { mean_scale } => mean_scale >= 0.0,
            MarkDistribution::PointMass { overshoot } => overshoot >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("mark_law", "scale parameters must be non-negative"))
        }
    }
}

fn legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(QUAD_NODES))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub r_star: f64,
    pub eta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub lambda_minus_bar: f64,
    pub lambda_plus_bar: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub beta: f64,
    pub k_bar: f64,
    pub sigma_n: f64,
    pub gas_g0: f64,
    pub gas_c: f64,
    pub gas_p: f64,
    pub volatility: VolRegime,
    pub u_max: f64,
    /// CEX price at which the objective is evaluated.
    pub cex_price: f64,
    /// AMM price used for the noise-fee yield.
    pub pool_price: f64,
    pub mark: MarkDistribution,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(invalid("eta", "risk aversion must be positive"));
        }
        if self.eta == 1.0 {
            return Err(invalid("eta", "log utility (eta = 1) is excluded"));
        }
        if !(self.rho > 0.0) {
            return Err(invalid("rho", "discount rate must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid("gamma", "log-fee must be non-negative"));
        }
        if !(self.lambda_minus_bar >= 0.0 && self.lambda_plus_bar >= 0.0) {
            return Err(invalid("lambda_bar", "intensities must be non-negative"));
        }
        if !(self.theta_min >= 0.0 && self.theta_min <= self.theta_max) {
            return Err(invalid("theta_min", "need 0 <= theta_min <= theta_max"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid("beta", "depth elasticity must be positive"));
        }
        if !(self.k_bar > 0.0) {
            return Err(invalid("k_bar", "pool scale must be positive"));
        }
        if !(self.sigma_n > 0.0) {
            return Err(invalid("sigma_n", "noise shock sd must be positive"));
        }
        if !(self.gas_g0 >= 0.0 && self.gas_c >= 0.0) {
            return Err(invalid("gas_g0", "gas coefficients must be non-negative"));
        }
        if !(self.gas_p >= 1.0) {
            return Err(invalid("gas_p", "gas power must be at least 1"));
        }
        if !(self.u_max > 0.0 && self.u_max < 1.0) {
            return Err(invalid("u_max", "overrun clamp must lie in (0, 1)"));
        }
        if !(self.cex_price > 0.0 && self.pool_price > 0.0) {
            return Err(invalid("cex_price", "prices must be positive"));
        }
        match self.volatility {
            VolRegime::Constant { sigma } if !sigma.is_finite() => {
                return Err(invalid("sigma", "must be finite"));
            }
            VolRegime::Heston { kappa, v_bar, xi, v0 } => {
                HestonParams::new(self.mu, kappa, v_bar, xi, v0)?;
            }
            _ => {}
        }
        self.mark.validate()
    }

    /// Variance used by the baseline objective.
    pub fn baseline_variance(&self) -> f64 {
        match self.volatility {
            VolRegime::Constant { sigma } => sigma * sigma,
            VolRegime::Heston { v_bar, .. } => v_bar,
        }
    }

    pub fn lambda_bar(&self, side: Side) -> f64 {
        match side {
            Side::Buy => self.lambda_minus_bar,
            Side::Sell => self.lambda_plus_bar,
        }
    }

    /// Reports why the gas function violates the hump-shape conditions, if it does.
    pub fn gas_diagnostic(&self) -> Option<String> {
        (self.gas_p == 1.0 && self.gas_g0 == 0.0)
            .then(|| "g(v)/v is constant: the gas-per-variance monotonicity needed for a hump fails".to_string())
    }
}

pub fn gas_fee(v: f64, params: &ModelParams) -> f64 {
    params.gas_g0 + params.gas_c * v.max(0.0).powf(params.gas_p)
}

/// Intensity λ(θ, v) and its first two θ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensity {
    pub lambda: f64,
    pub d_theta: f64,
    pub d_theta2: f64,
    /// Standardized entry hurdle z(θ, v).
    pub z: f64,
}

pub fn lambda_endogenous(theta: f64, v: f64, params: &ModelParams, side: Side) -> Intensity {
    let bar = params.lambda_bar(side);
    let g = gas_fee(v, params);
    if g == 0.0 {
        return Intensity { lambda: bar, d_theta: 0.0, d_theta2: 0.0, z: 0.0 };
    }
    if v <= 0.0 || theta <= 0.0 {
        return Intensity { lambda: 0.0, d_theta: 0.0, d_theta2: 0.0, z: f64::INFINITY };
    }
    let b = params.beta;
    let z = (2.0 * g / (v * (params.k_bar * theta * theta).powf(b))).sqrt();
    let dens = normal_pdf(z);
    Intensity {
        lambda: 2.0 * bar * normal_sf(z),
        d_theta: 2.0 * b * bar * dens * z / theta,
        d_theta2: 2.0 * b * bar * dens * z / (theta * theta) * (b * z * z - (b + 1.0)),
        z,
    }
}

/// Noise-fee yield ψ(θ) on AMM inventory and its θ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseYield {
    pub psi: f64,
    pub d_theta: f64,
    pub d_theta2: f64,
}

pub fn psi_noise_yield(theta: f64, v: f64, p: f64, q_price: f64, params: &ModelParams) -> NoiseYield {
    if theta <= 0.0 {
        return NoiseYield { psi: 0.0, d_theta: 0.0, d_theta2: 0.0 };
    }
    let k = params.k_bar * theta * theta;
    let g = gas_fee(v, params);
    let b = params.beta;
    let fee = expected_noise_fee_rate(q_price, k, b, params.sigma_n, g, params.gamma);
    let value = p * (k / q_price).sqrt() + (k * q_price).sqrt();
    let psi = fee / value;
    let zn2 = 2.0 * g / k.powf(b) / (params.sigma_n * params.sigma_n);
    let a = (2.0 * b - 1.0 + b * zn2) / theta;
    let da = -(2.0 * b * b * zn2) / (theta * theta) - (2.0 * b - 1.0 + b * zn2) / (theta * theta);
    NoiseYield { psi, d_theta: psi * a, d_theta2: psi * (a * a + da) }
}

/// Per-side quadrature functionals at one θ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideTerms {
    pub lambda: f64,
    pub lambda_theta: f64,
    pub lambda_thetatheta: f64,
    pub z: f64,
    pub overrun: f64,
    pub overrun_clamped: bool,
    /// E[(1+θJ)^{1−η} − 1]
    pub g: f64,
    /// E[(J+θJ_θ)(1+θJ)^{−η}]
    pub h: f64,
    /// θ-derivative of `h`
    pub k: f64,
    /// E[(J+θJ_θ)²(1+θJ)^{−η−1}]
    pub a: f64,
    /// E[|2J_θ+θJ_θθ|(1+θJ)^{−η}]
    pub b: f64,
    /// E[|J+θJ_θ|(1+θJ)^{−η}]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub theta: f64,
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub noise: NoiseYield,
    pub buy: SideTerms,
    pub sell: SideTerms,
}

/// Φ at a fixed variance level, with mark-law quadrature precomputed.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    params: &'a ModelParams,
    mode: Mode,
    v: f64,
    nodes: Vec<(f64, f64)>,
}

impl<'a> Objective<'a> {
    pub fn new(params: &'a ModelParams, mode: Mode, v: f64) -> Result<Self> {
        params.validate()?;
        if !(v >= 0.0) {
            return Err(invalid("v", "variance must be non-negative"));
        }
        let var = match mode {
            Mode::Baseline => params.baseline_variance(),
            Mode::Extended => v,
        };
        Ok(Self { params, mode, v: var, nodes: params.mark.nodes(var) })
    }

    pub fn variance(&self) -> f64 {
        self.v
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    fn side_terms(&self, theta: f64, side: Side) -> Result<SideTerms> {
        let p = self.params;
        let eta = p.eta;
        let mut t = SideTerms::default();
        let (u, u1, u2) = match self.mode {
            Mode::Baseline => {
                t.lambda = p.lambda_bar(side);
                (0.0, 0.0, 0.0)
            }
            Mode::Extended => {
                let it = lambda_endogenous(theta, self.v, p, side);
                t.lambda = it.lambda;
                t.lambda_theta = it.d_theta;
                t.lambda_thetatheta = it.d_theta2;
                t.z = it.z;
                let k = p.k_bar * theta * theta;
                let raw = expected_overrun_ratio(k, self.v, p.cex_price, p.beta, p.gamma, side, f64::INFINITY);
                if side == Side::Buy && raw >= p.u_max {
                    t.overrun_clamped = true;
                    (p.u_max, 0.0, 0.0)
                } else {
                    let e = 2.0 * p.beta - 1.0;
                    (raw, e * raw / theta, e * (e - 1.0) * raw / (theta * theta))
                }
            }
        };
        t.overrun = u;
        if t.lambda == 0.0 && t.lambda_theta == 0.0 && t.lambda_thetatheta == 0.0 {
            return Ok(t);
        }
        for &(eps, w) in &self.nodes {
            let m = match side {
                Side::Buy => (p.gamma + eps).exp(),
                Side::Sell => (-p.gamma - eps).exp(),
            };
            let (j, j1, j2) = match self.mode {
                Mode::Baseline => (jump_return(m, p.gamma, side)?, 0.0, 0.0),
                Mode::Extended => {
                    let j = jump_return_ext(m, u, p.gamma, side)?;
                    let (ju, juu) = jump_return_ext_derivs(m, u, p.gamma, side)?;
                    (j, ju * u1, juu * u1 * u1 + ju * u2)
                }
            };
            let tj = theta * j;
            if !(1.0 + tj > 0.0) {
                return Err(Error::InadmissibleTheta { theta });
            }
            let ln_x = tj.ln_1p();
            let x_neg_eta = (-eta * ln_x).exp();
            let x_neg_eta1 = x_neg_eta / (1.0 + tj);
            let s1 = j + theta * j1;
            let s2 = 2.0 * j1 + theta * j2;
            t.g += w * ((1.0 - eta) * ln_x).exp_m1();
            t.h += w * s1 * x_neg_eta;
            t.k += w * (s2 * x_neg_eta - eta * s1 * s1 * x_neg_eta1);
            t.a += w * s1 * s1 * x_neg_eta1;
            t.b += w * s2.abs() * x_neg_eta;
            t.c += w * s1.abs() * x_neg_eta;
        }
        Ok(t)
    }

    pub fn evaluate(&self, theta: f64) -> Result<Evaluation> {
        let p = self.params;
        if self.mode == Mode::Extended && !(theta > 0.0) {
            return Err(invalid("theta", "extended mode needs theta > 0 (pool scale K = k_bar*theta^2)"));
        }
        if !(theta >= 0.0) {
            return Err(invalid("theta", "allocation must be non-negative"));
        }
        let noise = match self.mode {
            Mode::Baseline => NoiseYield { psi: 0.0, d_theta: 0.0, d_theta2: 0.0 },
            Mode::Extended => psi_noise_yield(theta, self.v, p.cex_price, p.pool_price, p),
        };
        let buy = self.side_terms(theta, Side::Buy)?;
        let sell = self.side_terms(theta, Side::Sell)?;
        let inv = 1.0 / (1.0 - p.eta);
        let mut value = p.mu - p.r_star * theta - 0.5 * p.eta * self.v + theta * noise.psi;
        let mut first = -p.r_star + noise.psi + theta * noise.d_theta;
        let mut second = 2.0 * noise.d_theta + theta * noise.d_theta2;
        for s in [&buy, &sell] {
            value += s.lambda * inv * s.g;
            first += s.lambda * s.h + s.lambda_theta * inv * s.g;
            second += s.lambda * s.k + 2.0 * s.lambda_theta * s.h + s.lambda_thetatheta * inv * s.g;
        }
        Ok(Evaluation { theta, value, first, second, noise, buy, sell })
    }

    pub fn value(&self, theta: f64) -> Result<f64> {
        Ok(self.evaluate(theta)?.value)
    }

    pub fn derivative(&self, theta: f64) -> Result<f64> {
        Ok(self.evaluate(theta)?.first)
    }

    pub fn is_admissible(&self, theta: f64) -> bool {
        self.evaluate(theta).is_ok()
    }

    /// Largest admissible allocation in [lo, theta_max], given that `lo` is admissible.
    fn admissible_limit(&self, lo: f64) -> f64 {
        let hi = self.params.theta_max;
        if self.is_admissible(hi) {
            return hi;
        }
        let (mut good, mut bad) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (good + bad);
            if mid <= good || mid >= bad {
                break;
            }
            if self.is_admissible(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }
}

pub fn phi(theta: f64, params: &ModelParams, mode: Mode, v: f64) -> Result<f64> {
    Objective::new(params, mode, v)?.value(theta)
}

pub fn phi_prime(theta: f64, params: &ModelParams, mode: Mode, v: f64) -> Result<f64> {
    Objective::new(params, mode, v)?.derivative(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    /// Root of Φ′ where it changes sign, golden section otherwise.
    DerivativeBisection,
    GoldenSection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptimum {
    pub theta: f64,
    pub phi: f64,
    pub at_boundary: bool,
}

pub fn maximize_theta(params: &ModelParams, mode: Mode, v: f64) -> Result<ThetaOptimum> {
    maximize_theta_with(params, mode, v, SearchMethod::DerivativeBisection)
}

/// Global maximization over the admissible part of [θ_min, θ_max].
///
/// Φ need not be concave (Gaussian-tail intensities and θ^{2β−1} terms are convex),
/// so a uniform scan locates the best cell before local refinement.
pub fn maximize_theta_with(params: &ModelParams, mode: Mode, v: f64, method: SearchMethod) -> Result<ThetaOptimum> {
    let obj = Objective::new(params, mode, v)?;
    let mut lo = params.theta_min;
    if mode == Mode::Extended && lo == 0.0 {
        lo = 1e-9_f64.min(params.theta_max);
    }
    if !obj.is_admissible(lo) {
        return Err(Error::EmptyAdmissibleSet { theta_min: params.theta_min, theta_max: params.theta_max });
    }
    let hi = obj.admissible_limit(lo);
    let f = |t: f64| obj.value(t).unwrap_or(f64::NEG_INFINITY);
    let finish = |theta: f64| -> Result<ThetaOptimum> {
        let at_boundary = (theta - lo).abs() <= 1e-9 || (theta - hi).abs() <= 1e-9;
        Ok(ThetaOptimum { theta, phi: obj.value(theta)?, at_boundary })
    };
    if hi - lo <= THETA_TOL {
        return finish(lo);
    }

    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SCAN_POINTS)];

    let refined = match method {
        SearchMethod::DerivativeBisection => {
            let d = |t: f64| obj.derivative(t).unwrap_or(f64::NAN);
            let (da, db) = (d(a), d(b));
            if da > 0.0 && db < 0.0 {
                bisect_root(d, a, b)
            } else {
                golden_max(&f, a, b)
            }
        }
        SearchMethod::GoldenSection => golden_max(&f, a, b),
    };
    let theta = [refined, lo, hi]
        .into_iter()
        .fold(refined, |acc, t| if f(t) > f(acc) { t } else { acc });
    finish(theta)
}

fn bisect_root(d: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
        if d(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > THETA_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Value-function constant `1/(ρ − (1−η)Φ*)`.
pub fn value_constant(phi_star: f64, params: &ModelParams) -> Result<f64> {
    let gap = params.rho - (1.0 - params.eta) * phi_star;
    if gap > 0.0 {
        Ok(1.0 / gap)
    } else {
        Err(Error::Transversality { gap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityReport {
    pub holds: bool,
    pub strict: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Both sides satisfy z² ≤ 1 + 1/β, so λ_θθ ≤ 0.
    pub active_region: bool,
}

/// Sufficient condition η·Σλ·A > B + N for strict concavity at θ.
pub fn concavity_check(theta: f64, v: f64, params: &ModelParams) -> Result<ConcavityReport> {
    let e = Objective::new(params, Mode::Extended, v)?.evaluate(theta)?;
    Ok(concavity_from(&e, params))
}

fn concavity_from(e: &Evaluation, params: &ModelParams) -> ConcavityReport {
    let inv = 1.0 / (1.0 - params.eta);
    let sides = [&e.buy, &e.sell];
    let lhs: f64 = params.eta * sides.iter().map(|s| s.lambda * s.a).sum::<f64>();
    let b: f64 = sides.iter().map(|s| s.lambda * s.b).sum();
    let n = (2.0 * e.noise.d_theta + e.theta * e.noise.d_theta2).abs()
        + sides.iter().map(|s| 2.0 * s.lambda_theta.abs() * s.c).sum::<f64>()
        + sides.iter().map(|s| (s.lambda_thetatheta * inv).abs() * s.g.abs()).sum::<f64>();
    let bound = 1.0 + 1.0 / params.beta;
    ConcavityReport {
        holds: lhs >= b + n,
        strict: lhs > b + n,
        lhs,
        rhs: b + n,
        active_region: sides.iter().all(|s| s.z * s.z <= bound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub v: f64,
    pub theta_star: f64,
    pub phi_star: f64,
    pub at_boundary: bool,
    pub concavity_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Rise,
    Fall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCurve {
    pub points: Vec<CurvePoint>,
}

impl ThetaCurve {
    /// Monotone segments of θ*(v), ignoring flat stretches; `None` for a single point.
    pub fn segmentation(&self) -> Option<Vec<Trend>> {
        if self.points.len() < 2 {
            return None;
        }
        let mut out: Vec<Trend> = Vec::new();
        for w in self.points.windows(2) {
            let d = w[1].theta_star - w[0].theta_star;
            let trend = if d > 1e-9 {
                Trend::Rise
            } else if d < -1e-9 {
                Trend::Fall
            } else {
                continue;
            };
            if out.last() != Some(&trend) {
                out.push(trend);
            }
        }
        Some(out)
    }

    pub fn segmentation_label(&self) -> String {
        match self.segmentation() {
            None => "none".into(),
            Some(s) if s.is_empty() => "flat".into(),
            Some(s) => s
                .iter()
                .map(|t| match t {
                    Trend::Rise => "rise",
                    Trend::Fall => "fall",
                })
                .collect::<Vec<_>>()
                .join(","),
        }
    }

    /// Index of the largest θ*; `None` on an empty curve.
    pub fn argmax(&self) -> Option<usize> {
        (0..self.points.len()).fold(None, |b: Option<usize>, i| match b {
            Some(j) if self.points[j].theta_star >= self.points[i].theta_star => Some(j),
            _ => Some(i),
        })
    }

    /// The argmax if it is unique (within 1e-9) and not at either end of the grid.
    pub fn unique_interior_argmax(&self) -> Option<usize> {
        let i = self.argmax()?;
        let top = self.points[i].theta_star;
        let ties = self.points.iter().filter(|p| p.theta_star >= top - 1e-9).count();
        (ties == 1 && i > 0 && i + 1 < self.points.len()).then_some(i)
    }
}

/// θ*(v) across a sorted variance grid in extended mode.
pub fn theta_star_curve(v_grid: &[f64], params: &ModelParams) -> Result<ThetaCurve> {
    if v_grid.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("v_grid", "variances must be positive"));
    }
    if let Some(i) = v_grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Unsorted(i + 1));
    }
    let points = v_grid
        .par_iter()
        .map(|&v| {
            let opt = maximize_theta(params, Mode::Extended, v)?;
            let obj = Objective::new(params, Mode::Extended, v)?;
            let e = obj.evaluate(opt.theta)?;
            Ok(CurvePoint {
                v,
                theta_star: opt.theta,
                phi_star: opt.phi,
                at_boundary: opt.at_boundary,
                concavity_holds: concavity_from(&e, params).holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThetaCurve { points })
}

/// Implicit-function slope dθ*/dv = −F_v/F_θ with F = Φ′.
///
/// F_θ is the closed-form Φ″; F_v is a central difference of the closed-form Φ′ in v.
pub fn implicit_slope(theta: f64, v: f64, params: &ModelParams) -> Result<f64> {
    let h = 1e-5 * v.max(1e-3);
    let f_theta = Objective::new(params, Mode::Extended, v)?.evaluate(theta)?.second;
    let up = phi_prime(theta, params, Mode::Extended, v + h)?;
    let down = phi_prime(theta, params, Mode::Extended, v - h)?;
    Ok(-((up - down) / (2.0 * h)) / f_theta)
}

/// The repository's documented hump scenario.
pub fn golden_hump_params() -> ModelParams {
    ModelParams {
        mu: 0.05,
        r_star: 0.02,
        eta: 2.0,
        rho: 0.2,
        gamma: 0.003,
        lambda_minus_bar: 8.0,
        lambda_plus_bar: 8.0,
        theta_min: 0.2,
        theta_max: 1.0,
        beta: 0.75,
        k_bar: 0.9,
        sigma_n: 0.2,
        gas_g0: 0.01,
        gas_c: 0.5,
        gas_p: 2.0,
        volatility: VolRegime::Constant { sigma: 0.2 },
        u_max: 0.99,
        cex_price: 1.1,
        pool_price: 1.1,
        mark: MarkDistribution::HalfNormal { variance_scale: 4.0 },
    }
}

/// Forty evenly spaced variance levels on [0.2, 8].
pub fn golden_hump_grid() -> Vec<f64> {
    (0..40).map(|i| 0.2 + 7.8 * i as f64 / 39.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn baseline() -> ModelParams {
        ModelParams {
            gas_g0: 0.0,
            gas_c: 0.0,
            ..golden_hump_params()
        }
    }

    fn quiet(mut p: ModelParams) -> ModelParams {
        p.lambda_minus_bar = 0.0;
        p.lambda_plus_bar = 0.0;
        p
    }

    #[test]
    fn gas_examples() {
        let mut p = golden_hump_params();
        (p.gas_g0, p.gas_c, p.gas_p) = (0.01, 1.0, 2.0);
        assert_eq!(gas_fee(0.0, &p), 0.01);
        assert!((gas_fee(0.2, &p) - 0.05).abs() < 1e-15);
        // g(v)/v = g0/v + c·v^{p−1} falls until v^p = g0/(c(p−1)), then rises
        let turn = (p.gas_g0 / (p.gas_c * (p.gas_p - 1.0))).powf(1.0 / p.gas_p);
        let ratios: Vec<f64> = (0..200).map(|i| turn + 0.05 * i as f64).map(|v| gas_fee(v, &p) / v).collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
        assert!(gas_fee(0.5 * turn, &p) / (0.5 * turn) > ratios[0]);
        assert!(golden_hump_params().gas_diagnostic().is_none());
        (p.gas_g0, p.gas_p) = (0.0, 1.0);
        assert!(p.gas_diagnostic().is_some());
    }

    #[test]
    fn intensity_examples() {
        let mut p = golden_hump_params();
        (p.lambda_minus_bar, p.gas_g0, p.gas_c, p.k_bar, p.beta) = (10.0, 0.02, 0.0, 1.0, 1.0);
        let it = lambda_endogenous(1.0, 1.0, &p, Side::Buy);
        assert!((it.z - 0.2).abs() < 1e-14);
        assert!((it.lambda - 8.414805).abs() < 1e-6, "{}", it.lambda);
        // independent: tail frequency of |Δ| ≥ hurdle with Δ ~ N(0, v)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400_000;
        let hits = (0..n).filter(|_| {
            let d: f64 = StandardNormal.sample(&mut rng);
            d.abs() >= 0.2
        });
        let freq = hits.count() as f64 / n as f64;
        let se = (freq * (1.0 - freq) / n as f64).sqrt();
        assert!((10.0 * freq - it.lambda).abs() < 3.0 * 10.0 * se);

        p.gas_g0 = 0.0;
        assert_eq!(lambda_endogenous(1.0, 1.0, &p, Side::Buy).lambda, 10.0);
        let mut q = golden_hump_params();
        q.gas_g0 = 0.0;
        assert!(lambda_endogenous(1.0, 1e6, &q, Side::Sell).lambda < 1e-12);
    }

    #[test]
    fn intensity_derivatives_match_differences() {
        let p = golden_hump_params();
        for &v in &[0.3, 1.0, 3.0] {
            for &t in &[0.3, 0.6, 0.95] {
                let h = 1e-5;
                let it = lambda_endogenous(t, v, &p, Side::Buy);
                let up = lambda_endogenous(t + h, v, &p, Side::Buy);
                let dn = lambda_endogenous(t - h, v, &p, Side::Buy);
                assert!((it.d_theta - (up.lambda - dn.lambda) / (2.0 * h)).abs() < 1e-6);
                assert!((it.d_theta2 - (up.d_theta - dn.d_theta) / (2.0 * h)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn second_derivative_vanishes_at_inflection() {
        let mut p = golden_hump_params();
        (p.gas_g0, p.gas_c, p.k_bar) = (0.0, 1.0, 1.0);
        p.gas_p = 1.0;
        let b = p.beta;
        // z² = 2c/θ^{2β} with v cancelling; pick θ so that z² = 1 + 1/β
        let theta = (2.0 / (1.0 + 1.0 / b)).powf(1.0 / (2.0 * b));
        let it = lambda_endogenous(theta, 0.7, &p, Side::Sell);
        assert!((it.z * it.z - (1.0 + 1.0 / b)).abs() < 1e-12);
        assert!(it.d_theta2.abs() < 1e-12 * it.d_theta.abs().max(1.0));
    }

    fn psi_params(beta: f64) -> ModelParams {
        ModelParams {
            k_bar: 1.0,
            beta,
            sigma_n: 1.0,
            gamma: 0.003,
            gas_g0: 0.0,
            gas_c: 0.0,
            ..golden_hump_params()
        }
    }

    #[test]
    fn noise_yield_examples() {
        let p = psi_params(1.0);
        let y = psi_noise_yield(1.0, 1.0, 1.0, 1.0, &p);
        assert!((y.psi - 0.006 * normal_pdf(0.0) / 2.0).abs() < 1e-6);
        assert!((y.psi - 0.0011968).abs() < 1e-7);
        let zero_fee = ModelParams { gamma: 0.0, ..p };
        assert_eq!(psi_noise_yield(1.0, 1.0, 1.0, 1.0, &zero_fee).psi, 0.0);
    }

    #[test]
    fn noise_yield_power_law_at_zero_gas() {
        for &beta in &[0.5, 0.75, 1.0, 1.3] {
            let p = psi_params(beta);
            let xs: Vec<f64> = (0..8).map(|i| (0.2 + 0.1 * i as f64).ln()).collect();
            let ys: Vec<f64> = xs.iter().map(|x| psi_noise_yield(x.exp(), 1.0, 1.0, 1.0, &p).psi.ln()).collect();
            let (slope, _) = crate::numerics::linear_fit(&xs, &ys);
            assert!((slope - (2.0 * beta - 1.0)).abs() < 1e-6, "beta {beta}: {slope}");
        }
    }

    #[test]
    fn noise_yield_derivatives_match_differences() {
        let p = golden_hump_params();
        for &t in &[0.3, 0.7] {
            let h = 1e-5;
            let y = psi_noise_yield(t, 1.5, 1.1, 1.1, &p);
            let up = psi_noise_yield(t + h, 1.5, 1.1, 1.1, &p);
            let dn = psi_noise_yield(t - h, 1.5, 1.1, 1.1, &p);
            assert!((y.d_theta - (up.psi - dn.psi) / (2.0 * h)).abs() < 1e-8 * (1.0 + y.d_theta.abs()) + 1e-9);
            assert!((y.d_theta2 - (up.d_theta - dn.d_theta) / (2.0 * h)).abs() < 1e-6 * (1.0 + y.d_theta2.abs()));
        }
    }

    #[test]
    fn no_jump_reduction() {
        let p = quiet(baseline());
        let s2 = p.baseline_variance();
        for &t in &[0.2, 0.5, 1.0] {
            let want = p.mu - p.r_star * t - 0.5 * p.eta * s2;
            assert_eq!(phi(t, &p, Mode::Baseline, 0.0).unwrap(), want);
            assert_eq!(phi_prime(t, &p, Mode::Baseline, 0.0).unwrap(), -p.r_star);
        }
    }

    #[test]
    fn point_mass_collapses_to_single_evaluation() {
        let p = ModelParams { mark: MarkDistribution::PointMass { overshoot: 0.05 }, ..baseline() };
        let t = 0.6;
        let e = Objective::new(&p, Mode::Baseline, 0.0).unwrap().evaluate(t).unwrap();
        let j = jump_return((p.gamma + 0.05).exp(), p.gamma, Side::Buy).unwrap();
        let want = ((1.0 + t * j).powf(1.0 - p.eta) - 1.0) / (1.0 - p.eta);
        assert!((e.buy.g / (1.0 - p.eta) - want).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_monte_carlo() {
        for mode in [Mode::Baseline, Mode::Extended] {
            let p = golden_hump_params();
            let (t, v) = (0.5, 1.2);
            let obj = Objective::new(&p, mode, v).unwrap();
            let e = obj.evaluate(t).unwrap();
            let s = (4.0 * obj.variance()).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for (side, terms) in [(Side::Buy, e.buy), (Side::Sell, e.sell)] {
                let n = 1_000_000;
                let (mut sum, mut sq) = (0.0, 0.0);
                for _ in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let eps = s * z.abs();
                    let m = match side {
                        Side::Buy => (p.gamma + eps).exp(),
                        Side::Sell => (-p.gamma - eps).exp(),
                    };
                    let j = match mode {
                        Mode::Baseline => jump_return(m, p.gamma, side).unwrap(),
                        Mode::Extended => jump_return_ext(m, terms.overrun, p.gamma, side).unwrap(),
                    };
                    let x = (1.0 + t * j).powf(1.0 - p.eta) - 1.0;
                    sum += x;
                    sq += x * x;
                }
                let mean = sum / n as f64;
                let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
                assert!((terms.g - mean).abs() < 3.0 * se, "{mode:?} {side}: {} vs {mean} ± {se}", terms.g);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = golden_hump_params();
        for mode in [Mode::Baseline, Mode::Extended] {
            for &v in &[0.4, 1.0, 2.5, 6.0] {
                let obj = Objective::new(&p, mode, v).unwrap();
                for &t in &[0.25, 0.5, 0.75, 0.95] {
                    let h = 1e-5;
                    let e = obj.evaluate(t).unwrap();
                    let fd1 = (obj.value(t + h).unwrap() - obj.value(t - h).unwrap()) / (2.0 * h);
                    let fd2 = (obj.derivative(t + h).unwrap() - obj.derivative(t - h).unwrap()) / (2.0 * h);
                    assert!((e.first - fd1).abs() <= 1e-6, "{mode:?} v={v} t={t}: {} vs {fd1}", e.first);
                    assert!((e.second - fd2).abs() <= 1e-5 * (1.0 + fd2.abs()), "{mode:?} v={v} t={t}: {} vs {fd2}", e.second);
                }
            }
        }
    }

    fn random_baseline(rng: &mut ChaCha8Rng) -> ModelParams {
        let theta_min = rng.random_range(0.0..0.5);
        ModelParams {
            mu: rng.random_range(-0.1..0.2),
            r_star: rng.random_range(0.001..0.1),
            eta: if rng.random_bool(0.5) { rng.random_range(0.2..0.9) } else { rng.random_range(1.1..6.0) },
            gamma: rng.random_range(0.0005..0.01),
            lambda_minus_bar: rng.random_range(0.0..50.0),
            lambda_plus_bar: rng.random_range(0.0..50.0),
            theta_min,
            theta_max: (theta_min + rng.random_range(0.1..1.0)).min(1.0),
            volatility: VolRegime::Constant { sigma: rng.random_range(0.05..1.0) },
            mark: MarkDistribution::HalfNormal { variance_scale: rng.random_range(0.5..6.0) },
            ..baseline()
        }
    }

    #[test]
    fn baseline_optimum_is_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..30 {
            let p = random_baseline(&mut rng);
            let opt = maximize_theta(&p, Mode::Baseline, 0.0).unwrap();
            assert_eq!(opt.theta, p.theta_min);
            assert!(opt.at_boundary);
            let obj = Objective::new(&p, Mode::Baseline, 0.0).unwrap();
            for i in 0..10 {
                let t = p.theta_min + (p.theta_max - p.theta_min) * i as f64 / 9.0;
                let e = obj.evaluate(t).unwrap();
                assert!(e.first < -p.r_star);
                if p.lambda_minus_bar + p.lambda_plus_bar > 0.0 {
                    assert!(e.second < 0.0);
                }
            }
        }
    }

    #[test]
    fn search_methods_agree() {
        let p = golden_hump_params();
        for &v in &[0.5, 1.0, 1.2, 2.0, 3.0, 5.0] {
            let a = maximize_theta_with(&p, Mode::Extended, v, SearchMethod::DerivativeBisection).unwrap();
            let b = maximize_theta_with(&p, Mode::Extended, v, SearchMethod::GoldenSection).unwrap();
            assert!((a.theta - b.theta).abs() <= 1e-8, "v={v}: {} vs {}", a.theta, b.theta);
        }
    }

    #[test]
    fn interior_optimum_satisfies_first_order_condition() {
        let p = golden_hump_params();
        let opt = maximize_theta(&p, Mode::Extended, 1.2).unwrap();
        assert!(!opt.at_boundary);
        assert!(phi_prime(opt.theta, &p, Mode::Extended, 1.2).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn value_constant_examples() {
        let p = ModelParams { rho: 0.05, eta: 2.0, ..golden_hump_params() };
        assert!((value_constant(0.03, &p).unwrap() - 12.5).abs() < 1e-12);
        assert!(matches!(value_constant(-0.05, &p), Err(Error::Transversality { .. })));
        for eta in [0.5, 0.9, 1.1, 3.0] {
            let q = ModelParams { eta, rho: 0.5, ..p.clone() };
            let opt = maximize_theta(&q, Mode::Baseline, 0.0).unwrap();
            let c = value_constant(opt.phi, &q).unwrap();
            assert!(c.is_finite() && c > 0.0);
        }
        let log = ModelParams { eta: 1.0, ..p };
        assert!(log.validate().is_err());
    }

    #[test]
    fn concavity_degenerate_case() {
        let p = ModelParams {
            beta: 0.5,
            gas_g0: 0.0,
            gas_c: 0.0,
            ..quiet(golden_hump_params())
        };
        let r = concavity_check(0.5, 1.0, &p).unwrap();
        assert!(r.holds && !r.strict);
        assert!(r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);
        let obj = Objective::new(&p, Mode::Extended, 1.0).unwrap();
        assert!(obj.evaluate(0.5).unwrap().second.abs() < 1e-15);
    }

    #[test]
    fn concavity_at_golden_peak() {
        let p = golden_hump_params();
        let curve = theta_star_curve(&golden_hump_grid(), &p).unwrap();
        let peak = curve.points[curve.unique_interior_argmax().unwrap()];
        let r = concavity_check(peak.theta_star, peak.v, &p).unwrap();
        assert!(r.holds);
        let obj = Objective::new(&p, Mode::Extended, peak.v).unwrap();
        let h = 1e-4;
        let t = peak.theta_star;
        let fd2 = (obj.value(t + h).unwrap() - 2.0 * obj.value(t).unwrap() + obj.value(t - h).unwrap()) / (h * h);
        assert!(fd2 < 0.0);
    }

    #[test]
    fn flat_and_degenerate_curves() {
        let p = ModelParams { gamma: 0.0, ..quiet(golden_hump_params()) };
        let curve = theta_star_curve(&[0.5, 1.0, 2.0, 4.0], &p).unwrap();
        assert!(curve.points.iter().all(|c| c.theta_star == p.theta_min));
        assert_eq!(curve.segmentation_label(), "flat");
        assert!(curve.unique_interior_argmax().is_none());
        let single = theta_star_curve(&[1.0], &golden_hump_params()).unwrap();
        assert_eq!(single.points.len(), 1);
        assert_eq!(single.segmentation(), None);
        assert!(matches!(theta_star_curve(&[2.0, 1.0], &p), Err(Error::Unsorted(1))));
    }

    #[test]
    fn golden_curve() {
        let p = golden_hump_params();
        let curve = theta_star_curve(&golden_hump_grid(), &p).unwrap();
        assert_eq!(curve.segmentation_label(), "rise,fall");
        let i = curve.unique_interior_argmax().unwrap();
        assert!((curve.points[i].v - 1.0).abs() < 1e-12);
        assert!((curve.points[i].theta_star - 0.992368).abs() < 1e-5);
        assert_eq!(curve.points.last().unwrap().theta_star, p.theta_min);
    }

    #[test]
    fn invalid_inputs() {
        let p = golden_hump_params();
        assert!(Objective::new(&p, Mode::Extended, -1.0).is_err());
        assert!(phi(0.0, &p, Mode::Extended, 1.0).is_err());
        let bad = ModelParams { u_max: 1.0, ..p.clone() };
        assert!(bad.validate().is_err());
        let bad = ModelParams { theta_min: 2.0, ..p };
        assert!(bad.validate().is_err());
    }
}
