//! Arbitrage race: belief-driven entry, a uniformly drawn winner, and overrun flow
//! from the losers executing against the corrected pool.

use crate::amm_pool::{PoolState, Side, SwapResult};
use crate::error::{invalid, Result};
use rand::Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct RaceConfig {
    pub n_potential: usize,
    /// Each agent's belief about the number of competitors (≥ 1).
    pub beliefs: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    /// Multiplies every entrant's submitted quantity.
    pub kappa_bel: f64,
    /// Buy-side overrun cap as a fraction of the boundary A reserve.
    pub u_max: f64,
}

impl RaceConfig {
    pub fn homogeneous(n: usize, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![n as f64; n], beta, gamma, 1.0, 0.99)
    }

    pub fn new(beliefs: Vec<f64>, beta: f64, gamma: f64, kappa_bel: f64, u_max: f64) -> Result<Self> {
        if beliefs.is_empty() {
            return Err(invalid("n_potential", "need at least one potential arbitrageur"));
        }
        if beliefs.iter().any(|b| !(*b >= 1.0)) {
            return Err(invalid("beliefs", "every belief must be at least 1"));
        }
        if !(beta > 0.0) {
            return Err(invalid("beta", "must be positive"));
        }
        if !(kappa_bel > 0.0) {
            return Err(invalid("kappa_bel", "must be positive"));
        }
        if !(u_max > 0.0 && u_max < 1.0) {
            return Err(invalid("u_max", "must lie in (0, 1)"));
        }
        Ok(Self { n_potential: beliefs.len(), beliefs, beta, gamma, kappa_bel, u_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillRole {
    Winner,
    Overrun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceFill {
    pub agent: usize,
    pub role: FillRole,
    pub swap: SwapResult,
    /// Marked at the CEX price, gas deducted.
    pub pnl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceOutcome {
    pub side: Option<Side>,
    pub entered: Vec<usize>,
    pub winner: Option<usize>,
    pub winner_quantity: f64,
    /// Total A executed by overrun entrants.
    pub overrun_volume: f64,
    /// Overrun volume relative to the post-winner A reserve.
    pub overrun_ratio: f64,
    pub clamped: bool,
    pub pnl: Vec<f64>,
    pub fills: Vec<RaceFill>,
    pub pool_after: PoolState,
}

fn fill_pnl(swap: &SwapResult, p: f64, gas: f64) -> f64 {
    -swap.delta_a * p + swap.trader_b_flow - gas
}

/// Resolve one race for spread draw `delta` (price units).
pub fn run_race<R: Rng + ?Sized>(
    delta: f64,
    gas: f64,
    pool: &PoolState,
    p: f64,
    cfg: &RaceConfig,
    rng: &mut R,
) -> Result<RaceOutcome> {
    let depth = pool.invariant().powf(cfg.beta);
    let hurdle = (2.0 * gas / depth).sqrt();
    let entered: Vec<usize> = (0..cfg.n_potential)
        .filter(|&i| delta.abs() >= hurdle * cfg.beliefs[i])
        .collect();
    let mis = pool.mispricing(p);
    let side = if !mis.in_band {
        Some(if mis.log_gap > 0.0 { Side::Buy } else { Side::Sell })
    } else if delta > 0.0 {
        Some(Side::Buy)
    } else if delta < 0.0 {
        Some(Side::Sell)
    } else {
        None
    };
    let mut outcome = RaceOutcome {
        side,
        entered: entered.clone(),
        winner: None,
        winner_quantity: 0.0,
        overrun_volume: 0.0,
        overrun_ratio: 0.0,
        clamped: false,
        pnl: vec![0.0; cfg.n_potential],
        fills: Vec::new(),
        pool_after: *pool,
    };
    let Some(side) = side else { return Ok(outcome) };
    if entered.is_empty() {
        return Ok(outcome);
    }
    let winner = entered[rng.random_range(0..entered.len())];
    outcome.winner = Some(winner);
    let mut current = *pool;
    if mis.in_band {
        outcome.pnl[winner] = -gas;
    } else {
        let swap = current.correct_to_boundary(p, side)?;
        let pnl = fill_pnl(&swap, p, gas);
        outcome.winner_quantity = swap.delta_a.abs();
        outcome.pnl[winner] = pnl;
        outcome.fills.push(RaceFill { agent: winner, role: FillRole::Winner, swap, pnl });
        current = swap.new_pool;
    }

    let orders: Vec<(usize, f64)> = entered
        .iter()
        .filter(|&&i| i != winner)
        .map(|&i| (i, cfg.kappa_bel * depth * delta.abs() / cfg.beliefs[i]))
        .collect();
    let total: f64 = orders.iter().map(|o| o.1).sum();
    let reserve = current.reserve_a;
    let scale = if side == Side::Buy && total >= cfg.u_max * reserve {
        outcome.clamped = true;
        cfg.u_max * reserve / total
    } else {
        1.0
    };
    for (agent, q) in orders {
        let q = q * scale;
        let delta_a = if side == Side::Buy { -q } else { q };
        let swap = current.execute_swap(delta_a)?;
        let pnl = fill_pnl(&swap, p, gas);
        outcome.pnl[agent] = pnl;
        outcome.overrun_volume += q;
        outcome.fills.push(RaceFill { agent, role: FillRole::Overrun, swap, pnl });
        current = swap.new_pool;
    }
    outcome.overrun_ratio = outcome.overrun_volume / reserve;
    outcome.pool_after = current;
    Ok(outcome)
}

/// Expected overrun fraction of the boundary reserve, `sqrt(2/π)·e^{∓γ/2}·K^{β−½}·sqrt(v·p)`.
pub fn expected_overrun_ratio(k: f64, v: f64, p: f64, beta: f64, gamma: f64, side: Side, u_max: f64) -> f64 {
    let c = (2.0 / PI).sqrt()
        * match side {
            Side::Buy => (-0.5 * gamma).exp(),
            Side::Sell => (0.5 * gamma).exp(),
        };
    let u = c * k.powf(beta - 0.5) * (v * p).sqrt();
    match side {
        Side::Buy => u.clamp(0.0, u_max),
        Side::Sell => u.max(0.0),
    }
}
