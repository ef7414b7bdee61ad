//! Informed arbitrageur: optimal swap against the CEX price and gas-gated entry.

use crate::amm_pool::{PoolState, Side};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbHoldings {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbDecision {
    pub delta_a: f64,
    pub expected_profit: f64,
    pub side: Option<Side>,
}

impl ArbDecision {
    pub const ABSTAIN: ArbDecision = ArbDecision { delta_a: 0.0, expected_profit: 0.0, side: None };
}

/// Profit-maximizing pool-reserve change given the trader's holdings.
///
/// Buy side: the unconstrained optimum moves the pool price to `p·e^{−γ}`
/// (marginal cost equals the CEX price); the budget bound spends exactly `b`.
/// Sell side: the optimum moves the pool price to `p·e^{γ}`, capped by `a`.
pub fn optimal_swap(pool: &PoolState, p: f64, holdings: ArbHoldings) -> ArbDecision {
    let (ra, rb, g) = (pool.reserve_a, pool.reserve_b, pool.gamma);
    let k = pool.invariant();
    let q = pool.price();
    let (delta_a, side) = if p > q * g.exp() {
        let unconstrained = (k * g.exp() / p).sqrt() - ra;
        let affordable = -holdings.b * ra / (rb * g.exp() + holdings.b);
        (unconstrained.max(affordable), Side::Buy)
    } else if p < q * (-g).exp() {
        let unconstrained = (k * (-g).exp() / p).sqrt() - ra;
        (unconstrained.min(holdings.a), Side::Sell)
    } else {
        return ArbDecision::ABSTAIN;
    };
    if delta_a == 0.0 {
        return ArbDecision::ABSTAIN;
    }
    match arb_profit(pool, p, delta_a) {
        Ok(profit) => ArbDecision { delta_a, expected_profit: profit, side: Some(side) },
        Err(_) => ArbDecision::ABSTAIN,
    }
}

/// Numéraire profit before gas of changing the pool A reserve by `delta_a`,
/// with the A leg unwound at the CEX price `p`.
pub fn arb_profit(pool: &PoolState, p: f64, delta_a: f64) -> Result<f64> {
    if delta_a == 0.0 {
        return Ok(0.0);
    }
    let swap = pool.execute_swap(delta_a)?;
    Ok(-delta_a * p + swap.trader_b_flow)
}

/// Keep the trade only if it clears the gas cost strictly.
pub fn entry_decision(decision: ArbDecision, gas: f64) -> ArbDecision {
    if decision.side.is_some() && decision.expected_profit - gas > 0.0 {
        decision
    } else {
        ArbDecision::ABSTAIN
    }
}
