//! Constant-product pool with fee-extracted accounting.

use crate::error::{invalid, Error, Result};
use std::fmt;

/// Direction from the trader's point of view: `Buy` takes A out of the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapResult {
    pub new_pool: PoolState,
    /// Pool-reserve change in A (negative when the trader buys A).
    pub delta_a: f64,
    pub delta_b_net: f64,
    /// B paid to the LP outside the reserves.
    pub fee_paid_out: f64,
    /// B received (+) or paid (−) by the trader, fee included.
    pub trader_b_flow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mispricing {
    pub ratio: f64,
    pub log_gap: f64,
    pub in_band: bool,
}

impl PoolState {
    pub fn new(reserve_a: f64, reserve_b: f64, gamma: f64) -> Result<Self> {
        if !(reserve_a > 0.0 && reserve_a.is_finite()) {
            return Err(invalid("reserve_a", "must be positive and finite"));
        }
        if !(reserve_b > 0.0 && reserve_b.is_finite()) {
            return Err(invalid("reserve_b", "must be positive and finite"));
        }
        if !(gamma >= 0.0) {
            return Err(invalid("gamma", "log-fee must be non-negative"));
        }
        Ok(Self { reserve_a, reserve_b, gamma })
    }

    /// Pool with invariant `k` priced at `q` (B per A).
    pub fn from_invariant(k: f64, q: f64, gamma: f64) -> Result<Self> {
        Self::new((k / q).sqrt(), (k * q).sqrt(), gamma)
    }

    pub fn invariant(&self) -> f64 {
        self.reserve_a * self.reserve_b
    }

    pub fn price(&self) -> f64 {
        self.reserve_b / self.reserve_a
    }

    pub fn execute_swap(&self, delta_a: f64) -> Result<SwapResult> {
        let new_a = self.reserve_a + delta_a;
        if !(new_a > 0.0) {
            return Err(Error::ReserveExhausted { reserve: self.reserve_a, delta: delta_a });
        }
        let delta_b_net = -delta_a * self.reserve_b / new_a;
        let new_b = self.reserve_b + delta_b_net;
        let (fee, trader_b_flow) = if delta_a < 0.0 {
            let pay = self.gamma.exp() * delta_b_net;
            (pay - delta_b_net, -pay)
        } else {
            let y_tot = -delta_b_net;
            let receive = (-self.gamma).exp() * y_tot;
            (y_tot - receive, receive)
        };
        Ok(SwapResult {
            new_pool: PoolState { reserve_a: new_a, reserve_b: new_b, gamma: self.gamma },
            delta_a,
            delta_b_net,
            fee_paid_out: fee.max(0.0),
            trader_b_flow,
        })
    }

    /// Arbitrage trade that moves the pool price to the fee-adjusted band edge.
    pub fn correct_to_boundary(&self, p: f64, side: Side) -> Result<SwapResult> {
        let q = self.price();
        let (target, ok) = match side {
            Side::Buy => (p * (-self.gamma).exp(), p >= q * self.gamma.exp()),
            Side::Sell => (p * self.gamma.exp(), p <= q * (-self.gamma).exp()),
        };
        if !ok {
            return Err(Error::InsideBand { price: p, pool_price: q });
        }
        // R_A' = sqrt(K/target), written to stay accurate for small gaps
        let delta_a = self.reserve_a * (0.5 * (q / target).ln()).exp_m1();
        self.execute_swap(delta_a)
    }

    pub fn mispricing(&self, p: f64) -> Mispricing {
        let ratio = p / self.price();
        let log_gap = ratio.ln();
        Mispricing { ratio, log_gap, in_band: log_gap.abs() <= self.gamma }
    }

    /// Absolute pool-price move caused by trading `q` units of A.
    pub fn price_impact(&self, q: f64, side: Side) -> Result<f64> {
        let delta_a = match side {
            Side::Buy => -q,
            Side::Sell => q,
        };
        let swap = self.execute_swap(delta_a)?;
        Ok((swap.new_pool.price() - self.price()).abs())
    }
}
