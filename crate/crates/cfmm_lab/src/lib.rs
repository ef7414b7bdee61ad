//! Constant-product AMM laboratory.
//!
//! Closed-form arbitrage and LP formulas for a fee-extracted constant-product pool,
//! an agent-based market simulator (arbitrage races, overrun flow, noise traders,
//! stochastic volatility with volatility-driven gas), the LP's reduced CRRA
//! objective and its maximizer θ*(v), and the empirical trade-classification pipeline.

pub mod amm_pool;
pub mod arbitrage;
pub mod classifier_stats;
pub mod error;
pub mod jump_returns;
pub mod lp_objective;
pub mod noise;
pub mod numerics;
pub mod price_process;
pub mod race;
pub mod wealth_sim;

pub use amm_pool::{PoolState, Side, SwapResult};
pub use error::{Error, Result};
