//! Empirical pipeline: ex-post trade classification, volatility windows,
//! buy/sell asymmetry and Granger-causality F-tests.

use crate::amm_pool::Side;
use crate::error::{invalid, Error, Result};
use crate::numerics::f_sf;
use crate::wealth_sim::TradeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Profitable,
    Unprofitable,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Profitable => "profitable",
            Label::Unprofitable => "unprofitable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedTrade {
    pub record: TradeRecord,
    pub label: Label,
    /// CEX price adjusted by the CEX fee in the direction of the unwinding leg.
    pub reference_price: f64,
    /// Left-hand side of the classification inequality.
    pub margin: f64,
}

/// Profitable iff unwinding on the CEX at the fee-adjusted price beats the AMM execution net of gas.
pub fn classify_trade(rec: &TradeRecord, p_ref: f64, gamma_cex: f64, gas: f64) -> Result<ClassifiedTrade> {
    if rec.delta_a == 0.0 {
        return Err(Error::ZeroSizeTrade);
    }
    if !(p_ref > 0.0) {
        return Err(invalid("p_ref", "reference price must be positive"));
    }
    let q = (rec.delta_b / rec.delta_a).abs();
    let (reference_price, margin) = if rec.delta_a > 0.0 {
        let r = p_ref * gamma_cex.exp();
        (r, rec.delta_a * (q - r) - gas)
    } else {
        let r = p_ref * (-gamma_cex).exp();
        (r, -rec.delta_a * (r - q) - gas)
    };
    let label = if margin > 0.0 { Label::Profitable } else { Label::Unprofitable };
    Ok(ClassifiedTrade { record: *rec, label, reference_price, margin })
}

/// Population standard deviation of log returns over each trailing window of
/// `window` returns; entry i covers returns i..i+window.
pub fn realized_volatility(prices: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(invalid("window", "need at least 2 returns per window"));
    }
    if prices.iter().any(|p| !(*p > 0.0)) {
        return Err(invalid("prices", "prices must be positive"));
    }
    if prices.len() < window + 1 {
        return Err(Error::InsufficientData(format!("{} prices for a window of {window} returns", prices.len())));
    }
    let r: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(r.windows(window).map(population_sd).collect())
}

fn population_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowAggregate {
    pub start: f64,
    pub end: f64,
    pub realized_vol: f64,
    /// Σ|ΔA| over trades in the window.
    pub total_volume: f64,
    pub unprofitable_volume: f64,
    pub buy_profitable: usize,
    pub buy_unprofitable: usize,
    pub sell_profitable: usize,
    pub sell_unprofitable: usize,
    pub mean_gas: f64,
}

impl WindowAggregate {
    pub fn trade_count(&self) -> usize {
        self.buy_profitable + self.buy_unprofitable + self.sell_profitable + self.sell_unprofitable
    }
}

/// Fixed-length windows spanning the price series' time range.
///
/// `prices` are `(t, p)` pairs sorted in time; realized volatility is the population
/// standard deviation of the log returns whose end point falls in the window.
pub fn aggregate_windows(trades: &[ClassifiedTrade], prices: &[(f64, f64)], interval: f64) -> Result<Vec<WindowAggregate>> {
    if !(interval > 0.0) {
        return Err(invalid("interval", "window length must be positive"));
    }
    if let Some(i) = trades.windows(2).position(|w| w[1].record.t < w[0].record.t) {
        return Err(Error::Unsorted(i + 1));
    }
    if let Some(i) = prices.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(Error::Unsorted(i + 1));
    }
    if prices.len() < 2 {
        return Err(Error::InsufficientData("need at least two prices".into()));
    }
    let t0 = prices[0].0;
    let t_end = prices[prices.len() - 1].0;
    let count = (((t_end - t0) / interval).ceil() as usize).max(1);
    let index = |t: f64| (((t - t0) / interval).floor().max(0.0) as usize).min(count - 1);
    let mut windows: Vec<WindowAggregate> = (0..count)
        .map(|i| WindowAggregate {
            start: t0 + i as f64 * interval,
            end: t0 + (i + 1) as f64 * interval,
            ..Default::default()
        })
        .collect();

    let mut returns: Vec<Vec<f64>> = vec![Vec::new(); count];
    for w in prices.windows(2) {
        returns[index(w[1].0)].push((w[1].1 / w[0].1).ln());
    }
    for (agg, r) in windows.iter_mut().zip(&returns) {
        agg.realized_vol = if r.len() >= 2 { population_sd(r) } else { 0.0 };
    }

    let mut gas_sum = vec![0.0; count];
    for tr in trades {
        let i = index(tr.record.t);
        let agg = &mut windows[i];
        let vol = tr.record.delta_a.abs();
        agg.total_volume += vol;
        gas_sum[i] += tr.record.gas;
        let unprofitable = tr.label == Label::Unprofitable;
        if unprofitable {
            agg.unprofitable_volume += vol;
        }
        match (tr.record.side, unprofitable) {
            (Side::Buy, false) => agg.buy_profitable += 1,
            (Side::Buy, true) => agg.buy_unprofitable += 1,
            (Side::Sell, false) => agg.sell_profitable += 1,
            (Side::Sell, true) => agg.sell_unprofitable += 1,
        }
    }
    for (agg, g) in windows.iter_mut().zip(gas_sum) {
        let n = agg.trade_count();
        agg.mean_gas = if n > 0 { g / n as f64 } else { 0.0 };
    }
    Ok(windows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetryRow {
    pub bucket: usize,
    pub vol_low: f64,
    pub vol_high: f64,
    pub side: Side,
    pub total: usize,
    pub profitable: usize,
    pub rate: f64,
}

/// Volatility bucket edges at equally spaced quantiles of the window volatilities.
pub fn quantile_edges(windows: &[WindowAggregate], buckets: usize) -> Vec<f64> {
    let mut vols: Vec<f64> = windows.iter().map(|w| w.realized_vol).collect();
    vols.sort_by(|a, b| a.total_cmp(b));
    if vols.is_empty() || buckets == 0 {
        return vec![];
    }
    (0..=buckets)
        .map(|i| {
            let idx = ((vols.len() - 1) as f64 * i as f64 / buckets as f64).round() as usize;
            vols[idx]
        })
        .collect()
}

/// Profitability rate per (volatility bucket, side); empty cells are omitted.
///
/// Each window is assigned to bucket `i` when `edges[i] ≤ vol < edges[i+1]`
/// (the last bucket is closed).
pub fn asymmetry_report(windows: &[WindowAggregate], edges: &[f64]) -> Vec<AsymmetryRow> {
    let nb = edges.len().saturating_sub(1);
    let mut counts = vec![[(0usize, 0usize); 2]; nb];
    for w in windows {
        let Some(b) = (0..nb).find(|&i| {
            w.realized_vol >= edges[i] && (w.realized_vol < edges[i + 1] || (i + 1 == nb && w.realized_vol <= edges[i + 1]))
        }) else {
            continue;
        };
        counts[b][0].0 += w.buy_profitable + w.buy_unprofitable;
        counts[b][0].1 += w.buy_profitable;
        counts[b][1].0 += w.sell_profitable + w.sell_unprofitable;
        counts[b][1].1 += w.sell_profitable;
    }
    let mut rows = Vec::new();
    for (b, sides) in counts.iter().enumerate() {
        for (s, &(total, profitable)) in sides.iter().enumerate() {
            if total == 0 {
                continue;
            }
            rows.push(AsymmetryRow {
                bucket: b,
                vol_low: edges[b],
                vol_high: edges[b + 1],
                side: if s == 0 { Side::Buy } else { Side::Sell },
                total,
                profitable,
                rate: profitable as f64 / total as f64,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrangerLag {
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
}

/// Residual sum of squares of y on X (rows), with an explicit rank check.
pub fn ols_rss(rows: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let k = rows.first().map_or(0, Vec::len);
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            xty[i] += r[i] * yi;
            for j in 0..=i {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[j][i] = xtx[i][j];
        }
    }
    let beta = solve_spd(xtx, xty)?;
    Ok(rows
        .iter()
        .zip(y)
        .map(|(r, yi)| {
            let fit: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yi - fit) * (yi - fit)
        })
        .sum())
}

// Cholesky solve; a pivot that collapses relative to its diagonal signals rank deficiency.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let diag = a[j][j];
        let mut d = diag;
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 1e-12 * diag.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient);
        }
        let l = d.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / l;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Ok(b)
}

/// Does the history of `x` improve prediction of `y` beyond y's own history?
///
/// For each lag L the same sample t = L..n is used for the restricted
/// (constant + L lags of y) and unrestricted (plus L lags of x) regressions.
pub fn granger_test(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<GrangerLag>> {
    if x.len() != y.len() {
        return Err(invalid("x", "driver and response must have equal length"));
    }
    if max_lag == 0 {
        return Err(invalid("max_lag", "must be at least 1"));
    }
    if x.len() <= 3 * max_lag + 3 {
        return Err(Error::InsufficientData(format!("length {} too short for lag {max_lag}", x.len())));
    }
    (1..=max_lag)
        .map(|lag| {
            let n = x.len();
            let mut restricted = Vec::with_capacity(n - lag);
            let mut unrestricted = Vec::with_capacity(n - lag);
            for t in lag..n {
                let mut r = vec![1.0];
                r.extend((1..=lag).map(|l| y[t - l]));
                let mut u = r.clone();
                u.extend((1..=lag).map(|l| x[t - l]));
                restricted.push(r);
                unrestricted.push(u);
            }
            let target = &y[lag..];
            let rss_r = ols_rss(&restricted, target)?;
            let rss_u = ols_rss(&unrestricted, target)?;
            let df_den = (n - lag) - 2 * lag - 1;
            let f_stat = ((rss_r - rss_u) / lag as f64) / (rss_u / df_den as f64);
            Ok(GrangerLag {
                lag,
                f_stat,
                p_value: f_sf(f_stat, lag as f64, df_den as f64),
                df_num: lag,
                df_den,
            })
        })
        .collect()
}
