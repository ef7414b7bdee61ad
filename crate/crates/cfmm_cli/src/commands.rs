use crate::config::ScenarioConfig;
use crate::csv_io::{
    num, read_prices, read_trades, side_str, trade_cells, Table, GRANGER_HEADER, MARKET_HEADER, THETA_HEADER, TRADES_HEADER,
    WEALTH_HEADER,
};
use crate::error::{CliError, CliResult};
use crate::verify::{run_suite, SUITES};
use cfmm_lab::classifier_stats::{aggregate_windows, asymmetry_report, classify_trade, granger_test, quantile_edges, ClassifiedTrade};
use cfmm_lab::lp_objective::theta_star_curve;
use cfmm_lab::wealth_sim::{simulate_market, simulate_wealth_paths};
use std::path::{Path, PathBuf};

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

// the resolved configuration (after --seed overrides) next to the outputs
fn write_resolved(cfg: &ScenarioConfig, dir: &Path) -> CliResult<()> {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json() + "\n").map_err(|e| CliError::io(&path, e))
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> CliResult<()> {
    prepare_out(out)?;
    write_resolved(cfg, out)?;
    let run = &cfg.run;
    let market = simulate_market(&cfg.market_config(), run.horizon_time, run.step_time, run.seed)?;

    let mut trades = Table::new(&TRADES_HEADER);
    for r in &market.trades {
        trades.row(&trade_cells(r));
    }
    trades.write(&out.join("trades.csv"))?;

    let mut snapshots = Table::new(&MARKET_HEADER);
    for m in &market.market {
        snapshots.row(&[num(m.t), num(m.p), num(m.v), num(m.q_pool), num(m.gas)]);
    }
    snapshots.write(&out.join("market.csv"))?;

    let paths = simulate_wealth_paths(
        run.wealth_theta_wealth_share,
        &cfg.model_params(),
        run.wealth_mode.into(),
        cfg.path_settings(),
        run.wealth_paths,
        run.seed,
    )?;
    let mut wealth = Table::new(&WEALTH_HEADER);
    for (id, path) in paths.iter().enumerate() {
        for (t, w) in path.times.iter().zip(&path.wealth) {
            wealth.row(&[num(*t), id.to_string(), num(*w)]);
        }
    }
    wealth.write(&out.join("wealth.csv"))?;

    println!(
        "simulated {} steps: {} trades, {} races ({} clamped), {} rejected noise orders, LP fee income {}",
        market.market.len(),
        market.trades.len(),
        market.races,
        market.clamp_events,
        market.rejected_noise,
        num(market.lp_fee_income)
    );
    Ok(())
}

pub fn theta_curve(cfg: &ScenarioConfig, out: &Path) -> CliResult<()> {
    prepare_out(out)?;
    write_resolved(cfg, out)?;
    let curve = theta_star_curve(&cfg.run.v_grid.values(), &cfg.model_params())?;
    let mut table = Table::new(&THETA_HEADER);
    for p in &curve.points {
        table.row(&[num(p.v), num(p.theta_star), num(p.phi_star), p.at_boundary.to_string(), p.concavity_holds.to_string()]);
    }
    table.write(&out.join("theta_curve.csv"))?;
    match (curve.segmentation(), curve.unique_interior_argmax()) {
        (None, _) => println!("single grid point: no segmentation claim"),
        (Some(_), Some(i)) => println!(
            "segmentation: {}; unique interior argmax v* = {} (theta* = {})",
            curve.segmentation_label(),
            num(curve.points[i].v),
            num(curve.points[i].theta_star)
        ),
        (Some(_), None) => println!("segmentation: {}; no unique interior argmax", curve.segmentation_label()),
    }
    Ok(())
}

pub fn verify(suite: &str) -> CliResult<()> {
    let checks = run_suite(suite)
        .ok_or_else(|| CliError::Usage(format!("unknown suite `{suite}`; available: {}", SUITES.join(", "))))?;
    let mut failed = 0;
    for c in &checks {
        if !c.pass {
            failed += 1;
        }
        println!(
            "{} {}: measured {} expected {} tol {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            num(c.measured),
            num(c.expected),
            num(c.tolerance)
        );
    }
    println!("{suite}: {}/{} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}

// CEX price in force at time t: the last observation at or before t
fn price_at(prices: &[(f64, f64)], t: f64) -> Option<f64> {
    let idx = prices.partition_point(|(pt, _)| *pt <= t);
    (idx > 0).then(|| prices[idx - 1].1)
}

pub fn classify(cfg: &ScenarioConfig, trades_path: &Path, prices_path: &Path, out: &Path) -> CliResult<()> {
    prepare_out(out)?;
    let trades = read_trades(trades_path)?;
    let prices = read_prices(prices_path)?;
    if let Some(i) = prices.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(CliError::Schema { path: prices_path.to_path_buf(), row: i + 3, message: "times must be non-decreasing".into() });
    }
    let mut classified: Vec<ClassifiedTrade> = Vec::with_capacity(trades.len());
    for (i, r) in trades.iter().enumerate() {
        let row = i + 2;
        let schema = |message: String| CliError::Schema { path: trades_path.to_path_buf(), row, message };
        let p_ref = price_at(&prices, r.t).ok_or_else(|| schema("trade precedes the first price observation".into()))?;
        classified.push(classify_trade(r, p_ref, cfg.run.cex_log_fee, r.gas).map_err(|e| schema(e.to_string()))?);
    }

    let mut table = Table::new(&[&TRADES_HEADER[..], &["label", "reference_price", "margin"]].concat());
    for c in &classified {
        let mut cells = trade_cells(&c.record);
        cells.extend([c.label.as_str().to_string(), num(c.reference_price), num(c.margin)]);
        table.row(&cells);
    }
    table.write(&out.join("classified.csv"))?;

    let windows = aggregate_windows(&classified, &prices, cfg.run.window_time)?;
    let mut table = Table::new(&[
        "start",
        "end",
        "realized_vol",
        "total_volume",
        "unprofitable_volume",
        "buy_profitable",
        "buy_unprofitable",
        "sell_profitable",
        "sell_unprofitable",
        "mean_gas",
    ]);
    for w in &windows {
        table.row(&[
            num(w.start),
            num(w.end),
            num(w.realized_vol),
            num(w.total_volume),
            num(w.unprofitable_volume),
            w.buy_profitable.to_string(),
            w.buy_unprofitable.to_string(),
            w.sell_profitable.to_string(),
            w.sell_unprofitable.to_string(),
            num(w.mean_gas),
        ]);
    }
    table.write(&out.join("windows.csv"))?;

    let mut table = Table::new(&["bucket", "vol_low", "vol_high", "side", "total", "profitable", "rate"]);
    for r in asymmetry_report(&windows, &quantile_edges(&windows, cfg.run.volatility_buckets)) {
        table.row(&[
            r.bucket.to_string(),
            num(r.vol_low),
            num(r.vol_high),
            side_str(r.side).to_string(),
            r.total.to_string(),
            r.profitable.to_string(),
            num(r.rate),
        ]);
    }
    table.write(&out.join("asymmetry.csv"))?;

    let vol: Vec<f64> = windows.iter().map(|w| w.realized_vol).collect();
    let unprofitable: Vec<f64> = windows.iter().map(|w| w.unprofitable_volume).collect();
    let mut table = Table::new(&GRANGER_HEADER);
    for (driver, x, response, y) in [("realized_vol", &vol, "unprofitable_volume", &unprofitable), ("unprofitable_volume", &unprofitable, "realized_vol", &vol)] {
        match granger_test(x, y, cfg.run.granger_max_lag) {
            Ok(lags) => {
                for g in lags {
                    table.row(&[driver.into(), response.into(), g.lag.to_string(), num(g.f_stat), num(g.p_value)]);
                }
            }
            // a constant series has nothing to test; report it and keep the other outputs
            Err(cfmm_lab::Error::RankDeficient) => println!("granger {driver} -> {response}: degenerate series, no test"),
            Err(e) => return Err(e.into()),
        }
    }
    table.write(&out.join("granger.csv"))?;
    println!("classified {} trades into {} windows", classified.len(), windows.len());
    Ok(())
}

/// `--out` wins over the config's output directory.
pub fn output_dir(cfg: &ScenarioConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.output_dir.clone())
}
