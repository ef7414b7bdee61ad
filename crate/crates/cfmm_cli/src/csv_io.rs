//! Fixed CSV schemas. Floats are written with 17 significant digits.

use crate::error::{CliError, CliResult};
use cfmm_lab::amm_pool::Side;
use cfmm_lab::wealth_sim::{TradeRecord, TraderKind};
use std::fmt::Write as _;
use std::path::Path;

pub const TRADES_HEADER: [&str; 9] = ["t", "kind", "side", "delta_a", "delta_b", "fee", "gas", "cex_price", "pnl"];
pub const MARKET_HEADER: [&str; 5] = ["t", "p", "v", "q_pool", "gas"];
pub const WEALTH_HEADER: [&str; 3] = ["t", "path_id", "wealth"];
pub const THETA_HEADER: [&str; 5] = ["v", "theta_star", "phi_star", "at_boundary", "concavity_flag"];
pub const GRANGER_HEADER: [&str; 5] = ["driver", "response", "lag", "F", "p"];

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Accumulates rows in memory and writes the file in one go.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, &self.text).map_err(|e| CliError::io(path, e))
    }
}

pub fn side_str(side: Side) -> &'static str {
    side.as_str()
}

pub fn trade_cells(r: &TradeRecord) -> Vec<String> {
    vec![
        num(r.t),
        r.kind.as_str().to_string(),
        side_str(r.side).to_string(),
        num(r.delta_a),
        num(r.delta_b),
        num(r.fee),
        num(r.gas),
        num(r.cex_price),
        num(r.pnl),
    ]
}

fn reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn schema(path: &Path, row: usize, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.to_path_buf(), row, message: message.into() }
}

fn column_index(path: &Path, headers: &csv::StringRecord, name: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| schema(path, 1, format!("missing column `{name}`")))
}

fn field<'a>(path: &Path, rec: &'a csv::StringRecord, idx: usize, row: usize, name: &str) -> CliResult<&'a str> {
    rec.get(idx).ok_or_else(|| schema(path, row, format!("missing value for `{name}`")))
}

fn float(path: &Path, rec: &csv::StringRecord, idx: usize, row: usize, name: &str) -> CliResult<f64> {
    let s = field(path, rec, idx, row, name)?;
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(path, row, format!("`{name}` is not a finite number: {s:?}")))
}

/// Reads a trades file with exactly the trades schema. Row numbers count the header as row 1.
pub fn read_trades(path: &Path) -> CliResult<Vec<TradeRecord>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| schema(path, 1, e.to_string()))?.clone();
    if headers.iter().ne(TRADES_HEADER.iter().copied()) {
        return Err(schema(path, 1, format!("expected header {}", TRADES_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| schema(path, row, e.to_string()))?;
        let kind_s = field(path, &rec, 1, row, "kind")?;
        let kind = TraderKind::parse(kind_s).ok_or_else(|| schema(path, row, format!("unknown kind {kind_s:?}")))?;
        let side = match field(path, &rec, 2, row, "side")? {
            "buy" => Side::Buy,
            "sell" => Side::Sell,
            other => return Err(schema(path, row, format!("side must be buy or sell, got {other:?}"))),
        };
        out.push(TradeRecord {
            t: float(path, &rec, 0, row, "t")?,
            kind,
            side,
            delta_a: float(path, &rec, 3, row, "delta_a")?,
            delta_b: float(path, &rec, 4, row, "delta_b")?,
            fee: float(path, &rec, 5, row, "fee")?,
            gas: float(path, &rec, 6, row, "gas")?,
            cex_price: float(path, &rec, 7, row, "cex_price")?,
            pnl: float(path, &rec, 8, row, "pnl")?,
            race_id: None,
        });
    }
    Ok(out)
}

/// Reads `(t, p)` from any CSV carrying those two columns (e.g. market.csv).
pub fn read_prices(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| schema(path, 1, e.to_string()))?.clone();
    let (ti, pi) = (column_index(path, &headers, "t")?, column_index(path, &headers, "p")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| schema(path, row, e.to_string()))?;
        let p = float(path, &rec, pi, row, "p")?;
        if !(p > 0.0) {
            return Err(schema(path, row, "price must be positive"));
        }
        out.push((float(path, &rec, ti, row, "t")?, p));
    }
    Ok(out)
}
