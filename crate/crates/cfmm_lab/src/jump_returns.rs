//! Proportional LP wealth change from a correction jump, with and without overrun flow.

use crate::amm_pool::Side;
use crate::error::{Error, Result};

fn check_domain(m: f64, gamma: f64, side: Side) -> Result<()> {
    if !(m > 0.0) || !(gamma >= 0.0) {
        return Err(Error::Domain(format!("need m > 0 and gamma >= 0, got m={m}, gamma={gamma}")));
    }
    // boundary tolerance of a few ulps so that m = e^{±γ} computed in floating point is accepted
    let tol = 4.0 * f64::EPSILON;
    let ok = match side {
        Side::Buy => m.ln() >= gamma - tol,
        Side::Sell => m.ln() <= -gamma + tol,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("m={m} is not beyond the {side} band edge for gamma={gamma}")))
    }
}

fn edge(gamma: f64, side: Side) -> f64 {
    match side {
        Side::Buy => (0.5 * gamma).exp(),
        Side::Sell => (-0.5 * gamma).exp(),
    }
}

/// Return of a pure boundary correction from mispricing ratio `m = P/Q`.
pub fn jump_return(m: f64, gamma: f64, side: Side) -> Result<f64> {
    check_domain(m, gamma, side)?;
    let d = m.sqrt() - edge(gamma, side);
    Ok(-d * d / (m + 1.0))
}

/// Return when overrun flow removes a further fraction `u` of the boundary A reserve
/// (buy side) or adds `u` of it (sell side).
pub fn jump_return_ext(m: f64, u: f64, gamma: f64, side: Side) -> Result<f64> {
    check_domain(m, gamma, side)?;
    check_overrun(u, side)?;
    let e = edge(gamma, side);
    let sm = m.sqrt();
    let flow = match side {
        Side::Buy => u * u / (1.0 - u),
        Side::Sell => u * u / (1.0 + u),
    };
    let d = e - sm;
    Ok((e * sm * flow - d * d) / (m + 1.0))
}

fn check_overrun(u: f64, side: Side) -> Result<()> {
    if !(u >= 0.0) || (side == Side::Buy && u >= 1.0) {
        return Err(Error::Domain(format!("overrun ratio u={u} outside the {side}-side domain")));
    }
    Ok(())
}

/// First and second derivatives of [`jump_return_ext`] in `u`.
pub fn jump_return_ext_derivs(m: f64, u: f64, gamma: f64, side: Side) -> Result<(f64, f64)> {
    check_domain(m, gamma, side)?;
    check_overrun(u, side)?;
    let c = edge(gamma, side) * m.sqrt() / (m + 1.0);
    Ok(match side {
        Side::Buy => {
            let r = 1.0 - u;
            (c * u * (2.0 - u) / (r * r), 2.0 * c / (r * r * r))
        }
        Side::Sell => {
            let r = 1.0 + u;
            (c * u * (2.0 + u) / (r * r), 2.0 * c / (r * r * r))
        }
    })
}
