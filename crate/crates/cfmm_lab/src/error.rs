use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("swap would exhaust the A reserve (reserve {reserve}, delta {delta})")]
    ReserveExhausted { reserve: f64, delta: f64 },

    #[error("price {price} is inside the no-arbitrage band around pool price {pool_price}")]
    InsideBand { price: f64, pool_price: f64 },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("allocation {theta} is inadmissible: 1 + theta*J <= 0 at a quadrature node")]
    InadmissibleTheta { theta: f64 },

    #[error("no admissible allocation in [{theta_min}, {theta_max}]")]
    EmptyAdmissibleSet { theta_min: f64, theta_max: f64 },

    #[error("transversality fails: rho - (1-eta)*phi = {gap} <= 0")]
    Transversality { gap: f64 },

    #[error("wealth became non-positive at t = {t}")]
    WealthNonPositive { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("input not sorted by time at index {0}")]
    Unsorted(usize),

    #[error("zero-size trade cannot be classified")]
    ZeroSizeTrade,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
