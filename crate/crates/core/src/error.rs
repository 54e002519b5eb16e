use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("time {t} lies beyond the horizon {horizon} of a non-periodic switching law")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The partial result that triggered the cap is unusable and is not returned.
    #[error("budget exceeded: {what} reached {reached} (cap {cap})")]
    BudgetExceeded {
        what: &'static str,
        reached: usize,
        cap: usize,
    },

    #[error("subgradient requested at the origin")]
    UndefinedSubgradientBase,

    #[error("degenerate unit ball: {0}")]
    DegenerateBall(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid switching law: {0}")]
    InvalidLaw(String),

    #[error("bracket [{lo}, {hi}] does not straddle rho = 1 (rho_lo = {rho_lo}, rho_hi = {rho_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        rho_lo: f64,
        rho_hi: f64,
    },

    #[error("critical eigenvalue {eigenvalue} is not on the -1 branch")]
    WrongBranch { eigenvalue: f64 },

    #[error("inconsistent scan: {0}")]
    InconsistentScan(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}
