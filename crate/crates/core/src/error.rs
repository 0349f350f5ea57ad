use thiserror::Error;

/// Errors surfaced by the orbit engine, the measure and cylinder machinery,
/// and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("value {0} lies outside the unit interval")]
    OutOfRange(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("Gauss map applied to an enclosure containing 0")]
    GaussAtZero,

    #[error("enclosure straddles the boundary near {boundary:.6e}")]
    Straddle { boundary: f64 },

    #[error("precision exhausted after {achieved} of {requested} steps")]
    PrecisionExhausted { achieved: usize, requested: usize },

    #[error("symbol {symbol} is not in the alphabet of {map}")]
    InvalidSymbol { symbol: u64, map: String },

    #[error("pattern of length {pattern} exceeds the {certified} certified digits")]
    PatternTooLong { pattern: usize, certified: usize },

    #[error("{0} is not supported for this map family")]
    Unsupported(String),

    #[error("power iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },

    #[error("enumeration guard: {count} exceeds the cap of {cap}")]
    EnumerationGuard { count: u128, cap: u128 },

    #[error("precision budget of {needed} bits exceeds the cap of {cap} bits; try n <= {suggested_n}")]
    BudgetInfeasible { needed: u64, cap: u64, suggested_n: usize },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidManifest(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
