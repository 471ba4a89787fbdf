use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid interval: lower endpoint {lo} exceeds upper endpoint {hi}")]
    InvalidInterval { lo: String, hi: String },

    #[error("empty compact has no hull")]
    EmptyCompact,

    #[error("malformed digit sequence: {0}")]
    MalformedDigits(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("malformed rational or interval: {0}")]
    MalformedRational(String),

    #[error("X^{level}_{bound} has {cardinality} elements, above the enumeration cap {cap}")]
    CapExceeded {
        level: u8,
        bound: u64,
        cardinality: String,
        cap: u64,
    },

    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    /// A computation ran out of work budget before producing a certificate.
    #[error("budget exhausted: {0}")]
    Budget(String),
}
