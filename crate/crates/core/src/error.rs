use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {value} outside the domain ({requirement})")]
    Domain {
        function: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("binomial C({n}, {k}) overflows the exact representation")]
    Overflow { n: u64, k: i64 },

    #[error("invalid config: field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid demand profile: {0}")]
    InvalidProfile(String),

    #[error("invalid demand vector: {0}")]
    InvalidDemand(String),

    #[error(
        "demand space has {size} vectors, above the enumeration limit of {limit}; \
         use Monte Carlo sampling or raise HETCACHE_MAX_ENUM"
    )]
    EnumerationTooLarge { size: f64, limit: u64 },

    #[error("{what} = {value} is outside the required range [{lo}, {hi}]")]
    Regime {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("cut-set bound is trivial (value {bound}); gap ratio is undefined")]
    TrivialBound { bound: f64 },

    #[error("{parameter} = {value} is not a non-negative integer; nearest feasible {suggestion}")]
    NonIntegerParameter {
        parameter: &'static str,
        value: f64,
        suggestion: String,
    },

    #[error("simulation too large: {0}")]
    SimulationTooLarge(String),

    #[error("file size F = {given} is not divisible by every segment count; minimal valid F is {minimal}")]
    FileSize { given: u64, minimal: u64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
