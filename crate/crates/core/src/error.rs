use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("working precision of {digits} digits is below the minimum of 30")]
    InvalidPrecision { digits: u32 },

    #[error("Beta function is infinite at B({a}, {b})")]
    BetaPole { a: String, b: String },

    #[error("term z^{zpow} (z^4-E)^({qpow2}/2) has no closed-form contour reduction")]
    UnsupportedTerm { zpow: i64, qpow2: i64 },

    #[error("sign violation in {what} at index {index}: value {value}")]
    SignViolation {
        what: &'static str,
        index: usize,
        value: String,
    },

    #[error("inconsistent {what}: {detail}")]
    Inconsistency { what: &'static str, detail: String },

    #[error("{what}: cancellation cost {lost:.1} digits, guard is {guard}")]
    LossOfPrecision {
        what: &'static str,
        lost: f64,
        guard: u32,
    },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("|u| = {modulus} lies outside the convergence domain (margin {margin})")]
    ConvergenceDomain { modulus: f64, margin: f64 },

    #[error("terms still decrease at the last of {len} coefficients; no interior minimum")]
    NoMinimum { len: usize },

    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },

    #[error("matching point x_max = {x_max} is too small: {detail}")]
    XmaxTooSmall { x_max: f64, detail: String },

    #[error("eigenvalue index mismatch: wanted N = {expected}, zero count gives {found}")]
    WrongIndex { expected: usize, found: usize },

    #[error("precision exhausted while solving for N = {n}: {detail}")]
    PrecisionExhausted { n: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: cache metadata mismatch (expected {expected}, found {found})")]
    MetadataMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: checksum mismatch, file is corrupted")]
    Checksum { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_owned(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
