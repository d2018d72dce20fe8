use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("unsupported pattern mapping: alphabet size {lambda} with {n_c} subcarriers per group (only lambda = 1 or lambda = n_c)")]
    UnsupportedPatternMapping { lambda: usize, n_c: usize },

    #[error("expected {expected} bits, got {got}")]
    BitLength { expected: usize, got: usize },

    #[error("illegal pre-chirp pattern in group {group}: {reason}")]
    IllegalPattern { group: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("enumeration of 2^{bits} codewords exceeds the cap of 2^{cap_bits}")]
    EnumerationCap { bits: usize, cap_bits: usize },

    #[error("analytic channel requires integer 2N*c1*d, got {value} for delay {delay}")]
    NonIntegerPlacement { value: f64, delay: usize },

    #[error("pair ({j}, {k}) differs in {distance} positions, expected exactly 2")]
    NotHammingTwo { j: usize, k: usize, distance: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
