use thiserror::Error;

use crate::spectral::ModeIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpeError {
    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("operator undefined on mode {mode:?}: zero factor raised to negative power")]
    OperatorDomain { mode: ModeIndex },

    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: u32, right: u32 },

    #[error("field violates a structural constraint at mode {mode:?}: {reason}")]
    InvalidField { mode: ModeIndex, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scheme unstable: {0}")]
    Unstable(String),

    #[error("non-finite state after step {step}")]
    BlowUp { step: usize },

    #[error("empty mode selection: {0}")]
    EmptySelection(String),

    #[error("denominator {value:e} below floor")]
    DegenerateDenominator { value: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpeError {
    fn from(e: std::io::Error) -> Self {
        SpeError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SpeError>;
