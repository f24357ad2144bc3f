use std::fmt;

use crate::models::MlpParams;
use crate::variational::GaussianPosterior;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("label alphabet must contain at least 2 labels, got {0}")]
    InvalidAlphabet(usize),

    #[error("domain of size {domain} cannot supply {requested} distinct inputs")]
    DomainExhausted { domain: usize, requested: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transform {transform} is not applicable to {input} inputs")]
    IncompatibleTransform {
        transform: &'static str,
        input: &'static str,
    },

    #[error("hypothesis over domain {hypothesis} does not match dataset domain {dataset}")]
    IncompatibleHypothesis { hypothesis: String, dataset: String },

    #[error("hypothesis family is empty")]
    NoHypothesis,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        last_finite: Box<MlpParams>,
    },

    #[error("posterior optimization diverged at step {step}")]
    PosteriorDiverged {
        step: usize,
        last_finite: Box<GaussianPosterior>,
    },

    #[error("PAC-Bayes bound requires beta > 1/2, got {0}")]
    InvalidBeta(f64),

    #[error("confidence delta must lie in (0, 1], got {0}")]
    InvalidConfidence(f64),

    #[error("trial set is empty")]
    EmptyTrialSet,

    #[error("distance undefined: every replicate diverged")]
    DistanceUndefined,

    #[error("{0}")]
    Parse(ParseError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parse failure in one of the text formats, with 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub format: &'static str,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} line {}: {}", self.format, self.line, self.message)
    }
}

impl Error {
    pub(crate) fn parse(format: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse(ParseError {
            format,
            line,
            message: message.into(),
        })
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
