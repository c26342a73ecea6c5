use std::fmt;

use thiserror::Error;

/// Pipeline stage, used to tag errors raised by [`crate::higarrote`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Center,
    Hyperfit,
    InitialEstimate,
    Garrote,
    Refit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Center => "center-response",
            Stage::Hyperfit => "fit-hyperparams",
            Stage::InitialEstimate => "initial-estimate",
            Stage::Garrote => "garrote",
            Stage::Refit => "ls-refit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coding for factor `{factor}`: {reason}")]
    InvalidCoding { factor: String, reason: String },

    #[error("invalid factor `{factor}`: {reason}")]
    InvalidFactor { factor: String, reason: String },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("response is constant; there is nothing to select")]
    DegenerateResponse,

    #[error("all initial estimates are zero; there is nothing to shrink")]
    DegenerateEstimate,

    #[error("numerical failure: {reason} (jitter tried up to {jitter:e})")]
    NumericalFailure { reason: String, jitter: f64 },

    #[error("QP did not converge after {iterations} iterations (KKT residual {residual:e})")]
    QpNonconvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("garrote path aborted at M = {m}: {source}")]
    PathAborted {
        m: f64,
        partial: Vec<crate::garrote::PathPoint>,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by malformed input files or configs.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Config(_)
            | Error::InvalidDesign(_)
            | Error::InvalidFactor { .. }
            | Error::InvalidCoding { .. }
            | Error::UnknownDataset(_)
            | Error::Json(_)
            | Error::Io(_) => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
