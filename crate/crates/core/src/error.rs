use thiserror::Error;

use crate::formats::FormatError;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input was malformed or violated a schema/structural invariant.
    Validation,
    /// The input was well formed but physically or mathematically invalid.
    Domain,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} out of range: got {value}, expected {expected}")]
    Domain {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("pump power {pump} W is not below threshold {threshold} W (above threshold)")]
    AboveThreshold { pump: f64, threshold: f64 },
    #[error("non-physical trace: {0}")]
    NonPhysicalTrace(String),
    #[error("invalid cavity layout: {0}")]
    Layout(String),
    #[error("unstable cavity: stability parameter {stability} outside (0, 1)")]
    Unstable { stability: f64 },
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("fit result is not converged")]
    NotConverged,
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Format(_) | Error::Dataset(_) | Error::Layout(_) => ErrorClass::Validation,
            _ => ErrorClass::Domain,
        }
    }

    pub(crate) fn domain(field: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            field,
            value,
            expected,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
