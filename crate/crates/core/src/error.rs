use std::fmt;

use serde::{Deserialize, Serialize};

/// A single semantic problem found while validating a dataset or scenario.
///
/// `path` is a dotted field path into the offending document, e.g.
/// `csps[2].service_shares.search`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown access ISP `{0}`")]
    UnknownIsp(String),
    #[error("unknown content provider `{0}`")]
    UnknownCsp(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("service `{0}` has no provider and no remainder share; nobody uses it")]
    UnusedService(String),
    #[error("content provider `{csp}` does not offer service `{service}`")]
    ServiceNotOffered { csp: String, service: String },
    #[error("access ISP `{0}` is passive and cannot establish peering")]
    PassiveIsp(String),
    #[error("peering removal between `{isp}` and `{csp}` is not supported")]
    RemovalUnsupported { isp: String, csp: String },
    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),
    #[error("bandwidth price undefined: post traffic {post_gbps} Gbps does not exceed pre traffic {pre_gbps} Gbps")]
    UndefinedPrice { pre_gbps: f64, post_gbps: f64 },
    #[error("invalid dataset: {}", join(.0))]
    InvalidDataset(Vec<Violation>),
    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<Violation>),
    #[error("cannot parse {context} at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown output format `{0}` (expected json, csv or markdown)")]
    UnknownFormat(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Violations carried by validation failures, empty otherwise.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::InvalidDataset(v) | Error::InvalidScenario(v) => v,
            _ => &[],
        }
    }

    /// True for errors caused by bad input documents rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDataset(_)
                | Error::InvalidScenario(_)
                | Error::Parse { .. }
                | Error::UnknownIsp(_)
                | Error::UnknownCsp(_)
                | Error::UnknownService(_)
                | Error::DuplicateId { .. }
                | Error::UnusedService(_)
                | Error::ServiceNotOffered { .. }
                | Error::PassiveIsp(_)
                | Error::RemovalUnsupported { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
