use std::path::PathBuf;

use thiserror::Error;

use crate::model::ConfigIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration:{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero-forcing matrix for set {set:?} is rank deficient (condition estimate {condition:.3e})")]
    Singular { set: Vec<usize>, condition: f64 },

    #[error("SU {user} has zero effective gain, its QoS power is unbounded")]
    InfinitePower { user: usize },

    #[error("operation needs a non-empty user set")]
    EmptySet,

    #[error("{what} is limited to K <= {guard} (got K = {users}); use the Monte Carlo harness for larger K")]
    TooManyUsers { what: &'static str, users: usize, guard: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("trial (location {location}, channel {channel}): {source}")]
    Trial {
        location: u64,
        channel: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the numerical machinery (quadrature, inversion,
    /// singular beamforming) as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Singular { .. } | Error::InfinitePower { .. } => true,
            Error::Trial { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("\n  - {i}")).collect()
}
