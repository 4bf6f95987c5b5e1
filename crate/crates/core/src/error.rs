use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("relative speed is zero; t_m and d_m are undefined")]
    ZeroRelativeSpeed,

    #[error("no collision: d_m = {d_m} m, t_m = {t_m} s, contact distance = {contact} m")]
    NoCollision { d_m: f64, t_m: f64, contact: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("parameters are not identifiable (condition number {0:e})")]
    NonIdentifiable(f64),

    #[error("pair is not approaching (quadratic coefficient {0:e} <= 0)")]
    NonApproaching(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("anchors are collinear or coincident")]
    SingularGeometry,

    #[error("no feasible non-negative root for the reference distance")]
    NoFeasibleRoot,

    #[error("cost increased from {before:e} to {after:e} during a descent sweep")]
    DivergenceDetected { before: f64, after: f64 },

    #[error("missing timestamp: node {node} has no {kind} stamp for transmitter {from} in cycle {cycle}")]
    MissingStamp {
        cycle: usize,
        node: usize,
        from: usize,
        kind: &'static str,
    },

    #[error("scenario contains no collision events")]
    NoEvents,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
