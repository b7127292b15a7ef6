use thiserror::Error;

use crate::binio::FormatError;
use crate::eval::EvalError;
use crate::export::ExportError;
use crate::features::FeatureError;
use crate::mesh::MeshError;
use crate::neural::NetError;
use crate::numerics::SolveError;
use crate::smoothing::SmoothError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Each stage has its own error type; this wraps them
/// and lets callers attach the mesh or split being processed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable category, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Mesh(_) => "mesh",
            Error::Solve(_) => "solve",
            Error::Smooth(_) => "smooth",
            Error::Feature(_) => "feature",
            Error::Net(_) => "network",
            Error::Eval(_) => "eval",
            Error::Format(_) => "format",
            Error::Export(_) => "export",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Context { source, .. } => source.category(),
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.into().context(context()))
    }
}
