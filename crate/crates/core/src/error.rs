use std::fmt;

use thiserror::Error;

use crate::expr::{ParseError, UnknownIndex};
use crate::forecast::ForecastError;
use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::pca::PcaError;
use crate::sr::SrError;

/// Pipeline stage an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Standardize,
    Pca,
    Search,
    Forecast,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Standardize => "standardize",
            Stage::Pca => "pca",
            Stage::Search => "search",
            Stage::Forecast => "forecast",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    UnknownIndex(#[from] UnknownIndex),
    #[error(transparent)]
    Search(#[from] SrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{stage} stage{}: {source}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Stage {
        stage: Stage,
        context: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: Stage, context: Option<String>) -> Self {
        Error::Stage { stage, context, source: Box::new(self) }
    }

    /// 0 success, 1 validation, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Ingest(IngestError::MissingFile(_) | IngestError::Io(_)) => 3,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 3,
            Error::Pca(PcaError::NoConvergence { .. } | PcaError::NegativeEigenvalue { .. }) => 2,
            Error::Search(SrError::EmptyFront) => 2,
            _ => 1,
        }
    }
}

/// Adds stage context to any convertible error.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, Error>;
    fn stage_with(self, stage: Stage, context: impl FnOnce() -> String) -> Result<T, Error>;
}

impl<T, E: Into<Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, Error> {
        self.map_err(|e| e.into().at(stage, None))
    }

    fn stage_with(self, stage: Stage, context: impl FnOnce() -> String) -> Result<T, Error> {
        self.map_err(|e| e.into().at(stage, Some(context())))
    }
}
