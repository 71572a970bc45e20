use thiserror::Error;

use crate::martingale::{CoverFailure, RiverFailure};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("position {position} is not a multiple of 2^-{resolution}")]
    OffGrid { position: String, resolution: u32 },

    #[error("resolution {requested} exceeds the supported maximum {max}")]
    ResolutionTooLarge { requested: u32, max: u32 },

    #[error("measure has no mass: {0}")]
    NoMass(String),

    #[error("intersection became empty at level {level}")]
    EmptyIntersection { level: usize },

    #[error("mountain river search failed: {0}")]
    River(RiverFailure),

    #[error("cover selection failed: {0}")]
    Cover(CoverFailure),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("no admissible scale: {}", .attempts.join("; "))]
    NoAdmissibleScale { attempts: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::OffGrid { .. } => "off_grid",
            Error::ResolutionTooLarge { .. } => "resolution_too_large",
            Error::NoMass(_) => "no_mass",
            Error::EmptyIntersection { .. } => "empty_intersection",
            Error::River(_) => "river_failure",
            Error::Cover(_) => "cover_failure",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Stage { .. } => "stage_failure",
            Error::NoAdmissibleScale { .. } => "no_admissible_scale",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
