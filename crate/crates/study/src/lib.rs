//! Server side of the adaptation study: the trial state machine, durable
//! session storage and the HTTP API the browser client talks to.

pub mod clock;
pub mod config;
pub mod engine;
pub mod http;
pub mod store;

use std::path::PathBuf;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{PatchGeometry, SessionConfig};
pub use engine::{
    Ack, Event, Interruption, Phase, Response, RunningEstimate, Session, SessionFlags, SessionResults, Status,
    TrialOutcome, TrialSpec,
};
pub use http::{router, serve};
pub use store::SessionStore;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("trial {got} is not pending (pending: {expected:?})")]
    UnknownTrial { expected: Option<u32>, got: u32 },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("session is still in phase {0:?}")]
    NotFinished(Phase),
    #[error("session is finished")]
    Finished,
    #[error(transparent)]
    Core(#[from] chromashift::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

impl StudyError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            StudyError::NotFound(_) => "not_found",
            StudyError::UnknownTrial { .. } => "unknown_trial",
            StudyError::InvalidConfig(_) => "invalid_config",
            StudyError::InvalidRequest(_) => "invalid_request",
            StudyError::NotFinished(_) => "not_finished",
            StudyError::Finished => "finished",
            StudyError::Core(_) => "core",
            StudyError::Io(_) => "io",
            StudyError::Json(_) => "json",
            StudyError::Corrupt { .. } => "corrupt",
        }
    }
}
