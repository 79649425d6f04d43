//! JSON over HTTP.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | optional [`SessionConfig`] | [`Status`] (201) |
//! | GET | `/sessions` | | list of ids |
//! | GET | `/sessions/{id}` | | [`Status`] |
//! | GET | `/sessions/{id}/trial` | | [`TrialOutcome`] |
//! | POST | `/sessions/{id}/response` | [`Response`] | [`Ack`] |
//! | POST | `/sessions/{id}/finalize` | | [`Status`] |
//! | POST | `/sessions/{id}/reset` | | [`Status`] |
//! | GET | `/sessions/{id}/results` | | [`SessionResults`] |
//! | GET | `/sessions/{id}/export` | | JSON lines |
//! | GET | `/sessions/{id}/preview` | | [`Preview`] |
//!
//! Errors come back as `{"error": {"code": ..., "message": ...}}` with 404
//! for unknown sessions, 409 for requests the session's state rules out, 400
//! for malformed input and 500 otherwise.
//!
//! [`Status`]: crate::Status
//! [`TrialOutcome`]: crate::TrialOutcome
//! [`Ack`]: crate::Ack
//! [`SessionResults`]: crate::SessionResults

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use chromashift::adaptation::TriphasicSchedule;
use chromashift::colorimetry::{srgb_encode, uv_xyz, xyz_rgb, ChromaticityUv, ClipPolicy};

use crate::config::SessionConfig;
use crate::engine::Response;
use crate::store::SessionStore;
use crate::StudyError;

impl IntoResponse for StudyError {
    fn into_response(self) -> HttpResponse {
        let status = match &self {
            StudyError::NotFound(_) => StatusCode::NOT_FOUND,
            StudyError::UnknownTrial { .. } | StudyError::NotFinished(_) | StudyError::Finished => {
                StatusCode::CONFLICT
            }
            StudyError::InvalidConfig(_) | StudyError::InvalidRequest(_) | StudyError::Json(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = serde_json::json!({
            "error": { "code": self.code(), "message": self.to_string() }
        });
        (status, Json(body)).into_response()
    }
}

type Store = Arc<SessionStore>;

/// Store calls block on disk syncs and fits, so they run off the async
/// workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StudyError> + Send + 'static,
) -> Result<T, StudyError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| StudyError::Io(std::io::Error::other(e.to_string())))?
}

/// Background colors along the schedule, for the client to preload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Preview {
    pub schedule: TriphasicSchedule,
    pub patch_luminance: f64,
    pub samples: Vec<PreviewSample>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PreviewSample {
    pub t: f64,
    pub background: ChromaticityUv,
    pub rgb: [u8; 3],
}

fn preview(cfg: &SessionConfig) -> Result<Preview, StudyError> {
    let s = cfg.schedule;
    let n = s.end().ceil() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = (i as f64).min(s.end());
        let c = s.illuminant_at(t)?;
        let rgb = srgb_encode(ClipPolicy::Clamp.apply(xyz_rgb(uv_xyz(c, cfg.patch_luminance)?)));
        samples.push(PreviewSample { t, background: c, rgb });
    }
    Ok(Preview {
        schedule: s,
        patch_luminance: cfg.patch_luminance,
        samples,
    })
}

async fn create(State(store): State<Store>, body: Bytes) -> Result<HttpResponse, StudyError> {
    let config: SessionConfig = if body.iter().all(u8::is_ascii_whitespace) {
        SessionConfig::default()
    } else {
        serde_json::from_slice(&body)?
    };
    let status = blocking(move || store.create(config)).await?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn list(State(store): State<Store>) -> Json<Vec<String>> {
    Json(store.ids())
}

async fn status(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    Ok(Json(blocking(move || store.status(&id)).await?).into_response())
}

async fn trial(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    Ok(Json(blocking(move || store.next_trial(&id)).await?).into_response())
}

async fn respond(
    State(store): State<Store>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<HttpResponse, StudyError> {
    let r: Response = serde_json::from_slice(&body)?;
    Ok(Json(blocking(move || store.respond(&id, &r)).await?).into_response())
}

async fn finalize(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    Ok(Json(blocking(move || store.finalize(&id)).await?).into_response())
}

async fn reset(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    Ok(Json(blocking(move || store.reset(&id)).await?).into_response())
}

async fn results(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    Ok(Json(blocking(move || store.results(&id)).await?).into_response())
}

async fn export(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    let text = blocking(move || store.export(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn preview_handler(State(store): State<Store>, Path(id): Path<String>) -> Result<HttpResponse, StudyError> {
    let p = blocking(move || preview(&store.snapshot(&id)?.config)).await?;
    Ok(Json(p).into_response())
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/trial", get(trial))
        .route("/sessions/{id}/response", post(respond))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/reset", post(reset))
        .route("/sessions/{id}/results", get(results))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/preview", get(preview_handler))
        .with_state(store)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
