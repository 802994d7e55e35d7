//! JSON-over-HTTP routes for the simulation session.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use ewcell::persist::{CellFile, Quantity};
use ewcell::{Electrode, Error};

use crate::session::{ElectrodePatch, SessionError, Shared, TraceRequest};

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::Busy => StatusCode::CONFLICT,
            SessionError::NotFound { .. } => StatusCode::NOT_FOUND,
            SessionError::Invalid(_) => StatusCode::BAD_REQUEST,
            SessionError::Core(Error::NotSolved) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Core(Error::Io { .. }) => StatusCode::INTERNAL_SERVER_ERROR,
            SessionError::Core(_) => StatusCode::BAD_REQUEST,
        };
        ApiError(code, e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        SessionError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.0.is_server_error() {
            log::error!("{}", self.1);
        }
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(
    shared: &Arc<Shared>,
    f: impl FnOnce(&Shared) -> Result<T, SessionError> + Send + 'static,
) -> ApiResult<T> {
    let shared = Arc::clone(shared);
    tokio::task::spawn_blocking(move || f(&shared))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/cell", get(get_cell).put(put_cell))
        .route("/electrode", post(add_electrode))
        .route("/electrode/{id}", patch(patch_electrode).delete(delete_electrode))
        .route("/simulate/step", post(step))
        .route("/simulate/run", post(run))
        .route("/simulate/cancel", post(cancel))
        .route("/simulate/status", get(status))
        .route("/streamlines", get(streamlines))
        .route("/slice", get(slice))
        .route("/probe", get(probe))
        .route("/deposit/{id}", get(deposit))
        .route("/shading", get(shading))
        .with_state(shared)
}

#[derive(Deserialize)]
struct CellQuery {
    #[serde(default)]
    field: bool,
}

async fn get_cell(State(s): State<Arc<Shared>>, Query(q): Query<CellQuery>) -> ApiResult<CellFile> {
    blocking(&s, move |s| Ok(s.cell_file(q.field))).await
}

async fn put_cell(State(s): State<Arc<Shared>>, body: Bytes) -> Result<Response, ApiError> {
    let file: CellFile = parse(&body)?;
    let report = blocking(&s, move |s| s.replace(file)).await?;
    Ok(report.into_response())
}

async fn add_electrode(State(s): State<Arc<Shared>>, body: Bytes) -> Result<Response, ApiError> {
    let electrode: Electrode = parse(&body)?;
    let Json(id) = blocking(&s, move |s| s.add_electrode(electrode)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn patch_electrode(State(s): State<Arc<Shared>>, Path(id): Path<usize>, body: Bytes) -> ApiResult<Electrode> {
    let patch: ElectrodePatch = parse(&body)?;
    blocking(&s, move |s| s.patch_electrode(id, &patch)).await
}

async fn delete_electrode(State(s): State<Arc<Shared>>, Path(id): Path<usize>) -> Result<StatusCode, ApiError> {
    let Json(()) = blocking(&s, move |s| s.delete_electrode(id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn step(State(s): State<Arc<Shared>>) -> Result<Response, ApiError> {
    Ok(blocking(&s, |s| s.step()).await?.into_response())
}

async fn run(State(s): State<Arc<Shared>>) -> Result<Response, ApiError> {
    let (report, _handle) = s.start_run()?;
    Ok((StatusCode::ACCEPTED, Json(report)).into_response())
}

async fn cancel(State(s): State<Arc<Shared>>) -> Response {
    Json(s.cancel()).into_response()
}

async fn status(State(s): State<Arc<Shared>>) -> Response {
    Json(s.status()).into_response()
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StreamlineQuery {
    density: Option<f64>,
    max_arc_uni: Option<f64>,
    max_arc_bip: Option<f64>,
}

async fn streamlines(State(s): State<Arc<Shared>>, Query(q): Query<StreamlineQuery>) -> Result<Response, ApiError> {
    let request = TraceRequest {
        density: q.density,
        max_arc_unipolar: q.max_arc_uni,
        max_arc_bipolar: q.max_arc_bip,
    };
    Ok(blocking(&s, move |s| s.trace(request)).await?.into_response())
}

#[derive(Deserialize)]
struct SliceQuery {
    axis: String,
    index: usize,
    #[serde(default = "potential")]
    quantity: Quantity,
}

fn potential() -> Quantity {
    Quantity::Potential
}

/// Axis name or number to an axis index.
pub fn parse_axis(axis: &str) -> Option<usize> {
    match axis.to_ascii_lowercase().as_str() {
        "x" | "0" => Some(0),
        "y" | "1" => Some(1),
        "z" | "2" => Some(2),
        _ => None,
    }
}

async fn slice(State(s): State<Arc<Shared>>, Query(q): Query<SliceQuery>) -> Result<Response, ApiError> {
    let axis = parse_axis(&q.axis).ok_or_else(|| ApiError::bad_request(format!("unknown axis {:?}", q.axis)))?;
    Ok(blocking(&s, move |s| s.slice(axis, q.index, q.quantity)).await?.into_response())
}

#[derive(Deserialize)]
struct ProbeQuery {
    x: f64,
    y: f64,
    z: f64,
}

async fn probe(State(s): State<Arc<Shared>>, Query(q): Query<ProbeQuery>) -> Result<Response, ApiError> {
    Ok(blocking(&s, move |s| s.probe([q.x, q.y, q.z])).await?.into_response())
}

async fn deposit(State(s): State<Arc<Shared>>, Path(id): Path<usize>) -> Result<Response, ApiError> {
    Ok(blocking(&s, move |s| s.deposit(id)).await?.into_response())
}

#[derive(Deserialize)]
struct ShadingQuery {
    electrode: Option<usize>,
    resolution: Option<usize>,
}

async fn shading(State(s): State<Arc<Shared>>, Query(q): Query<ShadingQuery>) -> Result<Response, ApiError> {
    Ok(blocking(&s, move |s| s.shading(q.electrode, q.resolution)).await?.into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names() {
        assert_eq!(parse_axis("X"), Some(0));
        assert_eq!(parse_axis("1"), Some(1));
        assert_eq!(parse_axis("z"), Some(2));
        assert_eq!(parse_axis("w"), None);
    }

    #[test]
    fn status_codes() {
        let code = |e: SessionError| ApiError::from(e).0;
        assert_eq!(code(SessionError::Busy), StatusCode::CONFLICT);
        assert_eq!(code(Error::NotSolved.into()), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(code(SessionError::NotFound { what: "electrode", id: 3 }), StatusCode::NOT_FOUND);
        assert_eq!(code(Error::InvalidGrid("x".into()).into()), StatusCode::BAD_REQUEST);
    }
}
