//! HTTP front end of the annotation service.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/sessions` | `{annotator_id, narrative_id}` or `{annotator_id, batch_id}` |
//! | GET | `/sessions/{id}/current` | |
//! | POST | `/sessions/{id}/annotations` | `{position, selected_candidate_ids, added_spans}` |
//! | POST | `/batches` | `{annotators, n_batches, seed}` or `{id, annotators, qualification_narrative}` |
//! | GET | `/batches/{id}/iaa` | |
//! | POST | `/gold/adjudicate` | `{policy}` |
//! | GET | `/export` | `?setting=&budget=&tag_source=&policy=` |
//!
//! The annotator may also be named by the `x-annotator-id` header. Record
//! streams (adjudicated gold, exports) are returned as JSON lines.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use newevent_core::annotation::{
    AdjudicationPolicy, AnnotationService, Batch, ExportSetting, ServiceError, SessionTarget, Submission, TagSource,
    DEFAULT_TOKEN_BUDGET,
};
use serde::{Deserialize, Serialize};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

type Shared = Arc<AnnotationService>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, kind: "bad_request", message: message.into() }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, kind) = match &e {
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::UnknownNarrative(_) => (StatusCode::NOT_FOUND, "unknown_narrative"),
            ServiceError::UnknownBatch(_) => (StatusCode::NOT_FOUND, "unknown_batch"),
            ServiceError::NotAssigned { .. } => (StatusCode::CONFLICT, "not_assigned"),
            ServiceError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::Sequencing { .. } => (StatusCode::CONFLICT, "sequencing"),
            ServiceError::Complete(_) => (StatusCode::CONFLICT, "complete"),
            ServiceError::Assembly(_) => (StatusCode::UNPROCESSABLE_ENTITY, "assembly"),
            ServiceError::Storage(_) => (StatusCode::SERVICE_UNAVAILABLE, "storage"),
            ServiceError::Replay { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "replay"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.kind, message: &self.message };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a service call off the async workers; submissions wait for an fsync.
async fn blocking<T, F>(service: Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AnnotationService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, kind: "internal", message: e.to_string() })?
        .map_err(ApiError::from)
}

fn json_lines<T: Serialize>(records: &[T]) -> ApiResult<Response> {
    let mut body = String::new();
    for record in records {
        body.push_str(&serde_json::to_string(record).map_err(|e| ApiError::bad_request(e.to_string()))?);
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

fn header_annotator(headers: &HeaderMap) -> ApiResult<Option<String>> {
    headers
        .get(ANNOTATOR_HEADER)
        .map(|v| {
            v.to_str().map(str::to_string).map_err(|_| ApiError::bad_request("annotator header is not valid text"))
        })
        .transpose()
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    annotator_id: Option<String>,
    narrative_id: Option<String>,
    batch_id: Option<String>,
}

async fn create_session(
    State(service): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let from_header = header_annotator(&headers)?;
    let annotator = match (body.annotator_id, from_header) {
        (Some(a), Some(h)) if a != h => return Err(ApiError::bad_request("annotator id differs from the header")),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(ApiError::bad_request("annotator_id is required")),
    };
    let target = match (body.narrative_id, body.batch_id) {
        (Some(n), None) => SessionTarget::Narrative(n),
        (None, Some(b)) => SessionTarget::Batch(b),
        _ => return Err(ApiError::bad_request("give exactly one of narrative_id and batch_id")),
    };
    let (session, created) = blocking(service, move |s| s.create_session(&annotator, target)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(session)).into_response())
}

async fn current_unit(State(service): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let unit = blocking(service, move |s| s.current_unit(&id)).await?;
    Ok(Json(unit).into_response())
}

async fn submit(
    State(service): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<Submission>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(submission) = body?;
    let annotator = header_annotator(&headers)?;
    let session = blocking(service, move |s| {
        if let Some(annotator) = annotator {
            let owner = s.session(&id)?.annotator_id;
            if owner != annotator {
                return Err(ServiceError::Validation(format!("session `{id}` belongs to another annotator")));
            }
        }
        s.submit(&id, submission)
    })
    .await?;
    Ok(Json(session).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BatchRequest {
    Qualification { id: String, annotators: Vec<String>, qualification_narrative: String },
    Assemble { annotators: Vec<String>, n_batches: usize, seed: u64 },
}

async fn create_batches(
    State(service): State<Shared>,
    body: Result<Json<BatchRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(request) = body?;
    let batches: Vec<Batch> = blocking(service, move |s| match request {
        BatchRequest::Qualification { id, annotators, qualification_narrative } => {
            Ok(vec![s.register_batch(Batch::qualification(id, qualification_narrative, &annotators))?])
        }
        BatchRequest::Assemble { annotators, n_batches, seed } => s.assemble_batches(&annotators, n_batches, seed),
    })
    .await?;
    Ok((StatusCode::CREATED, Json(batches)).into_response())
}

async fn batch_iaa(State(service): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let report = blocking(service, move |s| s.iaa(&id)).await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct AdjudicateRequest {
    #[serde(default)]
    policy: AdjudicationPolicy,
}

async fn adjudicate(
    State(service): State<Shared>,
    body: Result<Json<AdjudicateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(request) = body?;
    let gold = blocking(service, move |s| Ok(s.adjudicate(request.policy))).await?;
    json_lines(&gold)
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    setting: ExportSetting,
    budget: Option<usize>,
    #[serde(default)]
    tag_source: TagSource,
    #[serde(default)]
    policy: AdjudicationPolicy,
}

async fn export(
    State(service): State<Shared>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let budget = q.budget.unwrap_or(DEFAULT_TOKEN_BUDGET);
    let records = blocking(service, move |s| s.export(q.policy, q.setting, budget, q.tag_source)).await?;
    json_lines(&records)
}

pub fn router(service: Arc<AnnotationService>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/current", get(current_unit))
        .route("/sessions/{id}/annotations", post(submit))
        .route("/batches", post(create_batches))
        .route("/batches/{id}/iaa", get(batch_iaa))
        .route("/gold/adjudicate", post(adjudicate))
        .route("/export", get(export))
        .with_state(service)
}

/// Serves the API on an already-bound listener until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<AnnotationService>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
