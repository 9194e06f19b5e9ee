//! HTTP/JSON routes.

use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use loopinv_core::lang::Type;
use loopinv_core::level::Level;
use loopinv_core::value::State as Values;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::{App, AppError};

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError {
            status: StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: e.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Serialize)]
struct LevelSummary<'a> {
    id: &'a str,
    title: &'a str,
    tutorial: bool,
}

#[derive(Serialize)]
struct Variable<'a> {
    name: &'a str,
    #[serde(rename = "type")]
    ty: Type,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LevelDetail<'a> {
    id: &'a str,
    title: &'a str,
    source: &'a str,
    tutorial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    unroll_bound: Option<usize>,
    starter_inputs: &'a Values,
    parameters: Vec<Variable<'a>>,
    variables: Vec<Variable<'a>>,
    guarantee: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    precondition: Option<String>,
}

impl<'a> LevelDetail<'a> {
    fn of(l: &'a Level) -> Self {
        let p = &l.program;
        LevelDetail {
            id: &l.id,
            title: &l.title,
            source: &l.source,
            tutorial: l.tutorial,
            unroll_bound: l.unroll_bound,
            starter_inputs: &l.starter_inputs,
            parameters: p
                .params
                .iter()
                .map(|(name, ty)| Variable { name, ty: *ty })
                .collect(),
            variables: p
                .env
                .iter()
                .map(|(name, ty)| Variable { name, ty: *ty })
                .collect(),
            guarantee: p.post.to_string(),
            precondition: p.pre.as_ref().map(|e| e.to_string()),
        }
    }
}

#[derive(Deserialize)]
struct ExprBody {
    expr: String,
}

#[derive(Deserialize)]
struct TraceBody {
    #[serde(default)]
    inputs: serde_json::Map<String, serde_json::Value>,
}

async fn list_levels(State(app): State<Arc<App>>) -> Json<serde_json::Value> {
    let levels: Vec<LevelSummary> = app
        .levels()
        .map(|l| LevelSummary {
            id: &l.id,
            title: &l.title,
            tutorial: l.tutorial,
        })
        .collect();
    Json(json!(levels))
}

async fn get_level(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<serde_json::Value> {
    let level = app.level(&id)?;
    Ok(Json(json!(LevelDetail::of(&level))))
}

async fn create_session(State(app): State<Arc<App>>) -> Result<Response, ApiError> {
    let id = app.create_session()?;
    Ok((StatusCode::CREATED, Json(json!({ "sessionId": id }))).into_response())
}

async fn level_state(
    State(app): State<Arc<App>>,
    Path((sid, id)): Path<(String, String)>,
) -> ApiResult<crate::app::LevelView> {
    Ok(Json(app.level_state(&sid, &id).await?))
}

async fn propose(
    State(app): State<Arc<App>>,
    Path((sid, id)): Path<(String, String)>,
    body: Result<Json<ExprBody>, JsonRejection>,
) -> ApiResult<crate::app::ProposeView> {
    let Json(body) = body?;
    Ok(Json(app.propose(&sid, &id, &body.expr).await?))
}

async fn trace(
    State(app): State<Arc<App>>,
    Path((sid, id)): Path<(String, String)>,
    body: Result<Json<TraceBody>, JsonRejection>,
) -> ApiResult<crate::app::TraceView> {
    let Json(body) = body?;
    Ok(Json(app.trace(&sid, &id, body.inputs).await?))
}

async fn why_not(
    State(app): State<Arc<App>>,
    Path((sid, id)): Path<(String, String)>,
    body: Result<Json<ExprBody>, JsonRejection>,
) -> ApiResult<loopinv_core::engine::StatePair> {
    let Json(body) = body?;
    Ok(Json(app.why_not(&sid, &id, &body.expr).await?))
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        target: "request",
        method = %method,
        path,
        status = resp.status().as_u16(),
        ms = start.elapsed().as_millis() as u64,
    );
    resp
}

pub fn router(app: Arc<App>) -> Router {
    let level = "/api/sessions/{sid}/levels/{id}";
    Router::new()
        .route("/api/levels", get(list_levels))
        .route("/api/levels/{id}", get(get_level))
        .route("/api/sessions", post(create_session))
        .route(&format!("{level}/state"), get(level_state))
        .route(&format!("{level}/propose"), post(propose))
        .route(&format!("{level}/trace"), post(trace))
        .route(&format!("{level}/whynot"), post(why_not))
        .layer(middleware::from_fn(log_request))
        .with_state(app)
}
