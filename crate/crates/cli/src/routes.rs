use std::path::Path;

use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use provoscope_core::factor::FactorId;
use provoscope_core::replay::Mode;
use provoscope_core::session::FactorEdit;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::ApiError;
use crate::state::AppState;

/// Returned on every response that reflects a session mutation.
pub const VERSION_HEADER: HeaderName = HeaderName::from_static("x-session-version");

/// Uploads above this size are rejected before parsing.
pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/dataset",
            post(upload_dataset).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)),
        )
        .route("/sessions/{id}/query", post(run_query))
        .route("/sessions/{id}/factors", post(spawn_factor))
        .route("/sessions/{id}/factors/{fid}", patch(edit_factor).delete(delete_factor))
        .route("/sessions/{id}/factors/{fid}/analyze", post(analyze_factor))
        .route("/sessions/{id}/shortlist", post(compute_shortlist))
        .route("/sessions/{id}/scenario", post(bind_scenario))
        .route("/scenarios", get(list_scenarios))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state);

    let app = Router::new().nest("/api", api);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

fn versioned(status: StatusCode, version: u64, body: impl Serialize) -> Response {
    let mut res = (status, Json(body)).into_response();
    res.headers_mut()
        .insert(VERSION_HEADER, HeaderValue::from_str(&version.to_string()).expect("digits"));
    res
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(t)| t).map_err(|e| ApiError::invalid_body(e.body_text()))
}

#[derive(Serialize)]
struct Created<'a> {
    session_id: &'a str,
    session: provoscope_core::session::SessionView<'a>,
}

async fn create_session(State(app): State<AppState>) -> Result<Response, ApiError> {
    let handle = app.create_session().await?;
    let s = handle.lock().await;
    let body = Created {
        session_id: &s.id,
        session: s.view(),
    };
    Ok(versioned(StatusCode::CREATED, s.version(), body))
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let s = handle.lock().await;
    Ok(versioned(StatusCode::OK, s.version(), s.view()))
}

async fn upload_dataset(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut multipart = multipart.map_err(|e| ApiError::invalid_body(e.body_text()))?;
    let mut upload = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::invalid_body(e.body_text()))? {
        let is_file = field.file_name().is_some() || field.name() == Some("file");
        if !is_file {
            continue;
        }
        let name = field.file_name().unwrap_or("dataset.csv").to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::invalid_body(e.body_text()))?;
        upload = Some((name, bytes));
        break;
    }
    let (name, bytes) = upload.ok_or_else(|| ApiError::invalid_body("multipart body has no file field"))?;

    let mut s = handle.lock().await;
    let summary = s.load_csv(&bytes, &name)?;
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), summary))
}

#[derive(Deserialize)]
struct QueryBody {
    text: String,
}

async fn run_query(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let body = json_body(body)?;
    let mut s = handle.lock().await;
    let gateway = app.gateway(&s.scenario)?;
    let outcome = s.run_query(&gateway, &body.text).await?;
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), outcome))
}

async fn spawn_factor(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut s = handle.lock().await;
    let f = s.spawn_factor()?.clone();
    app.persist(&s);
    Ok(versioned(StatusCode::CREATED, s.version(), f))
}

async fn edit_factor(
    State(app): State<AppState>,
    UrlPath((id, fid)): UrlPath<(String, String)>,
    body: Result<Json<FactorEdit>, JsonRejection>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut s = handle.lock().await;
    // An unknown factor is reported before a malformed body.
    if s.factor(&FactorId::new(fid.clone())).is_none() {
        return Err(provoscope_core::SessionError::UnknownFactor(FactorId::new(fid)).into());
    }
    let edit = json_body(body)?;
    let f = s.edit_factor(&FactorId::new(fid), edit)?.clone();
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), f))
}

async fn delete_factor(
    State(app): State<AppState>,
    UrlPath((id, fid)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut s = handle.lock().await;
    s.delete_factor(&FactorId::new(fid))?;
    app.persist(&s);
    let mut res = StatusCode::NO_CONTENT.into_response();
    res.headers_mut()
        .insert(VERSION_HEADER, HeaderValue::from_str(&s.version().to_string()).expect("digits"));
    Ok(res)
}

async fn analyze_factor(
    State(app): State<AppState>,
    UrlPath((id, fid)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut s = handle.lock().await;
    let gateway = app.gateway(&s.scenario)?;
    let analysis = s.analyze(&gateway, &FactorId::new(fid)).await?;
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), analysis))
}

async fn compute_shortlist(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let mut s = handle.lock().await;
    let shortlist = s.compute_shortlist()?.clone();
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), shortlist))
}

#[derive(Serialize)]
struct ScenarioSummary {
    display_name: String,
    mode: Mode,
    analyze_factors_immediately: bool,
    auto_upload: bool,
}

async fn list_scenarios(State(app): State<AppState>) -> Json<Vec<ScenarioSummary>> {
    Json(
        app.scenarios()
            .iter()
            .map(|s| ScenarioSummary {
                display_name: s.display_name.clone(),
                mode: s.mode,
                analyze_factors_immediately: s.analyze_factors_immediately,
                auto_upload: s.auto_upload_filename.is_some(),
            })
            .collect(),
    )
}

#[derive(Deserialize)]
struct BindBody {
    name: String,
}

async fn bind_scenario(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<BindBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id).await?;
    let body = json_body(body)?;
    let scenario = app.scenario(&body.name).ok_or_else(|| ApiError::unknown_scenario(&body.name))?;
    let mut s = handle.lock().await;
    provoscope_core::autostart(scenario, &mut s)?;
    app.persist(&s);
    Ok(versioned(StatusCode::OK, s.version(), s.view()))
}
