//! JSON API under `/api/v1` plus a server-sent event stream per session.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;

use super::{ProblemReport, Service, SessionError};
use crate::automaton::Action;
use crate::clock::Timestamp;
use crate::context_sa::SignalFrame;
use crate::maintenance_model::ModelDiagnostic;

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<ModelDiagnostic>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    enabled: Vec<Action>,
}

pub struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn bad_request(message: String) -> Self {
        ApiError(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                error: "bad_request",
                message,
                diagnostics: Vec::new(),
                enabled: Vec::new(),
            },
        )
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError as E;
        let (status, error) = match &e {
            E::UnknownModel(_) => (StatusCode::NOT_FOUND, "unknown_model"),
            E::UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            E::UnknownTeam(_) => (StatusCode::NOT_FOUND, "unknown_team"),
            E::InvalidStep(_) => (StatusCode::NOT_FOUND, "invalid_step"),
            E::UnknownLeaf(_) => (StatusCode::BAD_REQUEST, "unknown_leaf"),
            E::UnknownSignal(_) => (StatusCode::BAD_REQUEST, "unknown_signal"),
            E::OutOfOrderSignal(_) => (StatusCode::BAD_REQUEST, "out_of_order_signal"),
            E::UserModel(_) => (StatusCode::BAD_REQUEST, "degenerate_observation"),
            E::InvalidModel(_) => (StatusCode::BAD_REQUEST, "invalid_model"),
            E::SessionFinished(_) => (StatusCode::CONFLICT, "session_finished"),
            E::IllegalAction { .. } => (StatusCode::CONFLICT, "illegal_action"),
            E::ProcedureIncomplete(_) => (StatusCode::CONFLICT, "procedure_incomplete"),
            E::ModelExists(_) => (StatusCode::CONFLICT, "model_exists"),
            E::Io(_) | E::Replay(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let diagnostics = match &e {
            E::InvalidModel(i) => i.diagnostics.clone(),
            _ => Vec::new(),
        };
        let enabled = match &e {
            E::IllegalAction { enabled, .. } => enabled.clone(),
            _ => Vec::new(),
        };
        ApiError(
            status,
            ErrorBody {
                error,
                message: e.to_string(),
                diagnostics,
                enabled,
            },
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

/// JSON body whose rejections are plain 400s.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request(rejection_text(e))),
        }
    }
}

fn rejection_text(e: JsonRejection) -> String {
    e.body_text()
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<Service>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub model_id: String,
    pub user_id: String,
    #[serde(default)]
    pub team_id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteBody {
    pub leaf: String,
    /// Seconds measured by the client.
    pub duration: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBody {
    pub target: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelpBody {
    pub leaf: String,
}

/// Signal values, stamped with `at` (ms) or the server time.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsBody {
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub at: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct DetailQuery {
    pub k: Option<usize>,
    pub session: Option<String>,
}

pub fn router(service: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/models", post(import_model).get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/step", get(get_step))
        .route("/sessions/{id}/complete", post(complete))
        .route("/sessions/{id}/skip", post(skip))
        .route("/sessions/{id}/exit", post(exit_loop))
        .route("/sessions/{id}/help", post(help))
        .route("/sessions/{id}/signals", post(signals))
        .route("/sessions/{id}/problem", post(problem))
        .route("/sessions/{id}/finish", post(finish))
        .route("/sessions/{id}/user", get(user))
        .route("/sessions/{id}/context/{step}", get(context))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/events", get(events))
        .route("/teams/{id}", get(team))
        .route("/teams/{id}/detail", get(team_detail));
    Router::new().nest(API_PREFIX, api).with_state(service)
}

async fn import_model(State(svc): Shared, text: String) -> Result<Response, ApiError> {
    let summary = svc.import_model(&text)?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn list_models(State(svc): Shared) -> ApiResult<Vec<super::ModelSummary>> {
    Ok(Json(svc.list_models()))
}

async fn get_model(State(svc): Shared, Path(id): Path<String>) -> ApiResult<super::ModelSummary> {
    Ok(Json(svc.model_summary(&id)?))
}

async fn create_session(
    State(svc): Shared,
    Body(req): Body<CreateSession>,
) -> Result<Response, ApiError> {
    let view = svc.create_session(&req.model_id, &req.user_id, req.team_id)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_step(State(svc): Shared, Path(id): Path<String>) -> ApiResult<super::StepView> {
    Ok(Json(svc.get_current_step(&id)?))
}

async fn complete(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<CompleteBody>,
) -> ApiResult<super::StepView> {
    Ok(Json(svc.complete_task(&id, &req.leaf, req.duration)?))
}

async fn skip(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<TargetBody>,
) -> ApiResult<super::StepView> {
    Ok(Json(svc.skip(&id, &req.target)?))
}

async fn exit_loop(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<TargetBody>,
) -> ApiResult<super::StepView> {
    Ok(Json(svc.exit_loop(&id, &req.target)?))
}

async fn help(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<HelpBody>,
) -> ApiResult<super::StepContent> {
    Ok(Json(svc.request_help(&id, &req.leaf)?))
}

async fn signals(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<SignalsBody>,
) -> ApiResult<Vec<crate::context_sa::Alert>> {
    let at = req.at.map_or_else(|| svc.now(), Timestamp);
    let frame = req
        .values
        .iter()
        .fold(SignalFrame::new(), |f, (k, v)| f.with(k, *v, at));
    Ok(Json(svc.ingest_signals(&id, frame)?))
}

async fn problem(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<ProblemReport>,
) -> Result<StatusCode, ApiError> {
    svc.report_problem(&id, req)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn finish(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<super::PostMaintenanceReport> {
    let report = svc.finish_session(&id)?;
    if svc.report_url().is_some() {
        svc.deliver(&report).await?;
    }
    Ok(Json(report))
}

async fn user(State(svc): Shared, Path(id): Path<String>) -> ApiResult<super::UserView> {
    Ok(Json(svc.user_state(&id)?))
}

async fn context(
    State(svc): Shared,
    Path((id, step)): Path<(String, String)>,
) -> ApiResult<crate::maintenance_model::SectionView> {
    let step: u8 = step
        .parse()
        .map_err(|_| ApiError::from(SessionError::InvalidStep(0)))?;
    Ok(Json(svc.step_back_context(&id, step)?))
}

async fn log(State(svc): Shared, Path(id): Path<String>) -> ApiResult<Vec<super::LogRecord>> {
    Ok(Json(svc.session_log(&id)?))
}

async fn report(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<super::PostMaintenanceReport> {
    Ok(Json(svc.report_from_disk(&id)?))
}

async fn team(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<crate::context_sa::TeamView> {
    Ok(Json(svc.team_summary(&id)?))
}

async fn team_detail(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<DetailQuery>,
) -> ApiResult<Vec<crate::context_sa::MemberDetail>> {
    Ok(Json(svc.team_detail(&id, q.k, q.session.as_deref())?))
}

/// Records of this session, plus team notes from its teammates.
async fn events(
    State(svc): Shared,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let team = svc.session_team(&id)?;
    let rx = svc.subscribe();
    let stream = stream::unfold(rx, move |mut rx| {
        let id = id.clone();
        let team = team.clone();
        async move {
            loop {
                match rx.recv().await {
                    Ok(p) => {
                        let mine = p.session_id == id;
                        let teammate = team.is_some()
                            && p.team_id == team
                            && matches!(p.record.event, super::SessionEvent::TeamNote { .. });
                        if mine || teammate {
                            let event = Event::default()
                                .event(p.record.event.kind())
                                .json_data(&p)
                                .unwrap_or_default();
                            return Some((Ok(event), rx));
                        }
                    }
                    Err(RecvError::Lagged(n)) => {
                        let event = Event::default().event("lagged").data(n.to_string());
                        return Some((Ok(event), rx));
                    }
                    Err(RecvError::Closed) => return None,
                }
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
