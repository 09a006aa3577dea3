//! Local HTTP service over one loaded case.
//!
//! The case snapshot is immutable for the life of the process. The assessment
//! and trigger logs sit behind one mutex, so every write is serialized, and
//! each write carries the log head it expects (optimistic concurrency).

use std::fs::OpenOptions;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use casecred_core::assessment::{check_assessment, AssessmentError, AssessmentLog, ClaimAssessment, DimensionValue};
use casecred_core::io::{parse_case, parse_document, to_canonical_json, ParseError};
use casecred_core::lifecycle::{apply_staleness, mark_stale, ChangeSet, TriggerEvent, TriggerKind, TriggerLog};
use casecred_core::radar::render_radar_svg;
use casecred_core::report::{analyze, render_json, render_markdown, SuggestedAction};
use casecred_core::rollup::{rollup, spoke_values, RollupOptions, Strategy};
use casecred_core::{traverse, ClaimId, SafetyCase, TraversalOrder};

pub const VERSION_HEADER: &str = "x-case-version";
pub const LOG_VERSION_HEADER: &str = "x-log-version";

/// Settings fixed at start-up.
#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub as_of: NaiveDate,
    pub options: RollupOptions,
    pub log_path: Option<PathBuf>,
    pub trigger_path: Option<PathBuf>,
    pub suggested_actions: Vec<SuggestedAction>,
}

impl ServiceConfig {
    pub fn new(as_of: NaiveDate) -> Self {
        ServiceConfig {
            as_of,
            options: RollupOptions::default(),
            log_path: None,
            trigger_path: None,
            suggested_actions: Vec::new(),
        }
    }
}

struct Session {
    log: AssessmentLog,
    triggers: TriggerLog,
}

pub struct AppState {
    case: Arc<SafetyCase>,
    case_bytes: Arc<[u8]>,
    config: ServiceConfig,
    session: Mutex<Session>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Case { path: PathBuf, source: ParseError },
    #[error("{path}: {message}")]
    Log { path: PathBuf, message: String },
}

fn read_optional(path: &Path) -> Result<String, LoadError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
        Err(source) => Err(LoadError::Io { path: path.to_path_buf(), source }),
    }
}

impl AppState {
    pub fn new(case: SafetyCase, log: AssessmentLog, triggers: TriggerLog, config: ServiceConfig) -> Self {
        let case_bytes: Arc<[u8]> = casecred_core::io::serialize_case(&case).into();
        AppState { case: Arc::new(case), case_bytes, config, session: Mutex::new(Session { log, triggers }) }
    }

    /// Loads the case and any existing logs named in `config`. Missing log
    /// files start empty.
    pub fn load(case_path: &Path, config: ServiceConfig) -> Result<Self, LoadError> {
        let bytes = std::fs::read(case_path).map_err(|source| LoadError::Io { path: case_path.to_path_buf(), source })?;
        let case = parse_case(&bytes).map_err(|source| LoadError::Case { path: case_path.to_path_buf(), source })?;
        let log = match &config.log_path {
            Some(p) => AssessmentLog::from_jsonl(&read_optional(p)?)
                .map_err(|e| LoadError::Log { path: p.clone(), message: e.to_string() })?,
            None => AssessmentLog::new(),
        };
        let triggers = match &config.trigger_path {
            Some(p) => TriggerLog::from_jsonl(&read_optional(p)?)
                .map_err(|e| LoadError::Log { path: p.clone(), message: e.to_string() })?,
            None => TriggerLog::new(),
        };
        Ok(AppState::new(case, log, triggers, config))
    }

    pub fn case(&self) -> &SafetyCase {
        &self.case
    }

    fn session(&self) -> MutexGuard<'_, Session> {
        // A panic while holding the lock leaves the logs untouched (writes
        // commit by assignment), so a poisoned lock is still consistent.
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Current assessment log head.
    pub fn log_version(&self) -> u64 {
        self.session().log.head()
    }

    pub fn log_snapshot(&self) -> AssessmentLog {
        self.session().log.clone()
    }
}

/// Error body: `{"error": code, "message": ..., "field"?, "current_version"?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_version: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), error: error.into(), message: message.into(), field: None, current_version: None }
    }

    fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn from_parse(err: ParseError) -> Self {
        match err {
            ParseError::Schema { path, message } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "schema", message).with_field(path)
            }
            other => ApiError::new(StatusCode::BAD_REQUEST, "malformed", other.to_string()),
        }
    }

    fn from_assessment(err: AssessmentError) -> Self {
        let field = match &err {
            AssessmentError::UnknownClaim(_) => "claim_id".to_string(),
            AssessmentError::StaleVersion { .. } => "case_version".to_string(),
            AssessmentError::InvariantViolation { field, .. } => field.clone(),
            AssessmentError::SelfAssessment { .. } => "assessors".to_string(),
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, err.code(), err.to_string()).with_field(field)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        with_type(status, "application/json", to_canonical_json(&self))
    }
}

fn with_type(status: StatusCode, content_type: &'static str, body: impl Into<axum::body::Body>) -> Response {
    let mut resp = Response::new(body.into());
    *resp.status_mut() = status;
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    resp
}

fn json_ok(status: StatusCode, body: String, log_version: u64) -> Response {
    let mut resp = with_type(status, "application/json", body);
    resp.headers_mut().insert(LOG_VERSION_HEADER, HeaderValue::from(log_version));
    resp
}

fn append_line(path: &Path, line: &str) -> Result<(), ApiError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ApiError::internal(format!("cannot open {}: {e}", path.display())))?;
    writeln!(f, "{line}").map_err(|e| ApiError::internal(format!("cannot append to {}: {e}", path.display())))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/case", get(get_case))
        .route("/rollup", get(get_rollup))
        .route("/report", get(get_report))
        .route("/radar.svg", get(get_radar))
        .route("/queue", get(get_queue))
        .route("/assessments", post(post_assessment))
        .route("/triggers", post(post_trigger))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn get_case(State(state): State<Arc<AppState>>) -> Response {
    let mut resp = with_type(StatusCode::OK, "application/json", state.case_bytes.to_vec());
    resp.headers_mut().insert(VERSION_HEADER, HeaderValue::from(state.case.version));
    resp
}

#[derive(Debug, Default, Deserialize)]
pub struct RollupQuery {
    pub strategy: Option<String>,
    pub threshold: Option<u8>,
}

fn options_for(state: &AppState, q: &RollupQuery) -> Result<RollupOptions, ApiError> {
    let mut opts = state.config.options.clone();
    if let Some(s) = &q.strategy {
        opts.strategy = s
            .parse::<Strategy>()
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_strategy", e.to_string()).with_field("strategy"))?;
    }
    if let Some(t) = q.threshold {
        opts.threshold = t;
    }
    Ok(opts)
}

async fn get_rollup(State(state): State<Arc<AppState>>, Query(q): Query<RollupQuery>) -> Result<Response, ApiError> {
    let opts = options_for(&state, &q)?;
    let log = state.log_snapshot();
    let result = rollup(&state.case, &log.current_list(), &opts)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "rollup", e.to_string()))?;
    Ok(json_ok(StatusCode::OK, to_canonical_json(&result), log.head()))
}

#[derive(Debug, Default, Deserialize)]
pub struct ReportQuery {
    pub format: Option<String>,
    pub strategy: Option<String>,
    pub threshold: Option<u8>,
}

async fn get_report(State(state): State<Arc<AppState>>, Query(q): Query<ReportQuery>) -> Result<Response, ApiError> {
    let opts = options_for(&state, &RollupQuery { strategy: q.strategy.clone(), threshold: q.threshold })?;
    let log = state.log_snapshot();
    let report = analyze(&state.case, &log, state.config.as_of, &opts, &state.config.suggested_actions)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "report", e.to_string()))?;
    match q.format.as_deref() {
        None | Some("markdown") => {
            let mut resp = with_type(StatusCode::OK, "text/markdown; charset=utf-8", render_markdown(&report));
            resp.headers_mut().insert(LOG_VERSION_HEADER, HeaderValue::from(log.head()));
            Ok(resp)
        }
        Some("json") => Ok(json_ok(StatusCode::OK, render_json(&report), log.head())),
        Some(other) => Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_format", format!("unknown format `{other}`"))
            .with_field("format")),
    }
}

async fn get_radar(State(state): State<Arc<AppState>>, Query(q): Query<RollupQuery>) -> Result<Response, ApiError> {
    let opts = options_for(&state, &q)?;
    let log = state.log_snapshot();
    let svg = radar_svg(&state.case, &log, &opts)?;
    let mut resp = with_type(StatusCode::OK, "image/svg+xml", svg);
    resp.headers_mut().insert(LOG_VERSION_HEADER, HeaderValue::from(log.head()));
    Ok(resp)
}

fn radar_svg(case: &SafetyCase, log: &AssessmentLog, opts: &RollupOptions) -> Result<String, ApiError> {
    let unprocessable = |code: &str, e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e);
    let result = rollup(case, &log.current_list(), opts).map_err(|e| unprocessable("rollup", e.to_string()))?;
    let radar = spoke_values(case, &result).map_err(|e| unprocessable("radar", e.to_string()))?;
    render_radar_svg(&radar).map_err(|e| unprocessable("radar", e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueReason {
    Stale,
    Unassessed,
    BelowThreshold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub claim_id: ClaimId,
    pub reason: QueueReason,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Queue {
    pub log_version: u64,
    pub threshold: u8,
    pub items: Vec<QueueItem>,
}

/// Claims needing attention: stale first, then unassessed, then those with a
/// direct score below the threshold; tree order within each group. Each
/// claim appears once, under its most pressing reason.
pub fn findings_queue(case: &SafetyCase, log: &AssessmentLog, threshold: u8) -> Vec<QueueItem> {
    let current = log.current();
    let order = traverse(case, TraversalOrder::Pre).unwrap_or_default();
    let mut items: Vec<(QueueReason, usize, QueueItem)> = Vec::new();
    for (pos, id) in order.iter().enumerate() {
        let item = match current.get(id) {
            Some(a) if a.stale => Some((QueueReason::Stale, "assessment is stale".to_string())),
            None => Some((QueueReason::Unassessed, "no assessment recorded".to_string())),
            Some(a) => {
                let low: Vec<String> = casecred_core::assessment::Dimension::ALL
                    .into_iter()
                    .filter_map(|d| match a.value(d) {
                        Some(DimensionValue::Score(s)) if s < threshold => Some(format!("{d} {s}")),
                        _ => None,
                    })
                    .collect();
                (!low.is_empty()).then(|| (QueueReason::BelowThreshold, low.join(", ")))
            }
        };
        if let Some((reason, detail)) = item {
            items.push((reason, pos, QueueItem { claim_id: id.clone(), reason, detail }));
        }
    }
    items.sort_by_key(|(reason, pos, _)| (*reason, *pos));
    items.into_iter().map(|(_, _, item)| item).collect()
}

async fn get_queue(State(state): State<Arc<AppState>>) -> Response {
    let log = state.log_snapshot();
    let threshold = state.config.options.threshold;
    let queue = Queue { log_version: log.head(), threshold, items: findings_queue(&state.case, &log, threshold) };
    json_ok(StatusCode::OK, to_canonical_json(&queue), log.head())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentRequest {
    pub expected_version: u64,
    pub assessment: ClaimAssessment,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentStored {
    pub seq: u64,
    pub log_version: u64,
    pub record: ClaimAssessment,
}

async fn post_assessment(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: AssessmentRequest = parse_document(&body).map_err(ApiError::from_parse)?;
    let mut session = state.session();
    let head = session.log.head();
    if req.expected_version != head {
        let mut err = ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("expected log version {}, current version is {head}", req.expected_version),
        );
        err.current_version = Some(head);
        return Err(err);
    }
    check_assessment(&state.case, &req.assessment).map_err(ApiError::from_assessment)?;
    let mut next = session.log.clone();
    let entry = casecred_core::assessment::record_assessment(&state.case, &mut next, req.assessment)
        .map_err(ApiError::from_assessment)?
        .clone();
    if let Some(path) = &state.config.log_path {
        append_line(path, &entry.to_line())?;
    }
    session.log = next;
    let record = match entry {
        casecred_core::assessment::LogEntry::Assessment { record, .. } => record,
        casecred_core::assessment::LogEntry::Stale { .. } => unreachable!("record_assessment appends an assessment"),
    };
    let stored = AssessmentStored { seq: head + 1, log_version: session.log.head(), record };
    Ok(json_ok(StatusCode::CREATED, to_canonical_json(&stored), session.log.head()))
}

/// Trigger submission; the id is assigned when omitted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub kind: TriggerKind,
    pub description: String,
    pub affected: Vec<String>,
    pub raised_at: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerAccepted {
    pub trigger: TriggerEvent,
    pub newly_stale: Vec<ClaimId>,
    pub log_version: u64,
}

async fn post_trigger(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: TriggerRequest = parse_document(&body).map_err(ApiError::from_parse)?;
    let mut session = state.session();
    let event = TriggerEvent {
        id: req.id.unwrap_or_else(|| session.triggers.next_id()),
        kind: req.kind,
        description: req.description,
        affected: req.affected,
        raised_at: req.raised_at,
    };
    let mut triggers = session.triggers.clone();
    triggers
        .append(&state.case, event.clone())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "trigger", e.to_string()).with_field("affected"))?;
    let outcome = mark_stale(&state.case, &state.case, &session.log.current_list(), &ChangeSet::default(), std::slice::from_ref(&event))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "trigger", e.to_string()))?;
    let mut log = session.log.clone();
    let marks = apply_staleness(&mut log, &outcome);
    if let Some(path) = &state.config.trigger_path {
        append_line(path, &casecred_core::io::to_canonical_line(&event))?;
    }
    if let Some(path) = &state.config.log_path {
        for m in &marks {
            append_line(path, &m.to_line())?;
        }
    }
    session.triggers = triggers;
    session.log = log;
    let accepted = TriggerAccepted { trigger: event, newly_stale: outcome.newly_stale, log_version: session.log.head() };
    Ok(json_ok(StatusCode::CREATED, to_canonical_json(&accepted), session.log.head()))
}
