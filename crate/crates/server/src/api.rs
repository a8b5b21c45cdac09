//! JSON handlers. Only the false-positive endpoint writes to the store.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use jcalens_core::analyzer::{analyze_file, Finding};
use jcalens_core::extract::{detect_apis_in_snippet, ParseError, SourceFile};
use jcalens_core::rules::RulePack;
use jcalens_core::search::{execute_query, ExampleDoc, MatchedUsage, Mode, Query, Score, SearchError, DEFAULT_PAGE_SIZE};
use jcalens_core::store::{Store, StoreError, UsageRecord};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RwLock<Store>>,
    pub rules: Arc<RulePack>,
}

impl AppState {
    pub fn new(store: Store, rules: RulePack) -> Self {
        AppState { store: Arc::new(RwLock::new(store)), rules: Arc::new(rules) }
    }
}

#[derive(Default, Clone)]
pub struct ServeOptions {
    /// Allowed origins; `*` allows any.
    pub cors_origins: Vec<String>,
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request("bad_request", r.body_text())
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let code = match e {
            SearchError::EmptyQuery => "empty_query",
            SearchError::BadMode(_) => "bad_mode",
            SearchError::BadPage => "bad_page",
            SearchError::BadPageSize => "bad_page_size",
            SearchError::BadCap => "bad_cap",
        };
        ApiError::bad_request(code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match e {
            StoreError::UnknownUsage(_) => (StatusCode::NOT_FOUND, "unknown_usage"),
            StoreError::UnknownExample(_) => (StatusCode::NOT_FOUND, "unknown_example"),
            StoreError::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project"),
            StoreError::AlreadySecure(_) => (StatusCode::CONFLICT, "already_secure"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "store_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, Store> {
    state.store.read().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchRequest {
    #[serde(default)]
    pub api_names: Option<Vec<String>>,
    #[serde(default)]
    pub snippet: Option<String>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub page: Option<usize>,
    #[serde(default)]
    pub page_size: Option<usize>,
    #[serde(default)]
    pub include_duplicates: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preview {
    pub start_line: u32,
    pub end_line: u32,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub example_key: String,
    pub project_id: String,
    pub score: Score,
    pub matched_usages: Vec<MatchedUsage>,
    pub preview: Preview,
    pub duplicate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResponse {
    pub detected_apis: Vec<String>,
    pub fallback_mixed: bool,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub results: Vec<SearchResult>,
}

const PREVIEW_CONTEXT: u32 = 2;
const PREVIEW_MAX_LINES: u32 = 40;

/// Source window around the matched lines.
pub fn preview(source: &str, lines: impl IntoIterator<Item = u32>) -> Preview {
    let lines: Vec<u32> = lines.into_iter().collect();
    let total = source.lines().count().max(1) as u32;
    let lo = lines.iter().min().copied().unwrap_or(1).saturating_sub(PREVIEW_CONTEXT).max(1);
    let hi = (lines.iter().max().copied().unwrap_or(1) + PREVIEW_CONTEXT).min(total).min(lo + PREVIEW_MAX_LINES - 1);
    let text = source
        .lines()
        .skip(lo as usize - 1)
        .take((hi + 1).saturating_sub(lo) as usize)
        .collect::<Vec<_>>()
        .join("\n");
    Preview { start_line: lo, end_line: hi, text }
}

fn to_result(store: &Store, d: ExampleDoc) -> SearchResult {
    let source = store.get_example(&d.key).map(|e| e.source).unwrap_or_default();
    SearchResult {
        preview: preview(&source, d.matched_usages.iter().map(|m| m.line)),
        example_key: d.key,
        project_id: d.project_id,
        score: d.score,
        matched_usages: d.matched_usages,
        duplicate: d.duplicate,
    }
}

pub async fn search(State(state): State<AppState>, body: Result<Json<SearchRequest>, JsonRejection>) -> ApiResult<SearchResponse> {
    let Json(req) = body?;
    let mode: Mode = req.mode.as_deref().unwrap_or("any").parse()?;
    let mut apis: BTreeSet<String> = BTreeSet::new();
    for name in req.api_names.iter().flatten() {
        let name = name.trim();
        if name.is_empty() {
            continue;
        }
        // accept fully qualified names as well
        apis.insert(state.rules.get(name).map_or(name, |r| r.simple_name()).to_string());
    }
    let mut detected = Vec::new();
    if let Some(snippet) = req.snippet.as_deref().filter(|s| !s.trim().is_empty()) {
        let found = detect_apis_in_snippet(snippet, &state.rules);
        detected = found.apis.iter().cloned().collect();
        apis.extend(found.apis);
    }
    let mut q = Query::new(apis, mode);
    q.page = req.page.unwrap_or(1);
    q.page_size = req.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    q.include_duplicates = req.include_duplicates;
    let store = read(&state);
    let page = execute_query(&q, &store)?;
    Ok(Json(SearchResponse {
        detected_apis: detected,
        fallback_mixed: page.fallback_mixed,
        total: page.total,
        page: page.page,
        page_size: page.page_size,
        results: page.results.into_iter().map(|d| to_result(&store, d)).collect(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Highlight {
    pub line: u32,
    /// "secure" or "buggy"; a false positive is shown as secure.
    pub kind: String,
    pub usage_id: String,
    pub api_class: String,
    pub false_positive: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExamplePayload {
    pub key: String,
    pub project_id: String,
    pub source: String,
    pub usages: Vec<UsageRecord>,
    /// One per usage, ordered by line.
    pub highlights: Vec<Highlight>,
}

pub async fn example(State(state): State<AppState>, Path(key): Path<String>) -> ApiResult<ExamplePayload> {
    let ex = read(&state).get_example(&key)?;
    let mut highlights: Vec<Highlight> = ex
        .usages
        .iter()
        .map(|u| Highlight {
            line: u.line,
            kind: if u.effective_secure() { "secure" } else { "buggy" }.into(),
            usage_id: u.usage_id.clone(),
            api_class: u.api_class.clone(),
            false_positive: u.false_positive,
            messages: u.findings.iter().map(|f| format!("{}: {}", f.category, f.message)).collect(),
        })
        .collect();
    highlights.sort_by(|a, b| (a.line, &a.usage_id).cmp(&(b.line, &b.usage_id)));
    Ok(Json(ExamplePayload { key: ex.key, project_id: ex.project_id, source: ex.source, usages: ex.usages, highlights }))
}

pub async fn stats(State(state): State<AppState>) -> Json<jcalens_core::store::StatsSummary> {
    Json(read(&state).stats_summary())
}

pub async fn mark_false_positive(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<UsageRecord> {
    let mut store = state.store.write().unwrap_or_else(|p| p.into_inner());
    Ok(Json(store.mark_false_positive(&id)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeRequest {
    #[serde(default)]
    pub snippet: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzedUsage {
    pub api_class: String,
    pub line: u32,
    pub enclosing_method: String,
    pub secure: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub detected_apis: Vec<String>,
    pub usages: Vec<AnalyzedUsage>,
    pub findings: Vec<Finding>,
    pub parse_error: Option<ParseError>,
}

/// Findings for a pasted piece of code; nothing is stored.
pub fn analyze_snippet(snippet: &str, rules: &RulePack) -> AnalyzeResponse {
    let detected_apis = detect_apis_in_snippet(snippet, rules).apis.into_iter().collect();
    match analyze_file(&SourceFile::new("snippet", snippet), rules) {
        Ok(verdicts) => AnalyzeResponse {
            detected_apis,
            usages: verdicts
                .iter()
                .map(|v| AnalyzedUsage {
                    api_class: v.trace.api_class.clone(),
                    line: v.trace.allocation_line,
                    enclosing_method: v.trace.enclosing_method.clone(),
                    secure: v.secure,
                })
                .collect(),
            findings: verdicts.into_iter().flat_map(|v| v.findings).collect(),
            parse_error: None,
        },
        Err(e) => AnalyzeResponse { detected_apis, usages: Vec::new(), findings: Vec::new(), parse_error: Some(e) },
    }
}

pub async fn analyze(State(state): State<AppState>, body: Result<Json<AnalyzeRequest>, JsonRejection>) -> ApiResult<AnalyzeResponse> {
    let Json(req) = body?;
    if req.snippet.trim().is_empty() {
        return Err(ApiError::bad_request("empty_snippet", "snippet is empty"));
    }
    Ok(Json(analyze_snippet(&req.snippet, &state.rules)))
}

pub fn router(state: AppState, opts: &ServeOptions) -> Router {
    let mut app = Router::new()
        .route("/api/search", post(search))
        .route("/api/examples/{*key}", get(example))
        .route("/api/stats", get(stats))
        .route("/api/usages/{id}/false-positive", post(mark_false_positive))
        .route("/api/analyze", post(analyze))
        .with_state(state);
    if let Some(dir) = &opts.ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if !opts.cors_origins.is_empty() {
        let origin = if opts.cors_origins.iter().any(|o| o == "*") {
            AllowOrigin::any()
        } else {
            AllowOrigin::list(opts.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
        };
        app = app.layer(CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any));
    }
    app
}
