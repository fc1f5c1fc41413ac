//! HTTP API over the retrieval pipeline and the annotated corpus.
//!
//! All routes are read-only. JSON error bodies have the shape
//! `{"error": {"code": ..., "message": ...}}`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use judgerag::corpus::{case_type_distribution, AnnotationRecord, AnnotationStore};
use judgerag::providers::Providers;
use judgerag::rag::{answer_query_timed, CaseOverview, QueryTiming, RagConfig, RagError};
use judgerag::vectordb::MetadataFilter;
use judgerag::VectorIndex;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 100;
/// Upper bound on `k` accepted from clients.
pub const MAX_K: usize = 50;

/// Shared, read-only state behind every request.
pub struct AppState {
    providers: Providers,
    rag: RagConfig,
    index: Option<Arc<VectorIndex>>,
    annotations: Option<Arc<AnnotationStore>>,
    summaries: BTreeMap<String, String>,
    max_in_flight: usize,
    in_flight: AtomicUsize,
}

impl AppState {
    pub fn new(providers: Providers, rag: RagConfig) -> Self {
        let max_in_flight = providers.answer_generator.concurrency_cap();
        Self {
            providers,
            rag,
            index: None,
            annotations: None,
            summaries: BTreeMap::new(),
            max_in_flight,
            in_flight: AtomicUsize::new(0),
        }
    }

    pub fn with_index(mut self, index: VectorIndex) -> Self {
        self.index = Some(Arc::new(index));
        self
    }

    pub fn with_annotations(mut self, annotations: AnnotationStore) -> Self {
        self.annotations = Some(Arc::new(annotations));
        self
    }

    /// Summary text per doc id, shown with case details.
    pub fn with_summaries(mut self, summaries: BTreeMap<String, String>) -> Self {
        self.summaries = summaries;
        self
    }

    /// Concurrent queries allowed before answering 429.
    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub query: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub filters: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    #[serde(flatten)]
    pub overview: CaseOverview,
    pub timing: QueryTiming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDetail {
    pub record: AnnotationRecord,
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseListItem {
    pub doc_id: String,
    pub case_name: String,
    pub date: String,
    pub case_type: String,
    pub outcome_of_appellant: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePage {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub items: Vec<CaseListItem>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ListParams {
    #[serde(rename = "type")]
    pub case_type: Option<String>,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "error": { "code": self.code, "message": self.message }
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        let (status, code) = match &e {
            RagError::EmptyQuery | RagError::InvalidConfig(_) => {
                (StatusCode::BAD_REQUEST, "bad_request")
            }
            RagError::FingerprintMismatch { .. } => (StatusCode::CONFLICT, "fingerprint_mismatch"),
            RagError::EmptyIndex => (StatusCode::SERVICE_UNAVAILABLE, "index_empty"),
            RagError::Embedding(_) => (StatusCode::BAD_GATEWAY, "embedding_failed"),
            RagError::ContextBudget { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "context_budget"),
            RagError::Index(_) | RagError::Chunking(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        Self::new(status, code, e.to_string())
    }
}

/// Decrements the in-flight counter when the request finishes.
struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn admit(state: &AppState) -> Option<InFlight<'_>> {
    let prev = state.in_flight.fetch_add(1, Ordering::SeqCst);
    let guard = InFlight(&state.in_flight);
    (prev < state.max_in_flight).then_some(guard)
}

async fn query(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<QueryResponse>, ApiError> {
    let req: QueryRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))?;
    if req.query.trim().is_empty() {
        return Err(ApiError::bad_request("query must not be empty"));
    }
    let mut rag = state.rag.clone();
    if let Some(k) = req.k {
        if k == 0 || k > MAX_K {
            return Err(ApiError::bad_request(format!("k must be between 1 and {MAX_K}")));
        }
        rag.k = k;
    }
    let Some(index) = state.index.clone() else {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "index_not_loaded",
            "no index is loaded",
        ));
    };
    let Some(_slot) = admit(&state) else {
        return Err(ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            "busy",
            "too many concurrent queries",
        ));
    };
    let filter = req.filters.map(MetadataFilter);
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        answer_query_timed(
            &req.query,
            &index,
            &worker.providers,
            worker.annotations.as_deref(),
            &rag,
            filter.as_ref(),
        )
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let (overview, timing) = result?;
    Ok(Json(QueryResponse { overview, timing }))
}

fn annotations(state: &AppState) -> Result<&AnnotationStore, ApiError> {
    state.annotations.as_deref().ok_or_else(|| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "annotations_not_loaded",
            "no annotations are loaded",
        )
    })
}

async fn case_detail(
    State(state): State<Arc<AppState>>,
    Path(doc_id): Path<String>,
) -> Result<Json<CaseDetail>, ApiError> {
    let store = annotations(&state)?;
    let record = store.get(&doc_id).cloned().ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no case `{doc_id}`"))
    })?;
    let summary = state.summaries.get(&doc_id).cloned();
    Ok(Json(CaseDetail { record, summary }))
}

async fn list_cases(
    State(state): State<Arc<AppState>>,
    Query(params): Query<ListParams>,
) -> Result<Json<CasePage>, ApiError> {
    let store = annotations(&state)?;
    let page = params.page.unwrap_or(1);
    let page_size = params.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page == 0 {
        return Err(ApiError::bad_request("page is 1-based"));
    }
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page_size must be between 1 and {MAX_PAGE_SIZE}"
        )));
    }
    let mut matching: Vec<&AnnotationRecord> = store
        .records()
        .iter()
        .filter(|r| params.case_type.as_ref().is_none_or(|t| &r.case_type == t))
        .collect();
    matching.sort_by(|a, b| {
        a.date
            .sort_key()
            .cmp(&b.date.sort_key())
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    let items = matching
        .iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|r| CaseListItem {
            doc_id: r.doc_id.clone(),
            case_name: r.case_name.clone(),
            date: r.date.to_string(),
            case_type: r.case_type.clone(),
            outcome_of_appellant: r.outcome_of_appellant.clone(),
        })
        .collect();
    Ok(Json(CasePage {
        total: matching.len(),
        page,
        page_size,
        items,
    }))
}

async fn stats(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let store = annotations(&state)?;
    Ok(Json(case_type_distribution(store.records())).into_response())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "index_loaded": state.index.is_some(),
        "annotations_loaded": state.annotations.is_some(),
    }))
}

/// The `/api` routes and `/healthz`, with permissive CORS.
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/query", post(query))
        .route("/api/cases", get(list_cases))
        .route("/api/cases/{doc_id}", get(case_detail))
        .route("/api/stats", get(stats))
        .route("/healthz", get(healthz))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// [`router`] plus static files from `ui_dir` for every other path.
pub fn router_with_ui(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = router(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(
    addr: SocketAddr,
    state: Arc<AppState>,
    ui_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router_with_ui(state, ui_dir)).await
}
