//! HTTP+JSON API over one loaded trace: paged rendering per view,
//! breadcrumbs, queries, text search, source mapping, node inspection,
//! bookmarks and saved searches.
//!
//! Every read endpoint encodes the result of one core operation. Views are
//! server-side collapse states addressed by an opaque token; view `0` exists
//! from the start.

pub mod meta;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json_};
use tower_http::cors::CorsLayer;
use tracer_core::model::{NodeId, NodeKind, TraceNode};
use tracer_core::query::{evaluate, grep, parse_selector};
use tracer_core::render::{
    breadcrumbs, density, expression_values, render_tree, source_to_trace, LineMap, RenderedLine, ViewState,
};
use tracer_core::store::LoadedTrace;
use tracer_core::tracer::EventBody;

pub use meta::{meta_path, Bookmark, Meta, SavedSearch};

/// The id of the view that exists from startup.
pub const DEFAULT_VIEW: &str = "0";
/// Largest page `/api/lines` returns.
pub const MAX_PAGE: usize = 10_000;

pub struct View {
    pub state: ViewState,
    pub lines: Vec<RenderedLine>,
}

pub struct Service {
    trace: LoadedTrace,
    sources: BTreeMap<String, String>,
    views: RwLock<HashMap<String, Arc<View>>>,
    next_view: AtomicU64,
    meta: Mutex<Meta>,
    meta_file: Option<PathBuf>,
}

impl Service {
    /// `sources` maps file names as they appear in spans to their text.
    /// Bookmarks and searches persist to `meta_file` when given.
    pub fn new(trace: LoadedTrace, sources: BTreeMap<String, String>, meta_file: Option<PathBuf>) -> std::io::Result<Self> {
        let meta = match &meta_file {
            Some(p) => Meta::load(p)?,
            None => Meta::default(),
        };
        let service = Self {
            trace,
            sources,
            views: RwLock::new(HashMap::new()),
            next_view: AtomicU64::new(1),
            meta: Mutex::new(meta),
            meta_file,
        };
        let first = service.make_view(ViewState::default());
        service.views.write().unwrap().insert(DEFAULT_VIEW.to_string(), first);
        Ok(service)
    }

    pub fn trace(&self) -> &LoadedTrace {
        &self.trace
    }

    fn make_view(&self, state: ViewState) -> Arc<View> {
        let lines = render_tree(&self.trace.tree, &state);
        Arc::new(View { state, lines })
    }

    pub fn view(&self, id: &str) -> Option<Arc<View>> {
        self.views.read().unwrap().get(id).cloned()
    }

    fn persist(&self, meta: &Meta) -> Result<(), ApiError> {
        if let Some(p) = &self.meta_file {
            meta.save(p).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        }
        Ok(())
    }
}

/// Reads every `.py` file directly inside `dir`, keyed by file name.
pub fn sources_from_dir(dir: &std::path::Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "py") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                out.insert(name.to_string(), std::fs::read_to_string(&path)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Json_,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn missing(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Query-string extractor whose rejection is a JSON 400.
struct Query<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Query(q.0))
            .map_err(|e| ApiError::bad(e.body_text()))
    }
}

/// Path extractor whose rejection is a JSON 400.
struct Path<T>(T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for Path<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        axum::extract::Path::<T>::from_request_parts(parts, state)
            .await
            .map(|p| Path(p.0))
            .map_err(|e| ApiError::bad(e.body_text()))
    }
}

type ApiResult = Result<Json<Json_>, ApiError>;
type Shared = State<Arc<Service>>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad(format!("malformed body: {e}")))
}

fn view_of(s: &Service, id: Option<&str>) -> Result<Arc<View>, ApiError> {
    let id = id.unwrap_or(DEFAULT_VIEW);
    s.view(id).ok_or_else(|| ApiError::missing(format!("unknown view '{id}'")))
}

fn node_of(s: &Service, id: NodeId) -> Result<&TraceNode, ApiError> {
    s.trace.tree.node(id).ok_or_else(|| ApiError::missing(format!("unknown node {id}")))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/meta", get(meta_info))
        .route("/api/lines", get(lines))
        .route("/api/breadcrumbs", get(crumbs))
        .route("/api/query", get(query))
        .route("/api/grep", get(grep_lines))
        .route("/api/occurrences", get(occurrences))
        .route("/api/source/{file}", get(source))
        .route("/api/node/{id}", get(node))
        .route("/api/node/{id}/values", get(values))
        .route("/api/node/{id}/stack", get(stack))
        .route("/api/density", get(density_of))
        .route("/api/view", post(create_view))
        .route("/api/view/{v}/collapse", post(collapse))
        .route("/api/view/{v}/expand", post(expand))
        .route("/api/bookmarks", get(list_bookmarks).post(add_bookmark))
        .route(
            "/api/bookmarks/{id}",
            get(get_bookmark).put(update_bookmark).delete(delete_bookmark),
        )
        .route("/api/searches", get(list_searches).post(add_search))
        .route(
            "/api/searches/{id}",
            get(get_search).put(update_search).delete(delete_search),
        )
        .layer(CorsLayer::permissive())
        .with_state(service)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn meta_info(State(s): Shared) -> ApiResult {
    let views: Vec<String> = s.views.read().unwrap().keys().cloned().collect();
    let entry = match &s.trace.tree.root().body {
        EventBody::RunBegin { entry } => entry.to_string(),
        _ => String::new(),
    };
    Ok(Json(json!({
        "entry": entry,
        "stats": s.trace.stats,
        "files": s.sources.keys().collect::<Vec<_>>(),
        "views": views,
        "error": s.trace.tree.error().map(node_json),
    })))
}

#[derive(Deserialize)]
struct LinesQuery {
    view: Option<String>,
    start: Option<usize>,
    count: Option<usize>,
}

async fn lines(State(s): Shared, Query(q): Query<LinesQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let total = view.lines.len();
    let start = q.start.unwrap_or(0).min(total);
    let count = q.count.unwrap_or(100).min(MAX_PAGE);
    let end = start.saturating_add(count).min(total);
    Ok(Json(json!({ "total": total, "start": start, "lines": &view.lines[start..end] })))
}

#[derive(Deserialize)]
struct LineQuery {
    view: Option<String>,
    line: usize,
}

async fn crumbs(State(s): Shared, Query(q): Query<LineQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let out = breadcrumbs(&s.trace.tree, &view.state, &view.lines, q.line)
        .map_err(|e| ApiError::bad(e.to_string()))?;
    Ok(Json(json!({ "line": q.line, "breadcrumbs": out })))
}

#[derive(Deserialize)]
struct SelectorQuery {
    view: Option<String>,
    q: String,
}

/// One match of a query: the node, the line that shows it in the view, and
/// that line's text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryMatch {
    pub node_id: NodeId,
    pub line_index: Option<usize>,
    pub header: Option<String>,
}

fn selector_error(e: tracer_core::query::SelectorSyntaxError) -> ApiError {
    ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        body: json!({ "error": e.to_string(), "position": e.position, "expected": e.expected }),
    }
}

async fn query(State(s): Shared, Query(q): Query<SelectorQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let selector = parse_selector(&q.q).map_err(selector_error)?;
    let ids = evaluate(&selector, &s.trace.tree, Some(&s.trace.index));
    let map = LineMap::new(&s.trace.tree, &view.state, &view.lines);
    let matches: Vec<QueryMatch> = ids
        .into_iter()
        .map(|id| {
            let line_index = map.line_of(id);
            QueryMatch {
                node_id: id,
                line_index,
                header: line_index.map(|i| view.lines[i].text.clone()),
            }
        })
        .collect();
    Ok(Json(json!({ "selector": selector.to_string(), "matches": matches })))
}

#[derive(Deserialize)]
struct GrepQuery {
    view: Option<String>,
    pattern: String,
    max: Option<usize>,
}

async fn grep_lines(State(s): Shared, Query(q): Query<GrepQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let matches = grep(&view.lines, &q.pattern, q.max).map_err(|e| ApiError::bad(e.to_string()))?;
    Ok(Json(json!({ "matches": matches })))
}

#[derive(Deserialize)]
struct OccurrenceQuery {
    view: Option<String>,
    file: String,
    line: u32,
}

async fn occurrences(State(s): Shared, Query(q): Query<OccurrenceQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let ids = s.trace.index.occurrences(&q.file, q.line);
    let lines = source_to_trace(&s.trace.tree, &view.state, &s.trace.index, &view.lines, &q.file, q.line);
    Ok(Json(json!({ "node_ids": ids, "line_indexes": lines })))
}

async fn source(State(s): Shared, Path(file): Path<String>) -> ApiResult {
    let text = s
        .sources
        .get(&file)
        .ok_or_else(|| ApiError::missing(format!("no source for '{file}'")))?;
    let executed: Vec<u32> = s
        .trace
        .index
        .executed_lines()
        .into_iter()
        .filter(|(f, _)| **f == *file)
        .map(|(_, l)| l)
        .collect();
    Ok(Json(json!({ "file": file, "text": text, "executed_lines": executed })))
}

/// JSON form of a node with its kind-specific attributes.
pub fn node_json(n: &TraceNode) -> Json_ {
    let mut out = json!({
        "id": n.id,
        "kind": n.kind,
        "span": n.span,
        "parent": n.parent,
        "children": n.children,
        "unclosed": n.is_unclosed(),
    });
    let attrs = out.as_object_mut().expect("object");
    match &n.body {
        EventBody::CallEnter { name, expr, args } => {
            attrs.insert("name".into(), json!(name));
            attrs.insert("expr".into(), json!(expr));
            let args: Vec<Json_> = args.iter().map(|b| json!({ "var": b.var, "value": b.value })).collect();
            attrs.insert("args".into(), Json_::Array(args));
        }
        EventBody::StmtBegin { text } | EventBody::LoopEnter { text } => {
            attrs.insert("text".into(), json!(text));
        }
        EventBody::IterBegin { index } => {
            attrs.insert("idx".into(), json!(index));
        }
        EventBody::Eval { expr, value, builtin } => {
            attrs.insert("expr".into(), json!(expr));
            attrs.insert("value".into(), json!(value));
            if let Some(b) = builtin {
                attrs.insert("name".into(), json!(b));
            }
        }
        EventBody::Bind { var, value } => {
            attrs.insert("var".into(), json!(var));
            attrs.insert("value".into(), json!(value));
        }
        EventBody::Ret { value } => {
            attrs.insert("value".into(), json!(value));
        }
        EventBody::Output { text } => {
            attrs.insert("text".into(), json!(text));
        }
        EventBody::Error { message } => {
            attrs.insert("message".into(), json!(message));
        }
        EventBody::RunBegin { entry } => {
            attrs.insert("entry".into(), json!(entry));
        }
        _ => {}
    }
    out
}

async fn node(State(s): Shared, Path(id): Path<NodeId>) -> ApiResult {
    Ok(Json(node_json(node_of(&s, id)?)))
}

async fn values(State(s): Shared, Path(id): Path<NodeId>) -> ApiResult {
    let pairs = expression_values(&s.trace.tree, id).map_err(|e| ApiError::missing(e.to_string()))?;
    let values: Vec<Json_> = pairs
        .into_iter()
        .map(|(span, value)| json!({ "span": span, "value": value, "text": value.to_string() }))
        .collect();
    Ok(Json(json!({ "node_id": id, "values": values })))
}

async fn stack(State(s): Shared, Path(id): Path<NodeId>) -> ApiResult {
    let ids = s.trace.tree.stack_at(id).map_err(|e| ApiError::missing(e.to_string()))?;
    let names: Vec<Option<&str>> = ids.iter().map(|c| s.trace.tree.get(*c).name()).collect();
    Ok(Json(json!({ "node_id": id, "stack": ids, "names": names })))
}

#[derive(Deserialize)]
struct DensityQuery {
    view: Option<String>,
    buckets: Option<usize>,
}

async fn density_of(State(s): Shared, Query(q): Query<DensityQuery>) -> ApiResult {
    let view = view_of(&s, q.view.as_deref())?;
    let buckets = q.buckets.unwrap_or(100);
    if buckets == 0 || buckets > 100_000 {
        return Err(ApiError::bad("buckets must be between 1 and 100000"));
    }
    Ok(Json(json!({ "buckets": density(&s.trace.tree, &view.lines, buckets) })))
}

fn check_collapsible(s: &Service, state: &ViewState) -> Result<(), ApiError> {
    match state.invalid_collapsed(&s.trace.tree).first() {
        Some(id) => Err(ApiError::bad(format!("node {id} is not a call or loop of this trace"))),
        None => Ok(()),
    }
}

async fn create_view(State(s): Shared, raw: Bytes) -> ApiResult {
    let state: ViewState = if raw.is_empty() { ViewState::default() } else { body(&raw)? };
    check_collapsible(&s, &state)?;
    let id = s.next_view.fetch_add(1, Ordering::Relaxed).to_string();
    let view = s.make_view(state);
    let total = view.lines.len();
    s.views.write().unwrap().insert(id.clone(), view);
    Ok(Json(json!({ "view_id": id, "total": total })))
}

#[derive(Deserialize)]
struct NodeBody {
    node_id: NodeId,
}

fn change_view(s: &Service, v: &str, raw: &Bytes, collapse: bool) -> ApiResult {
    if s.view(v).is_none() {
        return Err(ApiError::missing(format!("unknown view '{v}'")));
    }
    let NodeBody { node_id } = body(raw)?;
    let node = node_of(s, node_id)?;
    if !matches!(node.kind, NodeKind::Call | NodeKind::Loop) {
        return Err(ApiError::bad(format!("node {node_id} is a {}, not a call or loop", node.kind)));
    }
    let mut views = s.views.write().unwrap();
    let current = views.get(v).ok_or_else(|| ApiError::missing(format!("unknown view '{v}'")))?;
    let mut state = current.state.clone();
    if collapse {
        state.collapsed.insert(node_id);
    } else {
        state.collapsed.remove(&node_id);
    }
    let view = s.make_view(state);
    let total = view.lines.len();
    views.insert(v.to_string(), view);
    Ok(Json(json!({ "view_id": v, "total": total })))
}

async fn collapse(State(s): Shared, Path(v): Path<String>, raw: Bytes) -> ApiResult {
    change_view(&s, &v, &raw, true)
}

async fn expand(State(s): Shared, Path(v): Path<String>, raw: Bytes) -> ApiResult {
    change_view(&s, &v, &raw, false)
}

#[derive(Deserialize)]
struct BookmarkBody {
    label: String,
    node_id: NodeId,
}

async fn list_bookmarks(State(s): Shared) -> ApiResult {
    Ok(Json(json!({ "bookmarks": s.meta.lock().unwrap().bookmarks })))
}

async fn add_bookmark(State(s): Shared, raw: Bytes) -> Result<(StatusCode, Json<Json_>), ApiError> {
    let b: BookmarkBody = body(&raw)?;
    node_of(&s, b.node_id)?;
    let mut meta = s.meta.lock().unwrap();
    let bookmark = Bookmark {
        id: meta.take_id(),
        label: b.label,
        node_id: b.node_id,
        created_at: meta::now(),
    };
    meta.bookmarks.push(bookmark.clone());
    s.persist(&meta)?;
    Ok((StatusCode::CREATED, Json(json!(bookmark))))
}

async fn get_bookmark(State(s): Shared, Path(id): Path<u64>) -> ApiResult {
    let meta = s.meta.lock().unwrap();
    let b = meta.bookmarks.iter().find(|b| b.id == id).ok_or_else(|| ApiError::missing(format!("unknown bookmark {id}")))?;
    Ok(Json(json!(b)))
}

async fn update_bookmark(State(s): Shared, Path(id): Path<u64>, raw: Bytes) -> ApiResult {
    let upd: BookmarkBody = body(&raw)?;
    node_of(&s, upd.node_id)?;
    let mut meta = s.meta.lock().unwrap();
    let b = meta.bookmarks.iter_mut().find(|b| b.id == id).ok_or_else(|| ApiError::missing(format!("unknown bookmark {id}")))?;
    b.label = upd.label;
    b.node_id = upd.node_id;
    let out = json!(b);
    s.persist(&meta)?;
    Ok(Json(out))
}

async fn delete_bookmark(State(s): Shared, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    let mut meta = s.meta.lock().unwrap();
    let before = meta.bookmarks.len();
    meta.bookmarks.retain(|b| b.id != id);
    if meta.bookmarks.len() == before {
        return Err(ApiError::missing(format!("unknown bookmark {id}")));
    }
    s.persist(&meta)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct SearchBody {
    label: String,
    selector: String,
}

fn canonical(selector: &str) -> Result<String, ApiError> {
    parse_selector(selector).map(|s| s.to_string()).map_err(selector_error)
}

async fn list_searches(State(s): Shared) -> ApiResult {
    Ok(Json(json!({ "searches": s.meta.lock().unwrap().searches })))
}

async fn add_search(State(s): Shared, raw: Bytes) -> Result<(StatusCode, Json<Json_>), ApiError> {
    let b: SearchBody = body(&raw)?;
    canonical(&b.selector)?;
    let mut meta = s.meta.lock().unwrap();
    let search = SavedSearch {
        id: meta.take_id(),
        label: b.label,
        selector: b.selector,
        created_at: meta::now(),
    };
    meta.searches.push(search.clone());
    s.persist(&meta)?;
    Ok((StatusCode::CREATED, Json(json!(search))))
}

async fn get_search(State(s): Shared, Path(id): Path<u64>) -> ApiResult {
    let meta = s.meta.lock().unwrap();
    let b = meta.searches.iter().find(|b| b.id == id).ok_or_else(|| ApiError::missing(format!("unknown search {id}")))?;
    Ok(Json(json!(b)))
}

async fn update_search(State(s): Shared, Path(id): Path<u64>, raw: Bytes) -> ApiResult {
    let upd: SearchBody = body(&raw)?;
    canonical(&upd.selector)?;
    let mut meta = s.meta.lock().unwrap();
    let b = meta.searches.iter_mut().find(|b| b.id == id).ok_or_else(|| ApiError::missing(format!("unknown search {id}")))?;
    b.label = upd.label;
    b.selector = upd.selector;
    let out = json!(b);
    s.persist(&meta)?;
    Ok(Json(out))
}

async fn delete_search(State(s): Shared, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    let mut meta = s.meta.lock().unwrap();
    let before = meta.searches.len();
    meta.searches.retain(|b| b.id != id);
    if meta.searches.len() == before {
        return Err(ApiError::missing(format!("unknown search {id}")));
    }
    s.persist(&meta)?;
    Ok(StatusCode::NO_CONTENT)
}
