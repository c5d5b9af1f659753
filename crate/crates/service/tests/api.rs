use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tracer_core::query::{evaluate, grep, parse_selector};
use tracer_core::render::{breadcrumbs, expression_values, render_tree, source_to_trace, LineMap, ViewState};
use tracer_core::store::LoadedTrace;
use tracer_service::{router, Service};
use tracer_testkit::fixtures;

fn sources() -> BTreeMap<String, String> {
    fixtures::example().files.into_iter().map(|(f, t)| (f.to_string(), t)).collect()
}

fn service(meta: Option<PathBuf>) -> Arc<Service> {
    let trace = LoadedTrace::from_tree(fixtures::example().tree());
    Arc::new(Service::new(trace, sources(), meta).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

fn collapsed_ids(s: &Service) -> Vec<u64> {
    let mut view = ViewState::default();
    view.collapse_calls_named(&s.trace().tree, "initialize");
    view.collapse_calls_named(&s.trace().tree, "process");
    view.collapsed.into_iter().collect()
}

/// Creates the view of the two-file example with the helper calls collapsed.
async fn example_view(app: &Router, s: &Service) -> String {
    let (status, body) = call(app, Method::POST, "/api/view", Some(json!({ "collapsed": collapsed_ids(s) }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["view_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn lines_match_direct_rendering() {
    let s = service(None);
    let app = router(s.clone());
    let direct = render_tree(&s.trace().tree, &ViewState::default());
    let (status, body) = get(&app, "/api/lines?start=0&count=1000").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["total"], direct.len());
    assert_eq!(body["lines"], serde_json::to_value(&direct).unwrap());

    let (_, page) = get(&app, "/api/lines?start=3&count=2").await;
    assert_eq!(page["lines"], serde_json::to_value(&direct[3..5]).unwrap());
    let (_, past) = get(&app, "/api/lines?start=10000").await;
    assert_eq!(past["lines"], json!([]));
}

#[tokio::test]
async fn breadcrumbs_of_the_return_line() {
    let s = service(None);
    let app = router(s.clone());
    let v = example_view(&app, &s).await;
    let (status, body) = get(&app, &format!("/api/breadcrumbs?view={v}&line=9")).await;
    assert_eq!(status, StatusCode::OK);
    let texts: Vec<&str> = body["breadcrumbs"].as_array().unwrap().iter().map(|l| l["text"].as_str().unwrap()).collect();
    assert_eq!(texts, ["main():", "│   do_it():", "│   │   compute(things ← [2, 3, 5]):"]);

    let mut view = ViewState::default();
    view.collapsed.extend(collapsed_ids(&s));
    let lines = render_tree(&s.trace().tree, &view);
    let direct = breadcrumbs(&s.trace().tree, &view, &lines, 9).unwrap();
    assert_eq!(body["breadcrumbs"], serde_json::to_value(direct).unwrap());

    let (status, _) = get(&app, &format!("/api/breadcrumbs?view={v}&line=999")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn views_are_isolated() {
    let s = service(None);
    let app = router(s.clone());
    let (_, base) = get(&app, "/api/lines?count=1000").await;
    let v = example_view(&app, &s).await;
    let (_, other) = get(&app, &format!("/api/lines?view={v}&count=1000")).await;
    assert_eq!(other["total"], 17);
    let (_, again) = get(&app, "/api/lines?count=1000").await;
    assert_eq!(base, again);

    let do_it = s.trace().index.calls_named("do_it")[0];
    let (status, body) = call(&app, Method::POST, &format!("/api/view/{v}/collapse"), Some(json!({ "node_id": do_it }))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["total"].as_u64().unwrap() < 17);
    let (_, again) = get(&app, "/api/lines?count=1000").await;
    assert_eq!(base, again);
    let (_, body) = call(&app, Method::POST, &format!("/api/view/{v}/expand"), Some(json!({ "node_id": do_it }))).await;
    assert_eq!(body["total"], 17);
}

#[tokio::test]
async fn query_delegates_to_core() {
    let s = service(None);
    let app = router(s.clone());
    for q in ["call[name=compute]", "call[name=do_it] > stmt", "stmt[line=8]", "*"] {
        let uri = format!("/api/query?q={}", q.replace(' ', "%20").replace('>', "%3E").replace('[', "%5B").replace(']', "%5D").replace('=', "%3D"));
        let (status, body) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::OK, "{q}: {body}");
        let direct = evaluate(&parse_selector(q).unwrap(), &s.trace().tree, None);
        let got: Vec<u64> = body["matches"].as_array().unwrap().iter().map(|m| m["node_id"].as_u64().unwrap()).collect();
        assert_eq!(got, direct, "{q}");
        let view = ViewState::default();
        let lines = render_tree(&s.trace().tree, &view);
        let map = LineMap::new(&s.trace().tree, &view, &lines);
        for m in body["matches"].as_array().unwrap() {
            let line = map.line_of(m["node_id"].as_u64().unwrap());
            assert_eq!(m["line_index"], json!(line), "{q}");
            assert_eq!(m["header"], json!(line.map(|i| &lines[i].text)), "{q}");
        }
    }
    let (status, body) = get(&app, "/api/query?q=call%5Bname").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["position"].is_u64(), "{body}");
    assert!(body["expected"].is_array() || body["expected"].is_string(), "{body}");
}

#[tokio::test]
async fn grep_and_occurrences_delegate_to_core() {
    let s = service(None);
    let app = router(s.clone());
    let view = ViewState::default();
    let lines = render_tree(&s.trace().tree, &view);

    let (status, body) = get(&app, "/api/grep?pattern=things").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["matches"], serde_json::to_value(grep(&lines, "things", None).unwrap()).unwrap());
    let (status, _) = get(&app, "/api/grep?pattern=(").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = get(&app, "/api/occurrences?file=logic.py&line=8").await;
    assert_eq!(status, StatusCode::OK);
    let direct = source_to_trace(&s.trace().tree, &view, &s.trace().index, &lines, "logic.py", 8);
    assert_eq!(body["line_indexes"], json!(direct));
    assert_eq!(body["node_ids"], json!(s.trace().index.occurrences("logic.py", 8)));
    let (status, _) = get(&app, "/api/occurrences?file=logic.py").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn source_and_nodes() {
    let s = service(None);
    let app = router(s.clone());
    let (status, body) = get(&app, "/api/source/logic.py").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], fixtures::EXAMPLE_LOGIC);
    assert!(body["executed_lines"].as_array().unwrap().contains(&json!(8)));
    assert_eq!(get(&app, "/api/source/nope.py").await.0, StatusCode::NOT_FOUND);

    let compute = s.trace().index.calls_named("compute")[0];
    let (status, body) = get(&app, &format!("/api/node/{compute}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["name"], "compute");
    assert_eq!(body["kind"], "call");
    assert_eq!(get(&app, "/api/node/999999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/node/abc").await.0, StatusCode::BAD_REQUEST);

    let (_, body) = get(&app, &format!("/api/node/{compute}/stack")).await;
    assert_eq!(body["names"], json!(["main", "do_it", "compute"]));
    assert_eq!(get(&app, "/api/node/999999/stack").await.0, StatusCode::NOT_FOUND);

    let (_, meta) = get(&app, "/api/meta").await;
    assert_eq!(meta["entry"], "main");
    assert_eq!(meta["stats"]["event_count"], s.trace().stats.event_count);
    assert_eq!(get(&app, "/api/lines?view=nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn expression_values_of_the_return() {
    let s = service(None);
    let app = router(s.clone());
    let ret = s.trace().index.occurrences("logic.py", 8)[0];
    let (status, body) = get(&app, &format!("/api/node/{ret}/values")).await;
    assert_eq!(status, StatusCode::OK);
    let direct = expression_values(&s.trace().tree, ret).unwrap();
    let values = body["values"].as_array().unwrap();
    assert_eq!(values.len(), direct.len());
    assert!(!values.is_empty());
    let texts: Vec<&str> = values.iter().map(|v| v["text"].as_str().unwrap()).collect();
    assert!(texts.contains(&"10"), "{texts:?}");
    assert!(texts.contains(&"[2, 3, 5]"), "{texts:?}");
}

#[tokio::test]
async fn density_sums_to_line_count() {
    let s = service(None);
    let app = router(s.clone());
    let (_, lines) = get(&app, "/api/lines?count=1").await;
    let (status, body) = get(&app, "/api/density?buckets=7").await;
    assert_eq!(status, StatusCode::OK);
    let sum: u64 = body["buckets"].as_array().unwrap().iter().map(|b| b.as_u64().unwrap()).sum();
    assert_eq!(sum, lines["total"].as_u64().unwrap());
    assert_eq!(get(&app, "/api/density?buckets=0").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_requests() {
    let s = service(None);
    let app = router(s.clone());
    let post = |uri: &'static str, raw: &'static str| {
        let app = app.clone();
        async move {
            let req = Request::builder().method(Method::POST).uri(uri).body(Body::from(raw)).unwrap();
            app.oneshot(req).await.unwrap().status()
        }
    };
    assert_eq!(post("/api/view", "{not json").await, StatusCode::BAD_REQUEST);
    assert_eq!(post("/api/view", r#"{"collapsed":[1]}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(post("/api/view/0/collapse", "{}").await, StatusCode::BAD_REQUEST);
    assert_eq!(post("/api/view/9/collapse", r#"{"node_id":1}"#).await, StatusCode::NOT_FOUND);
    assert_eq!(post("/api/bookmarks", r#"{"label":"x"}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(post("/api/bookmarks", r#"{"label":"x","node_id":123456}"#).await, StatusCode::NOT_FOUND);
    assert_eq!(post("/api/searches", r#"{"label":"x","selector":"call["}"#).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&app, "/api/lines?start=-1").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn bookmarks_and_searches_persist() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("run.trace.meta.json");
    let s = service(Some(meta.clone()));
    let app = router(s.clone());
    let compute = s.trace().index.calls_named("compute")[0];

    let (status, b) = call(&app, Method::POST, "/api/bookmarks", Some(json!({ "label": "sum", "node_id": compute }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let bid = b["id"].as_u64().unwrap();
    let (status, q) = call(&app, Method::POST, "/api/searches", Some(json!({ "label": "calls", "selector": "call[name=compute]" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let qid = q["id"].as_u64().unwrap();
    let (status, _) = call(&app, Method::PUT, &format!("/api/bookmarks/{bid}"), Some(json!({ "label": "renamed", "node_id": compute }))).await;
    assert_eq!(status, StatusCode::OK);
    drop(app);
    drop(s);

    let s = service(Some(meta.clone()));
    let app = router(s);
    let (_, list) = get(&app, "/api/bookmarks").await;
    assert_eq!(list["bookmarks"][0]["label"], "renamed");
    assert_eq!(list["bookmarks"][0]["node_id"], compute);
    let (_, search) = get(&app, &format!("/api/searches/{qid}")).await;
    assert_eq!(search["selector"], "call[name=compute]");

    assert_eq!(call(&app, Method::DELETE, &format!("/api/bookmarks/{bid}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, Method::DELETE, &format!("/api/bookmarks/{bid}"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, &format!("/api/searches/{qid}"), None).await.0, StatusCode::NO_CONTENT);
    let (_, list) = get(&app, "/api/bookmarks").await;
    assert_eq!(list["bookmarks"], json!([]));
    let (_, fresh) = call(&app, Method::POST, "/api/searches", Some(json!({ "label": "a", "selector": "stmt" }))).await;
    assert!(fresh["id"].as_u64().unwrap() > qid);
}
