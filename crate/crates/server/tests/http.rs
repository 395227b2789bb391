use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use ecolayout_core::{EngineParams, SessionService};
use ecolayout_server::{open_service, router, AppState, JOURNAL_FILE};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

fn app() -> Router {
    let state = AppState::new(open_service(None, EngineParams::default()).unwrap());
    router(state)
}

async fn call(app: &Router, method: &str, uri: &str, user: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(u) = user {
        req = req.header("X-User-Id", u);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn reads_the_initial_state() {
    let app = app();
    let (st, state) = call(&app, "GET", "/state", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(state["step"], 1);
    assert_eq!(state["version"], 0);
    let (_, session) = call(&app, "GET", "/session", None, None).await;
    assert_eq!(session["layers"].as_array().unwrap().len(), 3);
    let (_, eco) = call(&app, "GET", "/ecology", None, None).await;
    assert_eq!(eco["displays"].as_array().unwrap().len(), 3);
    let (st, layout) = call(&app, "GET", "/layout", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(layout["placements"].as_array().unwrap().len(), 6);
    let (st, _) = call(&app, "GET", "/layout?step=3", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn mutations_need_a_user() {
    let app = app();
    let (st, err) = call(&app, "POST", "/step/advance", None, None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("X-User-Id"));
    let (st, _) = call(&app, "POST", "/step/advance", Some("system"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn events_bump_the_version_once() {
    let app = app();
    let (st, u) = call(&app, "POST", "/events", Some("red"), Some(json!({"kind": "doi_change", "view": "overview_1", "doi": 0.9}))).await;
    assert_eq!(st, StatusCode::OK, "{u}");
    assert_eq!(u["version"], 1);
    assert!(u["layout_event"].is_number());
    let (st, err) = call(&app, "POST", "/events", Some("red"), Some(json!({"kind": "doi_change", "view": "nope", "doi": 0.9}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    let (st, _) = call(&app, "POST", "/events", Some("red"), Some(json!({"kind": "layout_computed", "step": 1, "placements": []}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, state) = call(&app, "GET", "/state", None, None).await;
    assert_eq!(state["version"], 1);
}

#[tokio::test]
async fn steps_undo_and_redo() {
    let app = app();
    let (st, u) = call(&app, "POST", "/step/advance", Some("green"), None).await;
    assert_eq!((st, u["version"].as_u64()), (StatusCode::OK, Some(1)));
    let (_, l2) = call(&app, "GET", "/layout?step=2", None, None).await;
    assert_eq!(l2["step"], 2);
    let (st, _) = call(&app, "POST", "/step/goto", Some("green"), Some(json!({"step": 99}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = call(&app, "POST", "/undo", Some("green"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(call(&app, "GET", "/state", None, None).await.1["step"], 1);
    let (st, _) = call(&app, "POST", "/redo", Some("green"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(call(&app, "GET", "/state", None, None).await.1["step"], 2);
    let (st, _) = call(&app, "POST", "/redo", Some("green"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&app, "POST", "/checkout", Some("green"), Some(json!({"event": 9999}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn log_graph_query_and_selective_undo() {
    let app = app();
    call(&app, "POST", "/events", Some("red"), Some(json!({"kind": "doi_change", "view": "overview_1", "doi": 0.2}))).await;
    call(&app, "POST", "/events", Some("blue"), Some(json!({"kind": "finding_annotated", "text": "edges look noisy"}))).await;
    let (_, graph) = call(&app, "GET", "/log/graph", None, None).await;
    assert!(graph["nodes"].as_array().unwrap().len() >= 4);
    let (_, red) = call(&app, "GET", "/log/query?actor=red", None, None).await;
    assert_eq!(red.as_array().unwrap().len(), 1);
    let (_, findings) = call(&app, "GET", "/log/query?findings=true", None, None).await;
    assert_eq!(findings.as_array().unwrap().len(), 1);
    let (st, _) = call(&app, "GET", "/log/query?kind=bogus", None, None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, out) = call(&app, "POST", "/selective-undo", Some("blue"), Some(json!({"actors": ["red"]}))).await;
    assert_eq!(st, StatusCode::OK, "{out}");
    assert_eq!(out["dropped"].as_array().unwrap().len(), 1);
    let (_, session) = call(&app, "GET", "/session", None, None).await;
    let v = session["views"].as_array().unwrap().iter().find(|v| v["id"] == "overview_1").unwrap().clone();
    assert_eq!(v["doi"], 0.6);
}

#[tokio::test]
async fn maps_interactions() {
    let app = app();
    let hit = json!({"device": "wand", "kind": "point", "ray": {"origin_m": [0.0, -3.0, 1.7], "dir": [0.0, 1.0, 0.0]}, "actor": "red"});
    let (st, m) = call(&app, "POST", "/interactions", None, Some(hit)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(m["display"], "display_2");
    let miss = json!({"device": "wand", "kind": "point", "ray": {"origin_m": [0.0, -3.0, 1.7], "dir": [0.0, -1.0, 0.0]}, "actor": "red"});
    assert_eq!(call(&app, "POST", "/interactions", None, Some(miss)).await.1, Value::Null);
    let both = json!({"device": "wand", "kind": "point", "actor": "red"});
    assert_eq!(call(&app, "POST", "/interactions", None, Some(both)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn replaces_ecology() {
    let app = app();
    let (_, mut eco) = call(&app, "GET", "/ecology", None, None).await;
    eco["displays"][2]["connected"] = json!(false);
    let (st, u) = call(&app, "PUT", "/ecology", Some("red"), Some(eco)).await;
    assert_eq!(st, StatusCode::OK, "{u}");
    let (_, layout) = call(&app, "GET", "/layout", None, None).await;
    assert!(layout["placements"].as_array().unwrap().iter().all(|p| p["display"] != "display_3"));
}

#[tokio::test]
async fn journal_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    {
        let app = router(AppState::new(open_service(Some(dir.path()), EngineParams::default()).unwrap()));
        call(&app, "POST", "/step/advance", Some("red"), None).await;
        call(&app, "POST", "/events", Some("red"), Some(json!({"kind": "finding_annotated", "text": "x"}))).await;
    }
    let restored = SessionService::restore(&dir.path().join(JOURNAL_FILE), EngineParams::default()).unwrap();
    assert_eq!(restored.state().live.step, 2);
    let app = router(AppState::new(open_service(Some(dir.path()), EngineParams::default()).unwrap()));
    let (_, state) = call(&app, "GET", "/state", None, None).await;
    assert_eq!(state["step"], 2);
    assert_eq!(state["events"].as_u64(), Some(restored.state().log.len() as u64));
}

#[tokio::test]
async fn concurrent_posts_lose_nothing() {
    let app = app();
    let tasks: Vec<_> = (0..12)
        .map(|k| {
            let app = app.clone();
            tokio::spawn(async move {
                let text = format!("note {k}");
                call(&app, "POST", "/events", Some(["red", "green", "blue"][k % 3]), Some(json!({"kind": "finding_annotated", "text": text}))).await
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let (_, summary) = call(&app, "GET", "/state", None, None).await;
    assert_eq!(summary["version"], 12);
    let (_, findings) = call(&app, "GET", "/log/query?findings=true", None, None).await;
    assert_eq!(findings.as_array().unwrap().len(), 12);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_announces_updates() {
    let app = app();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = app.clone();
    tokio::spawn(async move { axum::serve(listener, server).await.unwrap() });

    let mut sock = tokio::net::TcpStream::connect(addr).await.unwrap();
    sock.write_all(b"GET /stream HTTP/1.1\r\nHost: test\r\nAccept: text/event-stream\r\n\r\n").await.unwrap();
    let mut seen = String::new();
    let mut buf = [0u8; 4096];
    while !seen.contains("event: hello") {
        let n = sock.read(&mut buf).await.unwrap();
        seen.push_str(&String::from_utf8_lossy(&buf[..n]));
    }
    call(&app, "POST", "/step/advance", Some("red"), None).await;
    let deadline = tokio::time::Instant::now() + std::time::Duration::from_secs(20);
    while !seen.contains("event: update") {
        let n = tokio::time::timeout_at(deadline, sock.read(&mut buf)).await.unwrap().unwrap();
        seen.push_str(&String::from_utf8_lossy(&buf[..n]));
    }
    assert!(seen.contains("\"version\":1"), "{seen}");
}
