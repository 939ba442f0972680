use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use gasketlab::api::{router, AppState};
use gasketlab::session::SessionManager;
use gasketlab_search::catalog::{Catalog, CatalogHeader};
use gasketlab_search::config::SearchConfig;
use gasketlab_search::engine::FixedClock;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> (Router, Arc<AppState>) {
    let catalog = Arc::new(Mutex::new(Catalog::in_memory(CatalogHeader::new(&SearchConfig::default()))));
    let state = Arc::new(AppState {
        sessions: SessionManager::new(catalog.clone(), Box::new(|| Box::new(FixedClock::default()))),
        catalog,
    });
    (router(state.clone()), state)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<(String, String)>, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp
        .headers()
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_str().unwrap_or("").to_string()))
        .collect();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, headers, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<(String, String)>, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, _, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn header_value<'a>(headers: &'a [(String, String)], name: &str) -> Option<&'a str> {
    headers.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

#[tokio::test]
async fn analyze_crossings() {
    let (app, _) = app();
    let (status, v) = post_json(&app, "/api/analyze", json!({ "ifs": "3,0,0;2,-1,0;2,1,1" })).await;
    assert_eq!(status, StatusCode::OK);
    let p = &v["properties"];
    assert_eq!(p["proper_nbs"], 7);
    assert_eq!(p["finite_nbs"], 2);
    assert!((p["boundary_dim"].as_f64().unwrap() - 0.6054).abs() < 1e-4);
    assert_eq!(p["max_degree"], 7);
    assert_eq!(p["neighborhoods"], 19);
    assert_eq!(p["osc"], "satisfied");

    let (status, same) = post_json(&app, "/api/analyze", json!({ "ifs": [[3, 0, 0], [2, -1, 0], [2, 1, 1]] })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(same["properties"], v["properties"]);
    let (_, by_name) = post_json(&app, "/api/analyze", json!({ "ifs": "crossings" })).await;
    assert_eq!(by_name["properties"], v["properties"]);
}

#[tokio::test]
async fn malformed_ifs_is_a_bad_request() {
    let (app, _) = app();
    let (status, v) = post_json(&app, "/api/analyze", json!({ "ifs": "3,0;2,x,0" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "parse");
    assert!(v["message"].as_str().unwrap().contains("3,0;2,x,0"));

    let req = Request::post("/api/analyze")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(send(&app, req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn complexity_is_unprocessable_with_estimate() {
    let (app, _) = app();
    let (status, v) = post_json(&app, "/api/analyze", json!({ "ifs": "crossings", "maxCandidates": 5 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["estimate"], 100);
    assert_eq!(v["limit"], 5);
    assert!(v["count"].as_u64().unwrap() > 5);
}

#[tokio::test]
async fn render_is_idempotent_and_typed() {
    let (app, _) = app();
    for (format, ctype, magic) in [("ppm", "image/x-portable-pixmap", &b"P6"[..]), ("png", "image/png", &b"\x89PNG"[..])] {
        let uri = format!("/api/render?ifs=crossings&px=96&py=64&format={format}");
        let (s1, h1, b1) = get(&app, &uri).await;
        let (s2, _, b2) = get(&app, &uri).await;
        assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
        assert_eq!(header_value(&h1, "content-type"), Some(ctype));
        assert!(b1.starts_with(magic));
        assert_eq!(b1, b2);
    }
    let (status, _, _) = get(&app, "/api/render?ifs=gasket&mode=overlay&px=64&py=64").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn bad_render_window_is_rejected() {
    let (app, _) = app();
    for uri in [
        "/api/render?ifs=gasket&half=0",
        "/api/render?ifs=gasket&half=-1",
        "/api/render?ifs=gasket&px=0",
        "/api/render?ifs=gasket&cx=1",
        "/api/render?ifs=gasket&px=abc",
        "/api/render?ifs=gasket&mode=sketch",
        "/api/render",
    ] {
        let (status, _, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}: {}", String::from_utf8_lossy(&body));
    }
}

#[tokio::test]
async fn search_session_lifecycle() {
    let (app, state) = app();
    let (_, _, idle) = get(&app, "/api/search/status").await;
    let idle: Value = serde_json::from_slice(&idle).unwrap();
    assert_eq!(idle["state"], "idle");

    let cfg = json!({ "seed": 3, "translationRange": 3, "filters": ["dropDisjoint"] });
    let (status, started) = post_json(&app, "/api/search/start", cfg.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let id = started["sessionId"].as_u64().unwrap();

    let (status, conflict) = post_json(&app, "/api/search/start", cfg).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(conflict["sessionId"], id);

    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let (_, _, body) = get(&app, "/api/search/status").await;
        let v: Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["sessionId"], id);
        if v["counters"]["visited"].as_u64().unwrap() > 0 || Instant::now() > deadline {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let (status, _) = post_json(&app, "/api/search/stop", json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let done = tokio::task::spawn_blocking(move || state.sessions.wait()).await.unwrap();
    let done = serde_json::to_value(done).unwrap();
    assert_eq!(done["state"], "idle");
    assert_eq!(done["summary"]["stopped"], true);
    assert!(done["counters"]["visited"].as_u64().unwrap() > 0);

    let (_, _, page) = get(&app, "/api/catalog?limit=1000").await;
    let page: Value = serde_json::from_slice(&page).unwrap();
    let entries = page["entries"].as_array().unwrap();
    assert_eq!(page["total"].as_u64().unwrap() as usize, entries.len());
    assert!(entries.iter().all(|e| e["properties"]["proper_nbs"].as_u64().unwrap() > 0));

    let (status, _) = post_json(&app, "/api/search/start", json!({ "seed": 4, "translationRange": 3 })).await;
    assert_eq!(status, StatusCode::OK);
    post_json(&app, "/api/search/stop", json!({})).await;
}

#[tokio::test]
async fn invalid_search_config_is_rejected() {
    let (app, _) = app();
    let (status, _) = post_json(&app, "/api/search/start", json!({ "filters": ["dropEverything"] })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post_json(&app, "/api/search/start", json!({ "translationRange": 0 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn catalog_unknown_key_lists_valid_keys() {
    let (app, _) = app();
    let (status, _, body) = get(&app, "/api/catalog?holes=3").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&body).unwrap();
    let keys: Vec<&str> = v["validKeys"].as_array().unwrap().iter().map(|k| k.as_str().unwrap()).collect();
    assert!(keys.contains(&"boundary_dim"));
    assert!(keys.contains(&"proper_nbs"));

    let (status, _, body) = get(&app, "/api/catalog?sort=boundary_dim&order=desc&proper_nbs=1..").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["total"], 0);
}

#[tokio::test]
async fn neighbor_graph_exports() {
    let (app, _) = app();
    let (status, _, body) = get(&app, "/api/neighbor-graph?ifs=gasket").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["proper"], 6);
    assert_eq!(v["verdict"], "satisfied");

    let (_, _, all) = get(&app, "/api/neighbor-graph?ifs=gasket&pruned=false").await;
    let all: Value = serde_json::from_slice(&all).unwrap();
    assert_eq!(all["candidates"], 8);

    let (status, headers, dot) = get(&app, "/api/neighbor-graph?ifs=crossings&format=dot").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(header_value(&headers, "content-type"), Some("text/vnd.graphviz"));
    assert!(String::from_utf8(dot).unwrap().starts_with("digraph"));

    let (_, _, nb) = get(&app, "/api/neighbor-graph?ifs=crossings&neighborhoods=true").await;
    let nb: Value = serde_json::from_slice(&nb).unwrap();
    assert!(nb["neighborhoods"].is_object());

    let (status, _, _) = get(&app, "/api/neighbor-graph?ifs=gasket&format=svg").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn fixtures_and_cors() {
    let (app, _) = app();
    let req = Request::get("/api/fixtures")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let (status, headers, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(header_value(&headers, "access-control-allow-origin"), Some("*"));
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert!(v.as_array().unwrap().iter().any(|f| f["name"] == "crossings"));
}
