use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use jcalens_core::pipeline::{ingest_corpus, pending_ids, run_analysis, NoBlame, RunOptions, DEFAULT_BUDGET};
use jcalens_core::rules::default_rule_pack;
use jcalens_core::store::Store;
use jcalens_server::api::{router, AppState, ServeOptions};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/corpus")
}

fn corpus_store() -> Store {
    let mut store = Store::in_memory();
    ingest_corpus(&corpus(), 100, &mut store).unwrap();
    let rules = default_rule_pack();
    let ids = pending_ids(&store);
    run_analysis(&mut store, &ids, &RunOptions { rules: &rules, budget: DEFAULT_BUDGET, blame: &NoBlame, out_dir: None }).unwrap();
    store
}

fn app(store: Store) -> Router {
    router(AppState::new(store, default_rule_pack()), &ServeOptions::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

const FIG2: &str = include_str!("../../core/fixtures/snippets/cipher_mac.java");

#[tokio::test]
async fn snippet_search_falls_back() {
    let app = app(corpus_store());
    let (s, v) = call(&app, "POST", "/api/search", Some(json!({"snippet": FIG2, "mode": "secure"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["detected_apis"], json!(["Cipher", "Mac"]));
    assert_eq!(v["fallback_mixed"], json!(true));
    assert_eq!(v["total"], json!(2));
    let first = &v["results"][0];
    assert_eq!(first["example_key"], json!("p05-mixed/src/Tunnel.java"));
    assert!(first["preview"]["text"].as_str().unwrap().contains("Mac.getInstance"));
    assert_eq!(first["matched_usages"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn search_validation_and_paging() {
    let app = app(corpus_store());
    let (s, v) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["MessageDigest"], "mode": "safe"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], json!("bad_mode"));
    let (s, v) = call(&app, "POST", "/api/search", Some(json!({}))).await;
    assert_eq!((s, v["code"].clone()), (StatusCode::BAD_REQUEST, json!("empty_query")));
    let (s, _) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["Mac"], "page": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["Mac"], "page_size": 101}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/api/search", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (_, all) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["MessageDigest"]}))).await;
    let total = all["total"].as_u64().unwrap();
    assert_eq!(total, 3);
    let (s, far) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["MessageDigest"], "page": 999}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(far["total"].as_u64().unwrap(), total);
    assert!(far["results"].as_array().unwrap().is_empty());

    // fully qualified names resolve to the rule's class
    let (_, fq) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["java.security.MessageDigest"]}))).await;
    assert_eq!(fq["total"], all["total"]);
}

#[tokio::test]
async fn listing_example_and_false_positive() {
    let app = app(corpus_store());
    let key = "p01-listing/src/main/java/Encryptor.java";
    let (s, v) = call(&app, "GET", &format!("/api/examples/{key}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let hl = v["highlights"].as_array().unwrap();
    assert_eq!(hl.len(), 4);
    let red: Vec<_> = hl.iter().filter(|h| h["kind"] == "buggy").collect();
    assert_eq!(red.len(), 1);
    assert_eq!(red[0]["messages"].as_array().unwrap().len(), 5);
    assert_eq!(red[0]["line"], json!(4));
    assert_eq!(hl.iter().filter(|h| h["kind"] == "secure").count(), 3);
    let lines: Vec<u64> = hl.iter().map(|h| h["line"].as_u64().unwrap()).collect();
    assert!(lines.windows(2).all(|w| w[0] <= w[1]));

    let (s, _) = call(&app, "GET", "/api/examples/nope/X.java", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let buggy_id = red[0]["usage_id"].as_str().unwrap().to_string();
    let secure_id = hl.iter().find(|h| h["kind"] == "secure").unwrap()["usage_id"].as_str().unwrap().to_string();
    let (_, before) = call(&app, "GET", "/api/stats", None).await;

    let uri = format!("/api/usages/{buggy_id}/false-positive");
    let (s, first) = call(&app, "POST", &uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["false_positive"], json!(true));
    assert_eq!(first["findings"].as_array().unwrap().len(), 5);
    let (s, second) = call(&app, "POST", &uri, None).await;
    assert_eq!((s, &second), (StatusCode::OK, &first));

    let (s, v) = call(&app, "POST", &format!("/api/usages/{secure_id}/false-positive"), None).await;
    assert_eq!((s, v["code"].clone()), (StatusCode::CONFLICT, json!("already_secure")));
    let (s, _) = call(&app, "POST", "/api/usages/u000/false-positive", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, after) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(after["usages_buggy"].as_u64().unwrap(), before["usages_buggy"].as_u64().unwrap() - 1);
    let (_, v) = call(&app, "GET", &format!("/api/examples/{key}"), None).await;
    let h = v["highlights"].as_array().unwrap().iter().find(|h| h["usage_id"] == buggy_id.as_str()).unwrap().clone();
    assert_eq!((h["kind"].clone(), h["false_positive"].clone()), (json!("secure"), json!(true)));

    // buggy search no longer returns the listing file
    let (_, v) = call(&app, "POST", "/api/search", Some(json!({"api_names": ["PBEKeySpec"], "mode": "buggy"}))).await;
    assert_eq!(v["total"], json!(0));
}

#[tokio::test]
async fn stats_and_reads_are_stable() {
    let empty = app(Store::in_memory());
    let (s, v) = call(&empty, "GET", "/api/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["usages_total"], json!(0));
    assert_eq!(v["avg_commits_per_project"], json!(0.0));

    let app = app(corpus_store());
    let (_, a) = call(&app, "GET", "/api/stats", None).await;
    let (_, b) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(a, b);
    assert_eq!((a["projects_total"].clone(), a["usages_total"].clone()), (json!(7), json!(15)));
    let body = json!({"api_names": ["Cipher"], "mode": "any"});
    let (_, x) = call(&app, "POST", "/api/search", Some(body.clone())).await;
    let (_, y) = call(&app, "POST", "/api/search", Some(body)).await;
    assert_eq!(x, y);
}

#[tokio::test]
async fn analyze_endpoint() {
    let app = app(Store::in_memory());
    let listing = include_str!("../../core/fixtures/listing1.java");
    let (s, v) = call(&app, "POST", "/api/analyze", Some(json!({"snippet": listing}))).await;
    assert_eq!(s, StatusCode::OK);
    let cats: Vec<&str> = v["findings"].as_array().unwrap().iter().map(|f| f["category"].as_str().unwrap()).collect();
    assert_eq!(cats, ["FORBIDDEN_CALL", "WRONG_TYPE", "WRONG_OBJECT", "WRONG_CONSTRAINT", "INCOMPLETE_OPERATION"]);
    let (_, v) = call(&app, "POST", "/api/analyze", Some(json!({"snippet": "int x=1;"}))).await;
    assert_eq!(v["findings"], json!([]));
    let (s, v) = call(&app, "POST", "/api/analyze", Some(json!({"snippet": "  "}))).await;
    assert_eq!((s, v["code"].clone()), (StatusCode::BAD_REQUEST, json!("empty_snippet")));
    let (s, _) = call(&app, "POST", "/api/analyze", Some(json!({}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    // analysis never touches the store
    let (_, st) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(st["usages_total"], json!(0));
}

#[tokio::test]
async fn cors_and_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>ui</p>").unwrap();
    let opts = ServeOptions { cors_origins: vec!["http://localhost:5173".into()], ui_dir: Some(dir.path().into()) };
    let app = router(AppState::new(Store::in_memory(), default_rule_pack()), &opts);
    let resp = app
        .clone()
        .oneshot(Request::get("/api/stats").header("origin", "http://localhost:5173").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
    let resp = app.oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<p>ui</p>");
}
