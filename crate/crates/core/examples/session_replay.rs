//! Drive the HTTP API in-process: load, transform, undo, then replay the
//! exported log into a new session and compare tiles.

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use hapview::service::{router, AppState, ServiceConfig};
use hapview::synth::Cohort;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::main]
async fn main() {
    let app = router(AppState::new(ServiceConfig::default()));
    let vcf = Cohort::random(11, 30, 120).vcf();
    let (_, body) = call(&app, Method::POST, "/datasets", Some(json!({"format": "vcf", "content": vcf}))).await;
    let ds = json(&body)["datasetId"].as_str().unwrap().to_string();
    let (_, body) = call(&app, Method::POST, "/sessions", Some(json!({"datasetId": ds}))).await;
    let sid = json(&body)["sessionId"].as_str().unwrap().to_string();

    for step in [
        json!({"op": "filter_frequency", "threshold": 0.1, "mode": "above"}),
        json!({"op": "select", "rows": [0, 1, 2, 3, 4]}),
        json!({"op": "aggregate_rows", "grouping": "selection"}),
        json!({"op": "filter_regex", "pattern": "7$"}),
    ] {
        let (status, body) = call(&app, Method::POST, &format!("/sessions/{sid}/steps"), Some(step)).await;
        let view = json(&body);
        println!("apply -> {status}: {} rows x {} cols, version {}", view["nRows"], view["nCols"], view["version"]);
    }
    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{sid}/steps/last"), None).await;
    println!("undo  -> {status}");

    let (_, log) = call(&app, Method::GET, &format!("/sessions/{sid}/log"), None).await;
    println!("log: {}", String::from_utf8_lossy(&log));
    let (_, body) = call(&app, Method::POST, "/sessions", Some(json!({"datasetId": ds, "steps": json(&log)["steps"]}))).await;
    let replayed = json(&body)["sessionId"].as_str().unwrap().to_string();

    let tile = |id: String| {
        let app = app.clone();
        async move { call(&app, Method::GET, &format!("/sessions/{id}/tile?rows=0..10&cols=0..20"), None).await.1 }
    };
    println!("replayed tile identical: {}", tile(sid).await == tile(replayed).await);
}
