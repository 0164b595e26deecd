#![allow(dead_code)]

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use hapview::service::{router, AppState, ServiceConfig};

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub fn app_with_root(root: &std::path::Path) -> Router {
    router(AppState::new(ServiceConfig { data_root: root.to_path_buf(), ..ServiceConfig::default() }))
}

pub fn app() -> Router {
    router(AppState::new(ServiceConfig::default()))
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body)).await
}

/// Load inline VCF text with optional subject/variant meta; returns the dataset id.
pub async fn load_vcf(app: &Router, vcf: &str, subject_meta: Option<&str>, variant_meta: Option<&str>) -> String {
    let mut req = json!({ "format": "vcf", "content": vcf });
    if let Some(m) = subject_meta {
        req["subjectMeta"] = json!([{ "name": "subjects", "content": m }]);
    }
    if let Some(m) = variant_meta {
        req["variantMeta"] = json!([{ "name": "variants", "content": m }]);
    }
    let r = post(app, "/datasets", req).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.json()["datasetId"].as_str().unwrap().to_string()
}

pub async fn new_session(app: &Router, dataset_id: &str) -> String {
    let r = post(app, "/sessions", json!({ "datasetId": dataset_id })).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.json()["sessionId"].as_str().unwrap().to_string()
}

pub async fn step(app: &Router, session: &str, step: Value) -> Reply {
    post(app, &format!("/sessions/{session}/steps"), step).await
}

/// Tile decoder written from the byte layout alone, independent of the
/// library's implementation. Returns `None` for anything malformed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefTile {
    pub flags: u8,
    pub row_start: u32,
    pub col_start: u32,
    pub n_rows: usize,
    pub n_cols: usize,
    pub codes: Vec<u8>,
    pub freqs: Option<Vec<u8>>,
}

pub fn reference_decode(b: &[u8]) -> Option<RefTile> {
    if b.len() < 16 || &b[0..4] != b"IPHT" || b[4] != 1 || b[5] > 3 {
        return None;
    }
    let flags = b[5];
    let row_start = b[6] as u32 | (b[7] as u32) << 8 | (b[8] as u32) << 16;
    let col_start = b[9] as u32 | (b[10] as u32) << 8 | (b[11] as u32) << 16;
    let n_rows = (b[12] as usize) | (b[13] as usize) << 8;
    let n_cols = (b[14] as usize) | (b[15] as usize) << 8;
    let cells = n_rows * n_cols;
    let planes = if flags & 1 == 1 { 2 } else { 1 };
    if b.len() != 16 + planes * cells {
        return None;
    }
    let codes = b[16..16 + cells].to_vec();
    if codes.iter().any(|&c| c > 4) {
        return None;
    }
    let freqs = (planes == 2).then(|| b[16 + cells..].to_vec());
    Some(RefTile { flags, row_start, col_start, n_rows, n_cols, codes, freqs })
}

/// Independent VCF genotype reader used as a truth oracle: returns
/// `(subject ids, [subject][variant] (paternal, maternal) as chars)`, with
/// '.' for missing and only single-base REF/ALT records kept.
pub fn naive_vcf(text: &str) -> (Vec<String>, Vec<Vec<(char, char)>>) {
    let mut subjects = Vec::new();
    let mut calls: Vec<Vec<(char, char)>> = Vec::new();
    for line in text.lines() {
        if line.starts_with("##") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if line.starts_with('#') {
            subjects = fields[9..].iter().map(|s| s.to_string()).collect();
            calls = vec![Vec::new(); subjects.len()];
            continue;
        }
        let alleles: Vec<char> = std::iter::once(fields[3])
            .chain(fields[4].split(','))
            .map(|a| a.chars().next().unwrap())
            .collect();
        if fields[3].len() != 1 || fields[4].split(',').any(|a| a.len() != 1) {
            continue;
        }
        for (s, gt) in fields[9..].iter().enumerate() {
            let gt = gt.split(':').next().unwrap();
            let parts: Vec<&str> = gt.split(['|', '/']).collect();
            let pick = |p: Option<&&str>| match p {
                Some(&".") | None => '.',
                Some(i) => alleles[i.parse::<usize>().unwrap()],
            };
            calls[s].push((pick(parts.first()), pick(parts.get(1))));
        }
    }
    (subjects, calls)
}

/// Independent IMPUTE2 reader: same output shape as [`naive_vcf`].
pub fn naive_impute2(haps: &str, samples: &str) -> (Vec<String>, Vec<Vec<(char, char)>>) {
    let subjects: Vec<String> =
        samples.lines().skip(2).map(|l| l.split_whitespace().nth(1).unwrap().to_string()).collect();
    let mut calls = vec![Vec::new(); subjects.len()];
    for line in haps.lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        let (a, b) = (t[3].chars().next().unwrap(), t[4].chars().next().unwrap());
        for s in 0..subjects.len() {
            let pick = |x: &str| if x == "0" { a } else { b };
            calls[s].push((pick(t[5 + 2 * s]), pick(t[6 + 2 * s])));
        }
    }
    (subjects, calls)
}
