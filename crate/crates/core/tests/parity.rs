//! The CLI and the HTTP API must produce byte-identical JSON for every shipped
//! scenario and every experiment it supports.

mod common;

use std::process::Command;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use peerbargain::api::router;
use peerbargain::scenario::ScenarioSpec;
use tower::ServiceExt;

/// (subcommand, endpoint) pairs applicable to a spec.
fn experiments(spec: &ScenarioSpec) -> Vec<(&'static str, &'static str)> {
    let mut out = vec![("run", "/api/v1/scenarios:run")];
    if spec.sweep.is_some() {
        out.push(("sweep", "/api/v1/sweeps"));
    }
    if spec.price_table.is_some() {
        out.push(("price-table", "/api/v1/price-tables"));
    }
    if spec.timing.is_some() {
        out.push(("timing", "/api/v1/timing"));
    }
    if spec.compare.is_some() {
        out.push(("compare", "/api/v1/comparisons"));
    }
    out
}

fn cli(subcommand: &str, path: &std::path::Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_peerbargain"))
        .args([subcommand, "--spec"])
        .arg(path)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

async fn api(endpoint: &str, body: Vec<u8>) -> Vec<u8> {
    let req = Request::post(endpoint)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = router().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), 200, "{endpoint}");
    resp.into_body().collect().await.unwrap().to_bytes().to_vec()
}

#[tokio::test]
async fn cli_and_api_outputs_are_identical() {
    let files = common::scenario_files();
    assert!(files.len() >= 10);
    let mut checked = 0;
    for path in files {
        let text = std::fs::read(&path).unwrap();
        let spec: ScenarioSpec = serde_json::from_slice(&text).unwrap();
        for (sub, endpoint) in experiments(&spec) {
            let a = cli(sub, &path);
            let b = api(endpoint, text.clone()).await;
            assert!(a == b, "{} via {sub}", path.display());
            checked += 1;
        }
    }
    assert!(checked >= 20, "{checked}");
}
