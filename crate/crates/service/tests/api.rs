use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use casecred_core::assessment::{AssessmentLog, ClaimAssessment};
use casecred_core::io::{parse_case, serialize_case, to_canonical_json};
use casecred_core::lifecycle::TriggerLog;
use casecred_core::radar::render_radar_svg;
use casecred_core::rollup::{rollup, spoke_values, RollupOptions, Strategy};
use casecred_core::PersonRef;
use casecred_service::{router, AppState, ServiceConfig, VERSION_HEADER};

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fig2.case.json")
}

fn as_of() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 6, 30).unwrap()
}

fn state() -> Arc<AppState> {
    Arc::new(AppState::load(&fixture_path(), ServiceConfig::new(as_of())).unwrap())
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let (status, _, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn assessment(claim: &str, p: Option<u8>, i: Option<u8>) -> Value {
    json!({
        "claim_id": claim,
        "procedural": p,
        "implementation": i,
        "procedural_na": p.is_none(),
        "implementation_na": i.is_none(),
        "summary": "Reviewed with the claim owner.",
        "assessors": [{"name": "Jordan Reyes"}],
        "assessed_at": "2025-06-20",
        "case_version": 1
    })
}

#[tokio::test]
async fn case_snapshot_round_trips_with_version_header() {
    let app = router(state());
    let (status, headers, body) = get(&app, "/case").await;
    assert_eq!(status, StatusCode::OK);
    let case = parse_case(&body).unwrap();
    assert_eq!(headers[VERSION_HEADER], case.version.to_string().as_str());
    let on_disk = parse_case(&std::fs::read(fixture_path()).unwrap()).unwrap();
    assert_eq!(case, on_disk);
    assert_eq!(body, serialize_case(&on_disk));
    let (_, _, again) = get(&app, "/case").await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn matching_version_is_stored_and_stale_version_conflicts() {
    let app = router(state());
    let (status, body) =
        post(&app, "/assessments", &json!({"expected_version": 0, "assessment": assessment("1.1.1", Some(2), Some(3))})).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["log_version"], 1);
    let (status, body) =
        post(&app, "/assessments", &json!({"expected_version": 0, "assessment": assessment("1.1.2", Some(2), Some(3))})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["current_version"], 1);
}

#[tokio::test]
async fn na_without_justification_names_the_field() {
    let app = router(state());
    let (status, body) =
        post(&app, "/assessments", &json!({"expected_version": 0, "assessment": assessment("1.1.1", Some(2), None)})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "na_justification");
}

#[tokio::test]
async fn self_assessment_and_schema_errors_are_unprocessable() {
    let app = router(state());
    let mut rec = assessment("1.1.1", Some(2), Some(2));
    rec["assessors"] = json!([{"name": "Morgan Lee"}]);
    let (status, body) = post(&app, "/assessments", &json!({"expected_version": 0, "assessment": rec})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "assessors");

    let mut rec = assessment("1.1.1", Some(2), Some(2));
    rec["assessed_at"] = json!("June");
    let (status, body) = post(&app, "/assessments", &json!({"expected_version": 0, "assessment": rec})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "assessment.assessed_at");
}

#[tokio::test]
async fn rollup_over_the_wire_equals_library_and_sees_writes() {
    let st = state();
    let app = router(st.clone());
    let (status, _) =
        post(&app, "/assessments", &json!({"expected_version": 0, "assessment": assessment("1.1.1", Some(1), Some(3))})).await;
    assert_eq!(status, StatusCode::CREATED);
    for (query, strategy) in [("", Strategy::ConservativeMin), ("?strategy=weighted_mean&threshold=3", Strategy::WeightedMean)] {
        let (status, _, body) = get(&app, &format!("/rollup{query}")).await;
        assert_eq!(status, StatusCode::OK);
        let threshold = if query.is_empty() { 2 } else { 3 };
        let expected = rollup(st.case(), &st.log_snapshot().current_list(), &RollupOptions::new(strategy, threshold)).unwrap();
        assert_eq!(String::from_utf8(body).unwrap(), to_canonical_json(&expected));
    }
    let (status, _, _) = get(&app, "/rollup?strategy=median").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn queue_lists_unassessed_then_empties() {
    let st = state();
    let app = router(st.clone());
    let (_, _, body) = get(&app, "/queue").await;
    let q: Value = serde_json::from_slice(&body).unwrap();
    let items = q["items"].as_array().unwrap();
    assert_eq!(items.len(), st.case().claims.len());
    assert!(items.iter().all(|i| i["reason"] == "unassessed"));
    assert_eq!(items[0]["claim_id"], "1");

    let ids: Vec<String> = st.case().claims.keys().map(|k| k.to_string()).collect();
    for (n, id) in ids.iter().enumerate() {
        let (status, body) =
            post(&app, "/assessments", &json!({"expected_version": n, "assessment": assessment(id, Some(2), Some(3))})).await;
        assert_eq!(status, StatusCode::CREATED, "{id}: {body}");
    }
    let (_, _, body) = get(&app, "/queue").await;
    let q: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(q["items"], json!([]));

    let (status, body) = post(
        &app,
        "/triggers",
        &json!({"kind": "odd", "description": "Night operation added", "affected": ["Coverage Claims"], "raised_at": "2025-06-25"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["trigger"]["id"], "T1");
    let stale = body["newly_stale"].clone();
    assert_eq!(stale, json!(["1", "1.2", "1.2.1", "1.2.1.1", "1.2.1.2", "1.2.1.3"]));
    let (_, _, body) = get(&app, "/queue").await;
    let q: Value = serde_json::from_slice(&body).unwrap();
    let queued: Vec<&str> = q["items"].as_array().unwrap().iter().map(|i| i["claim_id"].as_str().unwrap()).collect();
    assert_eq!(queued, vec!["1", "1.2", "1.2.1", "1.2.1.1", "1.2.1.2", "1.2.1.3"]);

    let (status, _) = post(
        &app,
        "/triggers",
        &json!({"kind": "odd", "description": "x", "affected": ["No such family"], "raised_at": "2025-06-25"}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_with_same_version_get_one_success() {
    let app = router(state());
    let claims = ["1.1.1", "1.1.2", "1.1.3", "1.1.4", "1.2.1.1", "1.2.1.2", "1.2.1.3", "1.2.2.1"];
    let handles: Vec<_> = claims
        .iter()
        .map(|c| {
            let app = app.clone();
            let body = json!({"expected_version": 0, "assessment": assessment(c, Some(2), Some(2))});
            tokio::spawn(async move { post(&app, "/assessments", &body).await.0 })
        })
        .collect();
    let mut codes = Vec::new();
    for h in handles {
        codes.push(h.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CREATED).count(), 1);
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CONFLICT).count(), claims.len() - 1);
}

#[tokio::test]
async fn report_and_radar_match_library() {
    let st = state();
    let app = router(st.clone());
    let (status, headers, svg) = get(&app, "/radar.svg").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["content-type"], "image/svg+xml");
    let result = rollup(st.case(), &[], &RollupOptions::default()).unwrap();
    let expected = render_radar_svg(&spoke_values(st.case(), &result).unwrap()).unwrap();
    assert_eq!(String::from_utf8(svg).unwrap(), expected);

    let (status, _, md) = get(&app, "/report").await;
    assert_eq!(status, StatusCode::OK);
    let md = String::from_utf8(md).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("## ")).count(), 7);
    let (status, _, json) = get(&app, "/report?format=json").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["case"]["version"], 1);
}

#[tokio::test]
async fn writes_are_appended_to_log_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(as_of());
    config.log_path = Some(dir.path().join("assessments.jsonl"));
    config.trigger_path = Some(dir.path().join("triggers.jsonl"));
    let app = router(Arc::new(AppState::load(&fixture_path(), config.clone()).unwrap()));
    let (status, _) =
        post(&app, "/assessments", &json!({"expected_version": 0, "assessment": assessment("1.1.4", Some(3), Some(3))})).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = post(
        &app,
        "/triggers",
        &json!({"kind": "software", "description": "Planner update", "affected": ["1.1.4"], "raised_at": "2025-06-26"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);

    let log = AssessmentLog::from_jsonl(&std::fs::read_to_string(config.log_path.as_ref().unwrap()).unwrap()).unwrap();
    assert_eq!(log.head(), 2);
    let current: Vec<ClaimAssessment> = log.current_list();
    assert!(current[0].stale);
    let triggers = TriggerLog::from_jsonl(&std::fs::read_to_string(config.trigger_path.as_ref().unwrap()).unwrap()).unwrap();
    assert_eq!(triggers.events().len(), 1);

    let reloaded = AppState::load(&fixture_path(), config).unwrap();
    assert_eq!(reloaded.log_version(), 2);
    assert_eq!(current[0].assessors, vec![PersonRef::new("Jordan Reyes")]);
}
