mod common;

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use scalebench::resultstore::{fetch_series, push, push_with, PushError, PushOptions, RecordFilter};
use scalebench::service::{SeriesResponse, ServiceConfig, ServiceHandle, SubmitResponse};
use scalebench::{aggregate, Metric, RunRecord};
use serde_json::json;

const TOKEN: &str = "s3cret";

fn start(dir: &std::path::Path) -> ServiceHandle {
    ServiceHandle::start(&ServiceConfig {
        listen: "127.0.0.1:0".into(),
        data: dir.join("service.jsonl"),
        tokens: vec![TOKEN.into()],
    })
    .unwrap()
}

fn dataset(sites: &[&str]) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for (s, site) in sites.iter().enumerate() {
        for (i, nodes) in [1u32, 2, 4, 8].into_iter().enumerate() {
            let g = 100.0 * (s + 1) as f64 * (1.0 + 0.9 * i as f64);
            out.push(common::record(site, nodes, 16, g, 1000.0 / g));
        }
    }
    out
}

fn results(h: &ServiceHandle) -> String {
    format!("{}/api/v1/results", h.base_url())
}

#[test]
fn submission_requires_valid_token() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let client = Client::new();
    let body = serde_json::to_string(&dataset(&["A"])).unwrap();
    let none = client.post(results(&h)).body(body.clone()).send().unwrap();
    assert_eq!(none.status(), StatusCode::UNAUTHORIZED);
    let wrong = client.post(results(&h)).bearer_auth("nope").body(body).send().unwrap();
    assert_eq!(wrong.status(), StatusCode::UNAUTHORIZED);
    assert_eq!(h.service().record_count(), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("service.jsonl")).unwrap(), "");
}

#[test]
fn malformed_and_oversized_submissions() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let client = Client::new();
    let send = |body: String| client.post(results(&h)).bearer_auth(TOKEN).body(body).send().unwrap();
    assert_eq!(send("{\"a\":1}".into()).status(), StatusCode::BAD_REQUEST);
    assert_eq!(send("not json".into()).status(), StatusCode::BAD_REQUEST);
    let big: Vec<RunRecord> = (0..101).map(|i| common::record("A", 1, 16, 1.0 + i as f64, 1.0)).collect();
    assert_eq!(send(serde_json::to_string(&big).unwrap()).status(), StatusCode::PAYLOAD_TOO_LARGE);

    let mut items = vec![serde_json::to_value(common::record("A", 1, 16, 10.0, 1.0)).unwrap()];
    items.push(json!({"site_id": "A"}));
    let mut bad = common::record("A", 2, 16, 10.0, 1.0);
    bad.runtime_seconds = -1.0;
    items.push(serde_json::to_value(bad).unwrap());
    let resp: SubmitResponse = send(serde_json::to_string(&items).unwrap()).json().unwrap();
    assert_eq!((resp.accepted, resp.duplicates, resp.rejected), (1, 0, 2));
    assert_eq!(resp.rejections.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn query_parameters_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let get = |q: &str| Client::new().get(format!("{}{q}", results(&h))).send().unwrap().status();
    assert_eq!(get("?nodes=x"), StatusCode::BAD_REQUEST);
    assert_eq!(get("?family=fortran"), StatusCode::BAD_REQUEST);
    assert_eq!(get("?nodes=2"), StatusCode::OK);
    let series = |q: &str| Client::new().get(format!("{}/api/v1/series{q}", h.base_url())).send().unwrap().status();
    assert_eq!(series(""), StatusCode::BAD_REQUEST);
    assert_eq!(series("?metric=flops"), StatusCode::BAD_REQUEST);
    assert_eq!(series("?metric=speedup_ratio&ppn=-1"), StatusCode::BAD_REQUEST);
}

#[test]
fn read_your_writes_and_series_match_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let records = dataset(&["A", "B", "C"]);
    let summary = push(&records, &h.base_url(), TOKEN).unwrap();
    assert_eq!(summary.accepted, 12);

    let got: Vec<RunRecord> = Client::new().get(format!("{}?site_id=B", results(&h))).send().unwrap().json().unwrap();
    assert_eq!(got.len(), 4);
    assert!(got.iter().all(|r| r.site_id == "B"));
    let want: Vec<&RunRecord> = records.iter().filter(|r| r.site_id == "B").collect();
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g, w);
    }

    for metric in Metric::ALL {
        let remote = fetch_series(&h.base_url(), metric, &RecordFilter::default()).unwrap();
        let local = aggregate(&records, metric);
        assert_eq!(remote.points, local.points, "{metric}");
        assert!(remote.warnings.is_empty());
    }
    let raw: SeriesResponse = Client::new()
        .get(format!("{}/api/v1/series?metric=speedup_ratio&site_id=A&nodes=2", h.base_url()))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(raw.points.len(), 12, "site and node filters do not narrow a series");
}

#[test]
fn push_batches_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let records: Vec<RunRecord> =
        (0..250).map(|i| common::record("A", 1 << (i % 4), 16, 10.0 + i as f64, 1.0 + i as f64)).collect();
    let mut sizes = Vec::new();
    let first = push_with(&records, &h.base_url(), TOKEN, &PushOptions::default(), |b, _| sizes.push(b.len())).unwrap();
    assert_eq!(sizes, vec![100, 100, 50]);
    assert_eq!((first.accepted, first.duplicates, first.requests), (250, 0, 3));

    let again = push(&records, &h.base_url(), TOKEN).unwrap();
    assert_eq!((again.accepted, again.duplicates), (0, 250));
    assert_eq!(h.service().record_count(), 250);
    let lines = std::fs::read_to_string(dir.path().join("service.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 250);
}

#[test]
fn wrong_token_fails_fast_without_retry() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let opts = PushOptions { initial_backoff: Duration::from_secs(5), ..PushOptions::default() };
    let started = std::time::Instant::now();
    let err = push_with(&dataset(&["A"]), &h.base_url(), "wrong", &opts, |_, _| {}).unwrap_err();
    assert!(matches!(err, PushError::Auth { .. }), "{err}");
    assert!(started.elapsed() < Duration::from_secs(5));
    assert_eq!(err.progress().accepted, 0);
}

#[test]
fn restart_preserves_records() {
    let dir = tempfile::tempdir().unwrap();
    let records = dataset(&["A", "B"]);
    let before = {
        let h = start(dir.path());
        push(&records, &h.base_url(), TOKEN).unwrap();
        let q = h.service().query(&RecordFilter::default());
        h.shutdown().unwrap();
        q
    };
    let h = start(dir.path());
    assert_eq!(h.service().record_count(), records.len());
    assert_eq!(h.service().query(&RecordFilter::default()), before);
    let again = push(&records, &h.base_url(), TOKEN).unwrap();
    assert_eq!(again.duplicates, records.len());
}

#[test]
fn concurrent_pushes_do_not_interleave() {
    let dir = tempfile::tempdir().unwrap();
    let h = start(dir.path());
    let url = h.base_url();
    std::thread::scope(|s| {
        for t in 0..4 {
            let url = url.clone();
            s.spawn(move || {
                let site = format!("S{t}");
                let records: Vec<RunRecord> =
                    (0..60).map(|i| common::record(&site, 1, 16, 1.0 + i as f64, 1.0)).collect();
                push(&records, &url, TOKEN).unwrap();
            });
        }
    });
    assert_eq!(h.service().record_count(), 240);
    let text = std::fs::read_to_string(dir.path().join("service.jsonl")).unwrap();
    for line in text.lines() {
        serde_json::from_str::<RunRecord>(line).unwrap();
    }
    assert_eq!(text.lines().count(), 240);
}
