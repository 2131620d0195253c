//! Central results service: token-gated submission, public queries and
//! metric series.
//!
//! Storage is a single append-only JSON-Lines log plus an in-memory id
//! index rebuilt at startup. Writes go through one lock; every read works
//! on an immutable snapshot (`Arc<Vec<RunRecord>>`) taken when the request
//! starts.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_record, Family, Metric, MetricPoint, RunRecord};
use crate::metrics::{aggregate, AggregationWarning};
use crate::resultstore::{append_many, load_local, RecordFilter, StoreError, MAX_BATCH};

pub const RESULTS_PATH: &str = "/api/v1/results";
pub const SERIES_PATH: &str = "/api/v1/series";
/// Overrides the port of the configured listen address.
pub const PORT_ENV: &str = "SB_PORT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid listen address {0:?}")]
    Address(String),
    #[error("service runtime failed: {0}")]
    Runtime(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_data")]
    pub data: PathBuf,
    #[serde(default)]
    pub tokens: Vec<String>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_data() -> PathBuf {
    "service-results.jsonl".into()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { listen: default_listen(), data: default_data(), tokens: Vec::new() }
    }
}

impl ServiceConfig {
    /// Resolves the listen address, applying the `SB_PORT` override.
    pub fn listen_addr(&self) -> Result<SocketAddr, ServiceError> {
        let mut addr: SocketAddr = self.listen.parse().map_err(|_| ServiceError::Address(self.listen.clone()))?;
        if let Ok(port) = std::env::var(PORT_ENV) {
            let port = port.trim().parse().map_err(|_| ServiceError::Address(format!("{PORT_ENV}={port}")))?;
            addr.set_port(port);
        }
        Ok(addr)
    }
}

/// One rejected element of a submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: String,
}

/// Body returned by `POST /api/v1/results`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    #[serde(default)]
    pub rejections: Vec<Rejection>,
}

/// Body returned by `GET /api/v1/series`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesResponse {
    pub points: Vec<MetricPoint>,
    pub warnings: Vec<AggregationWarning>,
}

struct Writer {
    path: PathBuf,
    ids: HashSet<String>,
}

struct Shared {
    tokens: BTreeSet<String>,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Vec<RunRecord>>>,
}

/// The results database. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    /// Opens (or creates) the log at `data_path` and rebuilds the id index.
    pub fn open(data_path: &Path, tokens: impl IntoIterator<Item = String>) -> Result<Self, ServiceError> {
        if !data_path.exists() {
            append_many(&[], data_path)?;
        }
        let loaded = load_local(data_path, &RecordFilter::default())?;
        let mut ids = HashSet::new();
        let records: Vec<RunRecord> = loaded
            .records
            .into_iter()
            .map(|r| if r.record_id.is_empty() { r.with_computed_id() } else { r })
            .filter(|r| ids.insert(r.record_id.clone()))
            .collect();
        log::info!("loaded {} records from {}", records.len(), data_path.display());
        Ok(Service {
            shared: Arc::new(Shared {
                tokens: tokens.into_iter().filter(|t| !t.is_empty()).collect(),
                writer: Mutex::new(Writer { path: data_path.to_path_buf(), ids }),
                snapshot: RwLock::new(Arc::new(records)),
            }),
        })
    }

    pub fn snapshot(&self) -> Arc<Vec<RunRecord>> {
        self.shared.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn record_count(&self) -> usize {
        self.snapshot().len()
    }

    fn authorized(&self, headers: &HeaderMap) -> bool {
        headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| self.shared.tokens.contains(t.trim()))
    }

    /// Validates and stores a batch. Durable before returning.
    pub fn submit(&self, items: Vec<serde_json::Value>) -> Result<SubmitResponse, StoreError> {
        let mut response = SubmitResponse::default();
        let mut writer = self.shared.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut fresh: Vec<RunRecord> = Vec::new();
        let mut fresh_ids = HashSet::new();

        for (index, item) in items.into_iter().enumerate() {
            let record = serde_json::from_value::<RunRecord>(item)
                .map_err(|e| format!("malformed record: {e}"))
                .and_then(|r| validate_record(r).map_err(|e| e.field().to_string()));
            match record {
                Err(reason) => {
                    response.rejected += 1;
                    response.rejections.push(Rejection { index, reason });
                }
                Ok(r) => {
                    let r = if r.record_id.is_empty() { r.with_computed_id() } else { r };
                    if writer.ids.contains(&r.record_id) || !fresh_ids.insert(r.record_id.clone()) {
                        response.duplicates += 1;
                    } else {
                        response.accepted += 1;
                        fresh.push(r);
                    }
                }
            }
        }

        if !fresh.is_empty() {
            append_many(&fresh, &writer.path)?;
            writer.ids.extend(fresh_ids);
            let mut snapshot = self.shared.snapshot.write().unwrap_or_else(|e| e.into_inner());
            let mut next = Vec::with_capacity(snapshot.len() + fresh.len());
            next.extend_from_slice(&snapshot);
            next.extend(fresh);
            *snapshot = Arc::new(next);
        }
        Ok(response)
    }

    /// Records matching `filter`, sorted by site, case, nodes, ppn, timestamp and id.
    pub fn query(&self, filter: &RecordFilter) -> Vec<RunRecord> {
        let snapshot = self.snapshot();
        let mut out: Vec<RunRecord> = snapshot.iter().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| {
            (&a.site_id, &a.case_name, a.nodes, a.ppn, &a.timestamp_utc, &a.record_id).cmp(&(
                &b.site_id,
                &b.case_name,
                b.nodes,
                b.ppn,
                &b.timestamp_utc,
                &b.record_id,
            ))
        });
        out
    }

    pub fn series(&self, metric: Metric, filter: &RecordFilter) -> SeriesResponse {
        let agg = aggregate(&self.query(filter), metric);
        SeriesResponse { points: agg.points, warnings: agg.warnings }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route(RESULTS_PATH, post(handle_submit).get(handle_query))
            .route(SERIES_PATH, get(handle_series))
            .with_state(self.clone())
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn handle_submit(State(service): State<Service>, headers: HeaderMap, body: Bytes) -> Response {
    if !service.authorized(&headers) {
        return error(StatusCode::UNAUTHORIZED, "missing or invalid bearer token");
    }
    let items = match serde_json::from_slice::<serde_json::Value>(&body) {
        Ok(serde_json::Value::Array(items)) => items,
        Ok(_) => return error(StatusCode::BAD_REQUEST, "body must be a JSON array"),
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")),
    };
    if items.len() > MAX_BATCH {
        return error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("at most {MAX_BATCH} records per request, got {}", items.len()),
        );
    }
    match tokio::task::spawn_blocking(move || service.submit(items)).await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[allow(clippy::result_large_err)]
fn parse_param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, Response> {
    params
        .get(key)
        .map(|v| v.parse::<T>().map_err(|_| error(StatusCode::BAD_REQUEST, format!("invalid value for {key}: {v:?}"))))
        .transpose()
}

#[allow(clippy::result_large_err)]
fn parse_filter(params: &HashMap<String, String>) -> Result<RecordFilter, Response> {
    Ok(RecordFilter {
        site_id: params.get("site_id").cloned(),
        family: parse_param::<Family>(params, "family")?,
        case_name: params.get("case_name").cloned(),
        nodes: parse_param(params, "nodes")?,
        ppn: parse_param(params, "ppn")?,
    })
}

async fn handle_query(State(service): State<Service>, Query(params): Query<HashMap<String, String>>) -> Response {
    match parse_filter(&params) {
        Ok(filter) => Json(service.query(&filter)).into_response(),
        Err(resp) => resp,
    }
}

async fn handle_series(State(service): State<Service>, Query(params): Query<HashMap<String, String>>) -> Response {
    let metric = match params.get("metric").map(|m| m.parse::<Metric>()) {
        Some(Ok(m)) => m,
        Some(Err(_)) => return error(StatusCode::BAD_REQUEST, "unknown metric"),
        None => return error(StatusCode::BAD_REQUEST, "metric is required"),
    };
    let filter = RecordFilter {
        // Series compare sites, so site and node filters do not apply.
        site_id: None,
        nodes: None,
        ..match parse_filter(&params) {
            Ok(f) => f,
            Err(resp) => return resp,
        }
    };
    Json(service.series(metric, &filter)).into_response()
}

/// Serves `service` on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Service,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, service.router()).with_graceful_shutdown(shutdown).await
}

/// A service running on a background thread with its own runtime.
pub struct ServiceHandle {
    addr: SocketAddr,
    service: Service,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServiceHandle {
    /// Opens the log, binds the listen address and starts serving. Binding
    /// happens before this returns, so an address in use is reported here.
    pub fn start(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let addr = config.listen_addr()?;
        let service = Service::open(&config.data, config.tokens.iter().cloned())?;
        let std_listener = std::net::TcpListener::bind(addr)
            .map_err(|source| ServiceError::Bind { addr: addr.to_string(), source })?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let svc = service.clone();
        let thread = std::thread::Builder::new().name("results-service".into()).spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                serve(listener, svc, async {
                    let _ = stopped.await;
                })
                .await
            })
        })?;
        Ok(ServiceHandle { addr, service, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn service(&self) -> &Service {
        &self.service
    }

    /// Stops accepting connections, drains in-flight requests and joins the thread.
    pub fn shutdown(mut self) -> Result<(), ServiceError> {
        self.stop_and_join()
    }

    /// Blocks until SIGINT or SIGTERM arrives, then shuts down.
    pub fn run_until_signal(self) -> Result<(), ServiceError> {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        rt.block_on(shutdown_signal())?;
        self.shutdown()
    }

    fn stop_and_join(&mut self) -> Result<(), ServiceError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            thread.join().map_err(|_| ServiceError::Runtime(std::io::Error::other("service thread panicked")))??;
        }
        Ok(())
    }
}

async fn shutdown_signal() -> std::io::Result<()> {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate())?;
        tokio::select! {
            r = tokio::signal::ctrl_c() => r,
            _ = term.recv() => Ok(()),
        }
    }
    #[cfg(not(unix))]
    tokio::signal::ctrl_c().await
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
