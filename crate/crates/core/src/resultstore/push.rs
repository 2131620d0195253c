use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RecordFilter;
use crate::domain::{Metric, RunRecord};
use crate::service::{SeriesResponse, SubmitResponse, RESULTS_PATH, SERIES_PATH};

/// Largest batch the service accepts in one request.
pub const MAX_BATCH: usize = 100;

#[derive(Debug, Clone)]
pub struct PushOptions {
    pub batch_size: usize,
    /// Retries after the first failed attempt of a batch.
    pub retries: u32,
    /// Delay before the first retry; doubled for each following retry.
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for PushOptions {
    fn default() -> Self {
        PushOptions {
            batch_size: MAX_BATCH,
            retries: 3,
            initial_backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(30),
        }
    }
}

/// Totals reported by the server, summed over batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushSummary {
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    /// Number of HTTP requests that received a response.
    pub requests: usize,
    /// Records in batches the server acknowledged.
    pub records_sent: usize,
}

#[derive(Debug, Error)]
pub enum PushError {
    #[error("authentication rejected by {endpoint}")]
    Auth { endpoint: String, progress: PushSummary },
    #[error("push to {endpoint} failed: {message}")]
    Remote { endpoint: String, message: String, progress: PushSummary },
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

impl PushError {
    /// Work completed before the failure.
    pub fn progress(&self) -> PushSummary {
        match self {
            PushError::Auth { progress, .. } | PushError::Remote { progress, .. } => *progress,
            PushError::Client(_) => PushSummary::default(),
        }
    }
}

/// Accepts either a service base URL or the full results endpoint.
fn results_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with(RESULTS_PATH) {
        base.to_string()
    } else {
        format!("{base}{RESULTS_PATH}")
    }
}

/// Fetches a metric series from a service. Only the family, case and ppn
/// parts of `filter` are sent.
pub fn fetch_series(endpoint: &str, metric: Metric, filter: &RecordFilter) -> Result<SeriesResponse, PushError> {
    let base = endpoint.trim_end_matches('/');
    let base = base.strip_suffix(RESULTS_PATH).unwrap_or(base);
    let url = format!("{base}{SERIES_PATH}");
    let mut query = vec![("metric", metric.as_str().to_string())];
    if let Some(f) = filter.family {
        query.push(("family", f.as_str().to_string()));
    }
    if let Some(c) = &filter.case_name {
        query.push(("case_name", c.clone()));
    }
    if let Some(p) = filter.ppn {
        query.push(("ppn", p.to_string()));
    }
    let remote =
        |message: String| PushError::Remote { endpoint: url.clone(), message, progress: PushSummary::default() };
    let resp = Client::builder()
        .timeout(PushOptions::default().timeout)
        .build()
        .map_err(|e| PushError::Client(e.to_string()))?
        .get(&url)
        .query(&query)
        .send()
        .map_err(|e| remote(e.to_string()))?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(remote(format!("server returned {status}: {body}")));
    }
    resp.json().map_err(|e| remote(format!("unreadable response: {e}")))
}

enum Attempt {
    Done(SubmitResponse),
    Auth,
    Fatal(String),
    Retry(String),
}

fn send_batch(client: &Client, url: &str, token: &str, batch: &[RunRecord]) -> Attempt {
    let resp = match client.post(url).bearer_auth(token).json(batch).send() {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = resp.status();
    if status == StatusCode::UNAUTHORIZED {
        return Attempt::Auth;
    }
    if status.is_server_error() {
        return Attempt::Retry(format!("server returned {status}"));
    }
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Attempt::Fatal(format!("server returned {status}: {body}"));
    }
    match resp.json::<SubmitResponse>() {
        Ok(body) => Attempt::Done(body),
        Err(e) => Attempt::Retry(format!("unreadable response: {e}")),
    }
}

/// Pushes `records` with the default options.
pub fn push(records: &[RunRecord], endpoint_url: &str, auth_token: &str) -> Result<PushSummary, PushError> {
    push_with(records, endpoint_url, auth_token, &PushOptions::default(), |_, _| {})
}

/// Pushes `records` in batches, sequentially, calling `on_batch` after each
/// batch the server acknowledges.
///
/// A 401 aborts immediately without retrying. Transport failures and 5xx
/// responses are retried with exponential backoff; other 4xx responses are
/// not retryable.
pub fn push_with(
    records: &[RunRecord],
    endpoint_url: &str,
    auth_token: &str,
    options: &PushOptions,
    mut on_batch: impl FnMut(&[RunRecord], &SubmitResponse),
) -> Result<PushSummary, PushError> {
    let client = Client::builder().timeout(options.timeout).build().map_err(|e| PushError::Client(e.to_string()))?;
    let url = results_url(endpoint_url);
    let mut summary = PushSummary::default();

    for batch in records.chunks(options.batch_size.clamp(1, MAX_BATCH)) {
        let mut delay = options.initial_backoff;
        let mut attempt = 0;
        let response = loop {
            match send_batch(&client, &url, auth_token, batch) {
                Attempt::Done(r) => break r,
                Attempt::Auth => {
                    return Err(PushError::Auth { endpoint: url, progress: summary });
                }
                Attempt::Fatal(message) => {
                    return Err(PushError::Remote { endpoint: url, message, progress: summary });
                }
                Attempt::Retry(message) if attempt >= options.retries => {
                    let message = format!("{message} (after {} attempts)", attempt + 1);
                    return Err(PushError::Remote { endpoint: url, message, progress: summary });
                }
                Attempt::Retry(message) => {
                    log::warn!("batch push failed ({message}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        };
        summary.requests += 1;
        summary.records_sent += batch.len();
        summary.accepted += response.accepted;
        summary.duplicates += response.duplicates;
        summary.rejected += response.rejected;
        on_batch(batch, &response);
    }
    Ok(summary)
}
