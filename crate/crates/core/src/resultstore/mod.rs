//! Local append-only result log and the client that syncs it to the
//! central service.
//!
//! The on-disk format is UTF-8 JSON-Lines: one canonical `RunRecord`
//! object per line. The log is never rewritten; deduplication happens on
//! the server side, keyed by [`record_id`].

mod push;

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use push::{fetch_series, push, push_with, PushError, PushOptions, PushSummary, MAX_BATCH};

use crate::domain::{validate_record, Family, RunRecord};

pub const DEFAULT_STORE: &str = "results.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Content hash identifying a record; see [`RunRecord::compute_id`].
pub fn record_id(record: &RunRecord) -> String {
    record.compute_id()
}

static APPEND_LOCK: Mutex<()> = Mutex::new(());

/// Appends `record` as one JSON line and syncs the file to disk.
///
/// The parent directory must already exist. Appends from one process are
/// serialized so lines never interleave.
pub fn append_local(record: &RunRecord, path: &Path) -> Result<(), StoreError> {
    append_many(std::slice::from_ref(record), path)
}

/// Appends several records with a single write and fsync.
pub fn append_many(records: &[RunRecord], path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let _guard = APPEND_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    file.write_all(&buf).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))?;
    Ok(())
}

/// Optional equality filters over the grouping fields. `None` matches anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub site_id: Option<String>,
    pub family: Option<Family>,
    pub case_name: Option<String>,
    pub nodes: Option<u32>,
    pub ppn: Option<u32>,
}

impl RecordFilter {
    pub fn matches(&self, r: &RunRecord) -> bool {
        self.site_id.as_ref().is_none_or(|s| *s == r.site_id)
            && self.family.is_none_or(|f| f == r.family)
            && self.case_name.as_ref().is_none_or(|c| *c == r.case_name)
            && self.nodes.is_none_or(|n| n == r.nodes)
            && self.ppn.is_none_or(|p| p == r.ppn)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOutcome {
    pub records: Vec<RunRecord>,
    /// Lines that were not valid JSON or failed record validation.
    pub skipped: usize,
}

/// Reads every valid record matching `filter`. Corrupt lines, including a
/// trailing partial line from a concurrent writer, are skipped and counted.
pub fn load_local(path: &Path, filter: &RecordFilter) -> Result<LoadOutcome, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = LoadOutcome::default();
    for line in BufReader::new(file).split(b'\n') {
        let line = line.map_err(io_err(path))?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let parsed = serde_json::from_slice::<RunRecord>(&line).ok().and_then(|r| validate_record(r).ok());
        match parsed {
            Some(r) if filter.matches(&r) => out.records.push(r),
            Some(_) => {}
            None => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        log::warn!("{}: skipped {} malformed line(s)", path.display(), out.skipped);
    }
    Ok(out)
}

/// Sidecar file listing the ids already pushed, one per line. Makes
/// repeated pushes restartable.
#[derive(Debug, Clone)]
pub struct SyncCursor {
    path: PathBuf,
}

impl SyncCursor {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SyncCursor { path: path.into() }
    }

    /// Cursor stored next to a result log: `results.jsonl` → `results.jsonl.pushed`.
    pub fn for_store(store: &Path) -> Self {
        let mut name = store.as_os_str().to_owned();
        name.push(".pushed");
        SyncCursor::new(PathBuf::from(name))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn pushed_ids(&self) -> Result<BTreeSet<String>, StoreError> {
        match std::fs::read_to_string(&self.path) {
            Ok(text) => Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeSet::new()),
            Err(e) => Err(io_err(&self.path)(e)),
        }
    }

    pub fn mark_pushed<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<(), StoreError> {
        let mut buf = String::new();
        for id in ids {
            buf.push_str(id);
            buf.push('\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(io_err(&self.path))?;
        file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        file.sync_data().map_err(io_err(&self.path))
    }
}
