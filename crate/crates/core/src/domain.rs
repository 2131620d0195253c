//! Core data model shared by every other module.
//!
//! All types here are plain values: once constructed they are never mutated
//! in place, so they can be freely shared across threads. The JSON forms
//! produced by `serde` are the storage and wire schema used by the result
//! store and the aggregation service.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Node counts used by a default run plan.
pub const DEFAULT_NODE_LIST: [u32; 4] = [1, 2, 4, 8];

/// Layout accepted for `timestamp_utc`.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// An invariant violated by a domain value. The payload names the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("validation failed: {0}")]
pub struct ValidationError(pub String);

impl ValidationError {
    pub fn field(&self) -> &str {
        &self.0
    }
}

fn invalid(field: &str) -> ValidationError {
    ValidationError(field.to_string())
}

/// Benchmark family. Each family has its own input preparation and output parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Hpl,
    Vasp,
    Gromacs,
    BuiltinLu,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Hpl, Family::Vasp, Family::Gromacs, Family::BuiltinLu];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Hpl => "hpl",
            Family::Vasp => "vasp",
            Family::Gromacs => "gromacs",
            Family::BuiltinLu => "builtin_lu",
        }
    }

    /// Families whose records must carry a GFLOPS figure.
    pub fn requires_gflops(self) -> bool {
        matches!(self, Family::Hpl | Family::BuiltinLu)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| invalid("family"))
    }
}

/// Metric computed from a set of run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SpeedupRatio,
    Speedup,
    PerformancePerCore,
    PerformanceGain,
}

impl Metric {
    pub const ALL: [Metric; 4] =
        [Metric::SpeedupRatio, Metric::Speedup, Metric::PerformancePerCore, Metric::PerformanceGain];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SpeedupRatio => "speedup_ratio",
            Metric::Speedup => "speedup",
            Metric::PerformancePerCore => "performance_per_core",
            Metric::PerformanceGain => "performance_gain",
        }
    }

    /// Human-readable axis label.
    pub fn title(self) -> &'static str {
        match self {
            Metric::SpeedupRatio => "Speedup Ratio",
            Metric::Speedup => "Speedup (1/s)",
            Metric::PerformancePerCore => "Performance per Core (GFLOPS)",
            Metric::PerformanceGain => "Performance Gain",
        }
    }

    /// Whether the metric is derived from GFLOPS rather than runtime.
    pub fn uses_gflops(self) -> bool {
        !matches!(self, Metric::Speedup)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| invalid("metric"))
    }
}

/// Scalar parameter value for benchmark cases and template variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<u32> for Scalar {
    fn from(v: u32) -> Self {
        Scalar::Int(v.into())
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Str(v.to_string())
    }
}

impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::Str(v)
    }
}

impl Scalar {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Scalar::Int(i) => Some(*i),
            Scalar::Str(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

fn is_valid_site_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// A uniquely identified location where benchmarks run. The id doubles as
/// the chart legend label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    #[serde(default)]
    pub provider: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub hyperthreading: bool,
    #[serde(default)]
    pub cpu_model: String,
    #[serde(default)]
    pub interconnect: String,
}

impl Site {
    pub fn new(id: impl Into<String>) -> Self {
        Site {
            id: id.into(),
            provider: String::new(),
            description: String::new(),
            hyperthreading: false,
            cpu_model: String::new(),
            interconnect: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !is_valid_site_id(&self.id) {
            return Err(invalid("id"));
        }
        Ok(())
    }
}

/// A named, templated benchmark definition within a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub family: Family,
    pub case_name: String,
    #[serde(default)]
    pub template_paths: Vec<std::path::PathBuf>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Scalar>,
}

impl BenchmarkCase {
    pub fn new(family: Family, case_name: impl Into<String>) -> Self {
        BenchmarkCase { family, case_name: case_name.into(), template_paths: Vec::new(), parameters: BTreeMap::new() }
    }

    pub fn with_parameter(mut self, key: &str, value: impl Into<Scalar>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn parameter(&self, key: &str) -> Option<&Scalar> {
        self.parameters.get(key)
    }

    pub fn parameter_str(&self, key: &str) -> Option<String> {
        self.parameters.get(key).map(Scalar::to_string)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.case_name.trim().is_empty() {
            return Err(invalid("case_name"));
        }
        Ok(())
    }
}

/// Checks that no two cases in a configuration share `(family, case_name)`.
pub fn check_unique_cases(cases: &[BenchmarkCase]) -> Result<(), ValidationError> {
    let mut seen = std::collections::BTreeSet::new();
    for case in cases {
        case.validate()?;
        if !seen.insert((case.family, case.case_name.as_str())) {
            return Err(ValidationError(format!("case_name ({} duplicated)", case.case_name)));
        }
    }
    Ok(())
}

/// One point of the nodes x processors-per-node run matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunConfig {
    pub nodes: u32,
    pub ppn: u32,
    #[serde(default)]
    pub repetition: u32,
}

impl RunConfig {
    pub fn new(nodes: u32, ppn: u32) -> Self {
        RunConfig { nodes, ppn, repetition: 0 }
    }

    pub fn total_cores(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.ppn)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.nodes == 0 {
            return Err(invalid("nodes"));
        }
        if self.ppn == 0 {
            return Err(invalid("ppn"));
        }
        Ok(())
    }
}

/// Formats a UTC instant with seconds precision, e.g. `2026-10-16T08:30:00Z`.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).ok().map(|t| t.and_utc())
}

pub fn now_timestamp() -> String {
    format_timestamp(Utc::now())
}

/// One executed benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default)]
    pub record_id: String,
    pub site_id: String,
    pub family: Family,
    pub case_name: String,
    pub nodes: u32,
    pub ppn: u32,
    pub runtime_seconds: f64,
    #[serde(default)]
    pub gflops: Option<f64>,
    pub passed: bool,
    pub timestamp_utc: String,
    #[serde(default)]
    pub tool_version: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Identity-relevant portion of a record used by [`RunRecord::compute_id`].
pub(crate) fn canonical_identity_json(r: &RunRecord) -> String {
    // serde_json renders f64 via shortest round-trip formatting.
    let num = |x: f64| serde_json::to_string(&x).unwrap_or_else(|_| "null".into());
    let s = |v: &str| serde_json::to_string(v).expect("string serialization");
    let gflops = r.gflops.map(num).unwrap_or_else(|| "null".into());
    format!(
        "{{\"case_name\":{},\"family\":{},\"gflops\":{},\"nodes\":{},\"ppn\":{},\"runtime_seconds\":{},\"site_id\":{},\"timestamp_utc\":{}}}",
        s(&r.case_name),
        s(r.family.as_str()),
        gflops,
        r.nodes,
        r.ppn,
        num(r.runtime_seconds),
        s(&r.site_id),
        s(&r.timestamp_utc),
    )
}

impl RunRecord {
    /// Lowercase hex SHA-256 of the canonical identity JSON. Metadata,
    /// `passed` and `tool_version` do not take part.
    pub fn compute_id(&self) -> String {
        let digest = Sha256::digest(canonical_identity_json(self).as_bytes());
        hex::encode(digest)
    }

    /// Recomputes and stores `record_id`.
    pub fn with_computed_id(mut self) -> Self {
        self.record_id = self.compute_id();
        self
    }

    pub fn total_cores(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.ppn)
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::new(self.nodes, self.ppn)
    }
}

/// Returns the record unchanged iff every `RunRecord` invariant holds.
///
/// Fields are checked in declaration order and the first violation is
/// reported. An empty `record_id` is accepted (it is filled in by
/// [`RunRecord::with_computed_id`]); a non-empty one must match the content.
pub fn validate_record(record: RunRecord) -> Result<RunRecord, ValidationError> {
    if !is_valid_site_id(&record.site_id) {
        return Err(invalid("site_id"));
    }
    if record.case_name.trim().is_empty() {
        return Err(invalid("case_name"));
    }
    if record.nodes == 0 {
        return Err(invalid("nodes"));
    }
    if record.ppn == 0 {
        return Err(invalid("ppn"));
    }
    if !(record.runtime_seconds.is_finite() && record.runtime_seconds > 0.0) {
        return Err(invalid("runtime_seconds"));
    }
    match record.gflops {
        Some(g) if !(g.is_finite() && g >= 0.0) => return Err(invalid("gflops")),
        None if record.family.requires_gflops() => return Err(invalid("gflops")),
        _ => {}
    }
    if parse_timestamp(&record.timestamp_utc).is_none() {
        return Err(invalid("timestamp_utc"));
    }
    if !record.record_id.is_empty() && record.record_id != record.compute_id() {
        return Err(invalid("record_id"));
    }
    Ok(record)
}

/// Aggregated metric value at one node count for one site and case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub metric: Metric,
    pub site_id: String,
    pub family: Family,
    pub case_name: String,
    pub nodes: u32,
    pub ppn: u32,
    pub value: f64,
    pub sample_count: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> RunRecord {
        RunRecord {
            record_id: String::new(),
            site_id: "AWS-NHT-C5".into(),
            family: Family::Hpl,
            case_name: "hpl".into(),
            nodes: 1,
            ppn: 16,
            runtime_seconds: 184.59,
            gflops: Some(166.3),
            passed: true,
            timestamp_utc: "2026-10-16T08:30:00Z".into(),
            tool_version: "0.1.0".into(),
            metadata: BTreeMap::new(),
        }
        .with_computed_id()
    }

    #[test]
    fn accepts_valid_record() {
        let r = sample();
        assert_eq!(validate_record(r.clone()).unwrap(), r);
    }

    #[test]
    fn rejects_zero_runtime() {
        let mut r = sample();
        r.runtime_seconds = 0.0;
        assert_eq!(validate_record(r).unwrap_err().field(), "runtime_seconds");
    }

    #[test]
    fn rejects_zero_nodes() {
        let mut r = sample();
        r.nodes = 0;
        assert_eq!(validate_record(r).unwrap_err().field(), "nodes");
    }

    #[test]
    fn hpl_requires_gflops_but_vasp_does_not() {
        let mut r = sample();
        r.gflops = None;
        r.record_id.clear();
        assert_eq!(validate_record(r.clone()).unwrap_err().field(), "gflops");
        r.family = Family::Vasp;
        assert!(validate_record(r).is_ok());
    }

    #[test]
    fn rejects_negative_or_nan_gflops() {
        for g in [-1.0, f64::NAN, f64::INFINITY] {
            let mut r = sample();
            r.record_id.clear();
            r.gflops = Some(g);
            assert_eq!(validate_record(r).unwrap_err().field(), "gflops");
        }
    }

    #[test]
    fn rejects_bad_site_id_and_timestamp() {
        let mut r = sample();
        r.site_id = "bad id".into();
        assert_eq!(validate_record(r).unwrap_err().field(), "site_id");

        let mut r = sample();
        r.timestamp_utc = "2026-10-16 08:30".into();
        assert_eq!(validate_record(r).unwrap_err().field(), "timestamp_utc");
    }

    #[test]
    fn rejects_tampered_record_id() {
        let mut r = sample();
        r.runtime_seconds = 200.0;
        assert_eq!(validate_record(r).unwrap_err().field(), "record_id");
    }

    #[test]
    fn total_cores_exhaustive() {
        for n in 1..=64u32 {
            for p in 1..=64u32 {
                let c = RunConfig::new(n, p);
                assert_eq!(c.total_cores(), u64::from(n * p));
                assert!(c.validate().is_ok());
            }
        }
        assert_eq!(RunConfig::new(0, 4).validate().unwrap_err().field(), "nodes");
    }

    #[test]
    fn enums_round_trip_through_strings() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{f}\""));
        }
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("flops_total".parse::<Metric>().is_err());
    }

    #[test]
    fn timestamp_format_is_seconds_precision() {
        let t = parse_timestamp("2026-10-16T08:30:00Z").unwrap();
        assert_eq!(format_timestamp(t), "2026-10-16T08:30:00Z");
        assert!(parse_timestamp(&now_timestamp()).is_some());
    }

    #[test]
    fn duplicate_cases_are_rejected() {
        let a = BenchmarkCase::new(Family::Hpl, "x");
        let b = BenchmarkCase::new(Family::Vasp, "x");
        assert!(check_unique_cases(&[a.clone(), b]).is_ok());
        assert!(check_unique_cases(&[a.clone(), a]).is_err());
    }

    #[test]
    fn record_json_uses_snake_case_fields() {
        let v = serde_json::to_value(sample()).unwrap();
        for key in [
            "record_id",
            "site_id",
            "family",
            "case_name",
            "nodes",
            "ppn",
            "runtime_seconds",
            "gflops",
            "passed",
            "timestamp_utc",
            "tool_version",
            "metadata",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_record() -> impl Strategy<Value = RunRecord> {
            (
                "[A-Za-z0-9._-]{0,6}",
                0u32..5,
                0u32..5,
                prop_oneof![Just(0.0), Just(-1.0), 1e-6..1e5f64],
                proptest::option::of(prop_oneof![Just(-2.0), 0.0..1e4f64]),
                prop::sample::select(Family::ALL.to_vec()),
            )
                .prop_map(|(site, nodes, ppn, rt, gflops, family)| RunRecord {
                    record_id: String::new(),
                    site_id: site,
                    family,
                    case_name: "c".into(),
                    nodes,
                    ppn,
                    runtime_seconds: rt,
                    gflops,
                    passed: true,
                    timestamp_utc: "2026-01-01T00:00:00Z".into(),
                    tool_version: "t".into(),
                    metadata: BTreeMap::new(),
                })
        }

        proptest! {
            #[test]
            fn validation_is_representation_stable(r in arb_record()) {
                let direct = validate_record(r.clone()).is_ok();
                let json = serde_json::to_string(&r).unwrap();
                let back: RunRecord = serde_json::from_str(&json).unwrap();
                prop_assert_eq!(&back, &r);
                prop_assert_eq!(validate_record(back).is_ok(), direct);
            }
        }
    }
}
