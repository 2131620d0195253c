//! Benchmark orchestration for scientific applications.
//!
//! Runs benchmark cases across a nodes x processors-per-node matrix,
//! records the results, computes scaling metrics and serves aggregated
//! series to comparison charts.
//!
//! - [`domain`]: shared data model and record validation
//! - [`kernels`]: built-in dense LU (Linpack-style) benchmark
//! - [`adapters`]: templates, HPL.dat, launcher commands, output parsers
//! - [`executor`]: run plans and runners (local, replay, batch script)
//! - [`metrics`]: performance gain, speedup ratio, speedup, per-core performance
//! - [`resultstore`]: JSON-Lines result log and push client
//! - [`service`]: HTTP results database with query and series endpoints
//! - [`report`]: CSV and SVG chart output

pub mod adapters;
pub mod domain;
pub mod executor;
pub mod kernels;
pub mod metrics;
pub mod report;
pub mod resultstore;
pub mod service;

pub use domain::{
    validate_record, BenchmarkCase, Family, Metric, MetricPoint, RunConfig, RunRecord, Scalar, Site, ValidationError,
};
pub use metrics::{aggregate, Aggregation, GroupKey};
pub use report::Series;
