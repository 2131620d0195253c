//! Scaling metrics and per-configuration averaging.
//!
//! Every aggregated point is the arithmetic mean over all records sharing
//! a [`GroupKey`]. GFLOPS-based ratios are formed from group means: the
//! baseline for a group is the mean GFLOPS of the matching single-node
//! group (same site, family, case and ppn).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Family, Metric, MetricPoint, RunRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("missing or non-positive single-node baseline")]
    MissingBaseline,
    #[error("runtime must be positive, got {0}")]
    NonPositiveRuntime(f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Ratio of GFLOPS at n nodes to GFLOPS at one node.
pub fn performance_gain(perf_n: f64, perf_1: f64) -> Result<f64, MetricsError> {
    if perf_1.is_nan() || perf_1 <= 0.0 {
        return Err(MetricsError::MissingBaseline);
    }
    if perf_n.is_nan() || perf_n < 0.0 {
        return Err(MetricsError::InvalidInput("perf_n must be non-negative"));
    }
    Ok(perf_n / perf_1)
}

/// Performance gain divided by the ideal speedup, which is the node count.
pub fn speedup_ratio(gain: f64, nodes: u32) -> Result<f64, MetricsError> {
    if nodes == 0 {
        return Err(MetricsError::InvalidInput("nodes must be at least 1"));
    }
    if gain.is_nan() || gain < 0.0 {
        return Err(MetricsError::InvalidInput("gain must be non-negative"));
    }
    Ok(gain / f64::from(nodes))
}

/// Inverse of total runtime in seconds.
pub fn speedup(runtime_seconds: f64) -> Result<f64, MetricsError> {
    if runtime_seconds.is_nan() || runtime_seconds <= 0.0 {
        return Err(MetricsError::NonPositiveRuntime(runtime_seconds));
    }
    Ok(1.0 / runtime_seconds)
}

pub fn performance_per_core(gflops: f64, total_cores: u64) -> Result<f64, MetricsError> {
    if total_cores == 0 {
        return Err(MetricsError::InvalidInput("total_cores must be at least 1"));
    }
    if gflops.is_nan() || gflops < 0.0 {
        return Err(MetricsError::InvalidInput("gflops must be non-negative"));
    }
    Ok(gflops / total_cores as f64)
}

/// "Site and configuration" grouping key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub site_id: String,
    pub case_name: String,
    pub nodes: u32,
    pub family: Family,
    pub ppn: u32,
}

impl GroupKey {
    pub fn of(r: &RunRecord) -> Self {
        GroupKey {
            site_id: r.site_id.clone(),
            case_name: r.case_name.clone(),
            nodes: r.nodes,
            family: r.family,
            ppn: r.ppn,
        }
    }

    fn baseline(&self) -> GroupKey {
        GroupKey { nodes: 1, ..self.clone() }
    }
}

/// A group left out of the aggregation and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationWarning {
    #[serde(flatten)]
    pub key: GroupKey,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub points: Vec<MetricPoint>,
    pub warnings: Vec<AggregationWarning>,
}

/// Arithmetic mean that does not depend on input order: values are summed in
/// ascending order.
pub fn order_independent_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_gflops(records: &[&RunRecord]) -> Option<(f64, u32)> {
    let mut values: Vec<f64> = records.iter().filter_map(|r| r.gflops).collect();
    if values.is_empty() {
        return None;
    }
    let n = values.len() as u32;
    Some((order_independent_mean(&mut values), n))
}

/// Groups records by [`GroupKey`] and averages `metric` within each group.
///
/// Groups that cannot produce a value (no single-node baseline, no GFLOPS
/// for a GFLOPS metric) are reported in `warnings` instead of failing.
/// Points are sorted by site, case, nodes, family and ppn.
pub fn aggregate(records: &[RunRecord], metric: Metric) -> Aggregation {
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(r)).or_default().push(r);
    }

    let mut out = Aggregation::default();
    for (key, members) in &groups {
        let point = |value: f64, sample_count: u32| MetricPoint {
            metric,
            site_id: key.site_id.clone(),
            family: key.family,
            case_name: key.case_name.clone(),
            nodes: key.nodes,
            ppn: key.ppn,
            value,
            sample_count,
        };
        let mut warn =
            |reason: &str| out.warnings.push(AggregationWarning { key: key.clone(), reason: reason.to_string() });

        match metric {
            Metric::Speedup => {
                let mut values: Vec<f64> = members.iter().filter_map(|r| speedup(r.runtime_seconds).ok()).collect();
                if values.is_empty() {
                    warn("no positive runtimes");
                    continue;
                }
                let n = values.len() as u32;
                out.points.push(point(order_independent_mean(&mut values), n));
            }
            Metric::PerformancePerCore => {
                let mut values: Vec<f64> =
                    members.iter().filter_map(|r| performance_per_core(r.gflops?, r.total_cores()).ok()).collect();
                if values.is_empty() {
                    warn("no gflops values");
                    continue;
                }
                let n = values.len() as u32;
                out.points.push(point(order_independent_mean(&mut values), n));
            }
            Metric::PerformanceGain | Metric::SpeedupRatio => {
                let Some((mean, n)) = mean_gflops(members) else {
                    warn("no gflops values");
                    continue;
                };
                let baseline = groups.get(&key.baseline()).and_then(|b| mean_gflops(b)).map(|(m, _)| m);
                let gain = match baseline.map(|b| performance_gain(mean, b)) {
                    Some(Ok(g)) => g,
                    _ => {
                        warn("missing single-node baseline");
                        continue;
                    }
                };
                let value = if metric == Metric::SpeedupRatio {
                    match speedup_ratio(gain, key.nodes) {
                        Ok(v) => v,
                        Err(e) => {
                            warn(&e.to_string());
                            continue;
                        }
                    }
                } else {
                    gain
                };
                out.points.push(point(value, n));
            }
        }
    }
    out
}
