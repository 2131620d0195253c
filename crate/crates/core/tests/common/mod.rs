#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use scalebench::{Family, Metric, RunRecord};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn record(site: &str, nodes: u32, ppn: u32, gflops: f64, runtime: f64) -> RunRecord {
    RunRecord {
        record_id: String::new(),
        site_id: site.into(),
        family: Family::Hpl,
        case_name: "hpl".into(),
        nodes,
        ppn,
        runtime_seconds: runtime,
        gflops: Some(gflops),
        passed: true,
        timestamp_utc: "2026-10-16T08:00:00Z".into(),
        tool_version: "test".into(),
        metadata: BTreeMap::new(),
    }
    .with_computed_id()
}

/// Direct evaluation of each metric definition: naive means per
/// (site, case, nodes, ppn), baseline at nodes = 1 with the same ppn.
pub fn oracle(records: &[RunRecord], metric: Metric) -> BTreeMap<(String, u32, u32), f64> {
    let mut groups: BTreeMap<(String, u32, u32), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.site_id.clone(), r.nodes, r.ppn)).or_default().push(r);
    }
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
    let mut out = BTreeMap::new();
    for ((site, nodes, ppn), rs) in &groups {
        let value = match metric {
            Metric::Speedup => mean(rs.iter().map(|r| 1.0 / r.runtime_seconds).collect()),
            Metric::PerformancePerCore => {
                mean(rs.iter().map(|r| r.gflops.unwrap() / (r.nodes as f64 * r.ppn as f64)).collect())
            }
            Metric::PerformanceGain | Metric::SpeedupRatio => {
                let Some(base) = groups.get(&(site.clone(), 1, *ppn)) else { continue };
                let p1 = mean(base.iter().map(|r| r.gflops.unwrap()).collect());
                let pn = mean(rs.iter().map(|r| r.gflops.unwrap()).collect());
                if metric == Metric::PerformanceGain {
                    pn / p1
                } else {
                    pn / p1 / *nodes as f64
                }
            }
        };
        out.insert((site.clone(), *nodes, *ppn), value);
    }
    out
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
