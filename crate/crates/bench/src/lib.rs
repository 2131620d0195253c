//! Synthetic inputs shared by the criterion benches.

use std::collections::BTreeMap;

use scalebench::{Family, RunRecord};

/// `sites x [1,2,4,8] x reps` HPL records with gflops decaying per site.
pub fn synthetic_records(sites: usize, reps: usize) -> Vec<RunRecord> {
    let mut out = Vec::with_capacity(sites * 4 * reps);
    for s in 0..sites {
        let efficiency = 0.98 - 0.02 * (s % 10) as f64;
        for nodes in [1u32, 2, 4, 8] {
            for rep in 0..reps {
                let gflops = 100.0 * f64::from(nodes) * efficiency.powi(nodes.ilog2() as i32) + rep as f64 * 0.25;
                out.push(
                    RunRecord {
                        record_id: String::new(),
                        site_id: format!("site-{s:03}"),
                        family: Family::Hpl,
                        case_name: "hpl".into(),
                        nodes,
                        ppn: 16,
                        runtime_seconds: 1000.0 / gflops,
                        gflops: Some(gflops),
                        passed: true,
                        timestamp_utc: format!("2026-10-16T08:{:02}:{:02}Z", rep / 60 % 60, rep % 60),
                        tool_version: "bench".into(),
                        metadata: BTreeMap::new(),
                    }
                    .with_computed_id(),
                );
            }
        }
    }
    out
}

/// A representative HPL stdout capture.
pub const HPL_OUTPUT: &str = "\
================================================================================
T/V                N    NB     P     Q               Time                 Gflops
--------------------------------------------------------------------------------
WR11C2R4       35840   192     4     4             184.59              1.663e+02
--------------------------------------------------------------------------------
||Ax-b||_oo/(eps*(||A||_oo*||x||_oo+||b||_oo)*N)=   3.47164021e-03 ...... PASSED
================================================================================
";
