mod common;

use proptest::prelude::*;
use scalebench::metrics::{performance_gain, speedup_ratio};
use scalebench::{aggregate, Metric, RunRecord};

use common::{close, oracle, record};

const NODES: [u32; 4] = [1, 2, 4, 8];

/// Up to three sites, nodes {1,2,4,8}, one or two ppn values and 1..=3
/// repetitions per cell.
fn dataset() -> impl Strategy<Value = Vec<RunRecord>> {
    let cell = (1u32..=3, prop::collection::vec((0.5f64..5000.0, 0.01f64..1e4), 3));
    prop::collection::vec(
        (prop::sample::select(vec!["A", "B-2", "c.3"]), prop::sample::select(vec![1u32, 16]), cell),
        1..12,
    )
    .prop_map(|cells| {
        let mut out = Vec::new();
        for (site, ppn, (reps, samples)) in cells {
            for (i, &nodes) in NODES.iter().enumerate() {
                for (g, t) in samples.iter().take(reps as usize) {
                    out.push(record(site, nodes, ppn, g * (i + 1) as f64, *t));
                }
            }
        }
        out
    })
}

fn assert_matches_oracle(records: &[RunRecord], metric: Metric) {
    let agg = aggregate(records, metric);
    let want = oracle(records, metric);
    assert_eq!(agg.points.len(), want.len());
    for p in &agg.points {
        let w = want[&(p.site_id.clone(), p.nodes, p.ppn)];
        assert!(close(p.value, w, 1e-12), "{metric} {} n={} ppn={}: {} vs {w}", p.site_id, p.nodes, p.ppn, p.value);
    }
}

proptest! {
    #[test]
    fn aggregate_agrees_with_oracle(records in dataset()) {
        for metric in Metric::ALL {
            assert_matches_oracle(&records, metric);
        }
    }

    #[test]
    fn permutation_invariant(records in dataset(), seed in any::<u64>()) {
        let mut shuffled = records.clone();
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        for metric in Metric::ALL {
            // Bit-for-bit: the mean sums sorted values.
            prop_assert_eq!(aggregate(&records, metric), aggregate(&shuffled, metric));
        }
    }

    #[test]
    fn single_node_ratio_is_exactly_one(records in dataset()) {
        for metric in [Metric::SpeedupRatio, Metric::PerformanceGain] {
            for p in aggregate(&records, metric).points.iter().filter(|p| p.nodes == 1) {
                prop_assert_eq!(p.value, 1.0);
            }
        }
    }

    #[test]
    fn ratio_metrics_are_scale_invariant(records in dataset(), k in prop::sample::select(vec![0.5, 2.0, 3.0, 1e3])) {
        let scaled: Vec<RunRecord> = records
            .iter()
            .map(|r| RunRecord { gflops: r.gflops.map(|g| g * k), ..r.clone() })
            .collect();
        for metric in [Metric::SpeedupRatio, Metric::PerformanceGain] {
            let a = aggregate(&records, metric).points;
            let b = aggregate(&scaled, metric).points;
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(close(x.value, y.value, 1e-12));
            }
        }
    }

    #[test]
    fn per_core_is_homogeneous(records in dataset(), k in 0.1f64..100.0) {
        let scaled: Vec<RunRecord> = records
            .iter()
            .map(|r| RunRecord { gflops: r.gflops.map(|g| g * k), ..r.clone() })
            .collect();
        let a = aggregate(&records, Metric::PerformancePerCore).points;
        let b = aggregate(&scaled, Metric::PerformancePerCore).points;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(x.value * k, y.value, 1e-12));
        }
    }

    #[test]
    fn speedup_ratio_is_gain_over_nodes(perf_n in 1e-3f64..1e6, perf_1 in 1e-3f64..1e6, nodes in 1u32..4096) {
        let gain = performance_gain(perf_n, perf_1).unwrap();
        prop_assert_eq!(gain, perf_n / perf_1);
        prop_assert_eq!(speedup_ratio(gain, nodes).unwrap(), gain / nodes as f64);
    }
}

#[test]
fn missing_baseline_yields_warning_not_point() {
    let records = vec![record("A", 2, 16, 10.0, 1.0), record("A", 4, 16, 20.0, 1.0)];
    let agg = aggregate(&records, Metric::SpeedupRatio);
    assert!(agg.points.is_empty());
    assert_eq!(agg.warnings.len(), 2);
    assert!(agg.warnings.iter().all(|w| w.reason.contains("baseline")));
}

#[test]
fn baseline_uses_matching_ppn() {
    let records = vec![record("A", 1, 16, 100.0, 1.0), record("A", 1, 32, 150.0, 1.0), record("A", 2, 32, 240.0, 1.0)];
    let agg = aggregate(&records, Metric::SpeedupRatio);
    let p = agg.points.iter().find(|p| p.nodes == 2).unwrap();
    assert_eq!(p.value, 240.0 / 150.0 / 2.0);
}
