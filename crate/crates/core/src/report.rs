//! Per-site series, CSV tables and SVG line charts.
//!
//! Output is deterministic: identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Family, Metric, MetricPoint};

pub const CSV_HEADER: &str = "site,metric,nodes,value,sample_count";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("points disagree on metric, family or case")]
    MixedMetrics,
    #[error("site {site} has more than one point at {nodes} nodes")]
    DuplicatePoint { site: String, nodes: u32 },
    #[error("nothing to chart")]
    EmptyChart,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub nodes: u32,
    pub value: f64,
    pub sample_count: u32,
}

/// One polyline of a chart: a site's metric values by node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub metric: Metric,
    pub points: Vec<SeriesPoint>,
}

/// Groups points into one series per site, sorted by label, each sorted by nodes.
pub fn build_series(points: &[MetricPoint]) -> Result<Vec<Series>, ReportError> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let key = |p: &MetricPoint| (p.metric, p.family, p.case_name.clone());
    let expected: (Metric, Family, String) = key(first);
    if points.iter().any(|p| key(p) != expected) {
        return Err(ReportError::MixedMetrics);
    }

    let mut by_site: std::collections::BTreeMap<&str, Vec<SeriesPoint>> = Default::default();
    for p in points {
        by_site.entry(&p.site_id).or_default().push(SeriesPoint {
            nodes: p.nodes,
            value: p.value,
            sample_count: p.sample_count,
        });
    }
    by_site
        .into_iter()
        .map(|(site, mut pts)| {
            pts.sort_by_key(|p| p.nodes);
            if let Some(w) = pts.windows(2).find(|w| w[0].nodes == w[1].nodes) {
                return Err(ReportError::DuplicatePoint { site: site.to_string(), nodes: w[0].nodes });
            }
            Ok(Series { label: site.to_string(), metric: expected.0, points: pts })
        })
        .collect()
}

/// RFC 4180 CSV with one row per point. Values use shortest round-trip formatting.
pub fn emit_csv(series: &[Series]) -> Result<String, ReportError> {
    let mut rows: Vec<(&str, Metric, SeriesPoint)> =
        series.iter().flat_map(|s| s.points.iter().map(move |p| (s.label.as_str(), s.metric, *p))).collect();
    rows.sort_by(|a, b| (a.0, a.2.nodes).cmp(&(b.0, b.2.nodes)));

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for (site, metric, p) in rows {
        w.write_record([
            site.to_string(),
            metric.as_str().to_string(),
            p.nodes.to_string(),
            p.value.to_string(),
            p.sample_count.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Step of the form {1,2,5}·10^k giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{v:.decimals$}")
}

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn x(&self, nodes: f64) -> f64 {
        let plot = WIDTH - LEFT - RIGHT;
        if self.x_max == self.x_min {
            LEFT + plot / 2.0
        } else {
            LEFT + (nodes - self.x_min) / (self.x_max - self.x_min) * plot
        }
    }

    fn y(&self, value: f64) -> f64 {
        let plot = HEIGHT - TOP - BOTTOM;
        HEIGHT - BOTTOM - (value - self.y_min) / (self.y_max - self.y_min) * plot
    }
}

/// Renders a standalone 640x480 SVG line chart: linear node axis with ticks
/// at the observed node counts, one polyline plus markers per series, and a
/// legend of site labels. Colours follow series order.
pub fn emit_svg_chart(series: &[Series], title: &str) -> Result<String, ReportError> {
    let series: Vec<&Series> = series.iter().filter(|s| !s.points.is_empty()).collect();
    if series.is_empty() {
        return Err(ReportError::EmptyChart);
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut node_ticks: Vec<u32> = all().map(|p| p.nodes).collect();
    node_ticks.sort_unstable();
    node_ticks.dedup();

    let v_max = all().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let v_min = all().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let lo = v_min.min(0.0);
    let hi = if v_max > lo { v_max } else { lo + 1.0 };
    let step = nice_step(hi - lo, 5.0);
    let axes = Axes {
        x_min: f64::from(node_ticks[0]),
        x_max: f64::from(*node_ticks.last().unwrap()),
        y_min: (lo / step).floor() * step,
        y_max: ((hi * 1.05) / step).ceil() * step,
    };
    let metric = series[0].metric;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        xml_escape(title)
    );

    // Axes and grid.
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{x0:.3}" y1="{y1:.3}" x2="{x1:.3}" y2="{y1:.3}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x0:.3}" y2="{y1:.3}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="x-ticks" text-anchor="middle">"#);
    for n in &node_ticks {
        let x = axes.x(f64::from(*n));
        let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{y1:.3}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}">{n}</text>"#, y1 + 20.0);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="y-ticks" text-anchor="end">"#);
    let ticks = ((axes.y_max - axes.y_min) / step).round() as i64;
    for i in 0..=ticks {
        let v = axes.y_min + i as f64 * step;
        let y = axes.y(v);
        let _ = writeln!(s, r##"<line x1="{x0:.3}" y1="{y:.3}" x2="{x1:.3}" y2="{y:.3}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, x0 - 6.0, y + 4.0, fmt_tick(v, step));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">Number of Nodes</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(metric.title())
    );

    // Data.
    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<(f64, f64)> =
            series.points.iter().map(|p| (axes.x(f64::from(p.nodes)), axes.y(p.value))).collect();
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, xml_escape(&series.label));
        if coords.len() > 1 {
            let pts: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
            let _ =
                writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        for (x, y) in &coords {
            let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{color}"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }

    // Legend.
    let lx = WIDTH - RIGHT + 16.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + i as f64 * 20.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, y + 4.0, xml_escape(&series.label));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// File stem for a report: `<case>_<metric>`.
pub fn report_stem(case_name: &str, metric: Metric) -> String {
    format!("{case_name}_{metric}")
}

/// Writes `<case>_<metric>.csv` and `<case>_<metric>.svg` into `dir`.
pub fn write_report(
    dir: &Path,
    case_name: &str,
    metric: Metric,
    series: &[Series],
) -> Result<(PathBuf, PathBuf), ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let stem = report_stem(case_name, metric);
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    let title = format!("{case_name}: {} vs Number of Nodes", metric.title());
    let svg = emit_svg_chart(series, &title)?;
    std::fs::write(&csv_path, emit_csv(series)?).map_err(io(&csv_path))?;
    std::fs::write(&svg_path, svg).map_err(io(&svg_path))?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(site: &str, nodes: u32, value: f64) -> MetricPoint {
        MetricPoint {
            metric: Metric::SpeedupRatio,
            site_id: site.into(),
            family: Family::Hpl,
            case_name: "hpl".into(),
            nodes,
            ppn: 16,
            value,
            sample_count: 1,
        }
    }

    fn fig1() -> Vec<MetricPoint> {
        let mut pts = Vec::new();
        for (site, vals) in [("OL-NHT", [1.0, 0.97, 0.95, 0.9]), ("AWS-NHT", [1.0, 0.9, 0.8, 0.62])] {
            for (n, v) in [1, 2, 4, 8].into_iter().zip(vals) {
                pts.push(point(site, n, v));
            }
        }
        pts
    }

    fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter_map(|l| l.split("points=\"").nth(1))
            .map(|rest| {
                rest.split('"')
                    .next()
                    .unwrap()
                    .split(' ')
                    .map(|pair| {
                        let (x, y) = pair.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_sites_four_points() {
        let series = build_series(&fig1()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].label, "AWS-NHT");
        assert!(series.iter().all(|s| s.points.len() == 4));
    }

    #[test]
    fn single_point_series() {
        let series = build_series(&[point("A", 1, 1.0)]).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].points.len(), 1);
    }

    #[test]
    fn mixed_metrics_rejected() {
        let mut pts = fig1();
        pts[3].metric = Metric::Speedup;
        assert!(matches!(build_series(&pts), Err(ReportError::MixedMetrics)));
        let dup = vec![point("A", 1, 1.0), point("A", 1, 1.0)];
        assert!(matches!(build_series(&dup), Err(ReportError::DuplicatePoint { .. })));
    }

    #[test]
    fn csv_rows_and_quoting() {
        let series = build_series(&fig1()).unwrap();
        let csv = emit_csv(&series).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[1], "AWS-NHT,speedup_ratio,1,1,1");
        assert_eq!(lines[4], "AWS-NHT,speedup_ratio,8,0.62,1");

        assert_eq!(emit_csv(&[]).unwrap().trim_end(), CSV_HEADER);

        let odd = build_series(&[point("a,b", 1, 1.0)]).unwrap();
        assert!(emit_csv(&odd).unwrap().contains("\"a,b\",speedup_ratio,1,1,1"));
    }

    #[test]
    fn svg_single_series_structure() {
        let pts: Vec<MetricPoint> =
            [(1, 1.0), (2, 0.9), (4, 0.8), (8, 0.62)].into_iter().map(|(n, v)| point("AZ-IB-H", n, v)).collect();
        let svg = emit_svg_chart(&build_series(&pts).unwrap(), "HPL").unwrap();
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 4);
        assert!(lines[0].windows(2).all(|w| w[0].0 < w[1].0));
        assert!(svg.contains(">AZ-IB-H</text>"));
        assert!(svg.contains("Number of Nodes"));
        assert!(svg.contains("Speedup Ratio"));
        assert!(svg.contains(r#"viewBox="0 0 640 480""#));
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn svg_single_point_has_marker_only() {
        let svg = emit_svg_chart(&build_series(&[point("A", 1, 1.0)]).unwrap(), "t").unwrap();
        assert!(!svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn svg_empty_is_error() {
        assert!(matches!(emit_svg_chart(&[], "t"), Err(ReportError::EmptyChart)));
    }

    #[test]
    fn output_is_deterministic_and_escaped() {
        let series = build_series(&fig1()).unwrap();
        assert_eq!(emit_svg_chart(&series, "a<b").unwrap(), emit_svg_chart(&series, "a<b").unwrap());
        assert!(emit_svg_chart(&series, "a<b").unwrap().contains("a&lt;b"));
        assert_eq!(emit_csv(&series).unwrap(), emit_csv(&series).unwrap());
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(1.0, 5.0), 0.2);
        assert_eq!(nice_step(100.0, 5.0), 20.0);
        assert_eq!(nice_step(0.03, 5.0), 0.01);
    }

    #[test]
    fn writes_named_files() {
        let dir = tempfile::tempdir().unwrap();
        let series = build_series(&fig1()).unwrap();
        let (csv, svg) = write_report(dir.path(), "hpl", Metric::SpeedupRatio, &series).unwrap();
        assert!(csv.ends_with("hpl_speedup_ratio.csv"));
        assert!(svg.ends_with("hpl_speedup_ratio.svg"));
        assert!(csv.exists() && svg.exists());
    }
}
