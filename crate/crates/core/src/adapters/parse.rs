//! Output parsers for the supported application families.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdapterError;
use crate::domain::Family;
use crate::kernels::KernelResult;

/// Timing and performance extracted from one application output capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub family: Family,
    pub runtime_seconds: f64,
    #[serde(default)]
    pub gflops: Option<f64>,
    pub passed: bool,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

fn parse_err(msg: &str) -> AdapterError {
    AdapterError::Parse(msg.to_string())
}

fn positive_runtime(value: f64) -> Result<f64, AdapterError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(parse_err("non-positive runtime"))
    }
}

fn number(token: &str, what: &str) -> Result<f64, AdapterError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| AdapterError::Parse(format!("invalid {what} value {token:?}")))
}

fn is_hpl_header(line: &str) -> bool {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    tokens.len() >= 7 && tokens[..7] == ["T/V", "N", "NB", "P", "Q", "Time", "Gflops"]
}

/// Parses an HPL stdout capture.
///
/// The first results row after a `T/V N NB P Q Time Gflops` header supplies
/// the time and GFLOPS. The run passes only if every residual check line
/// says `PASSED`.
pub fn parse_hpl_output(text: &str) -> Result<ParsedOutput, AdapterError> {
    let mut lines = text.lines();
    let mut row: Option<Vec<&str>> = None;
    while let Some(line) = lines.next() {
        if !is_hpl_header(line) {
            continue;
        }
        row = lines
            .by_ref()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.chars().all(|c| c == '-' || c == '='))
            .map(|l| l.split_whitespace().collect());
        break;
    }
    let row = row.filter(|r| r.len() >= 7).ok_or_else(|| parse_err("no result row"))?;

    let runtime = positive_runtime(number(row[5], "Time")?)?;
    let gflops = number(row[6], "Gflops")?;
    if gflops < 0.0 {
        return Err(parse_err("negative Gflops"));
    }

    let verdicts: Vec<bool> = text.lines().filter(|l| l.contains("||Ax-b||")).map(|l| l.contains("PASSED")).collect();
    if verdicts.is_empty() {
        return Err(parse_err("no residual verdict"));
    }

    let extras =
        ["encoding", "n", "nb", "p", "q"].iter().zip(&row).map(|(k, v)| (k.to_string(), v.to_string())).collect();

    Ok(ParsedOutput {
        family: Family::Hpl,
        runtime_seconds: runtime,
        gflops: Some(gflops),
        passed: verdicts.iter().all(|&v| v),
        extras,
    })
}

/// Parses an OUTCAR-style capture. The last `Elapsed time (sec):` line wins
/// since restarted runs append a fresh footer.
pub fn parse_vasp_output(text: &str) -> Result<ParsedOutput, AdapterError> {
    const MARKER: &str = "Elapsed time (sec):";
    let value = text
        .lines()
        .rev()
        .find_map(|l| l.find(MARKER).map(|i| l[i + MARKER.len()..].trim()))
        .ok_or_else(|| parse_err("no elapsed time"))?;
    let token = value.split_whitespace().next().unwrap_or("");
    let runtime = positive_runtime(number(token, "elapsed time")?)?;
    Ok(ParsedOutput {
        family: Family::Vasp,
        runtime_seconds: runtime,
        gflops: None,
        passed: true,
        extras: BTreeMap::new(),
    })
}

fn labelled_values<'a>(text: &'a str, label: &str) -> Option<Vec<&'a str>> {
    text.lines()
        .rev()
        .find_map(|l| l.trim_start().strip_prefix(label))
        .map(|rest| rest.split_whitespace().collect::<Vec<_>>())
}

/// Parses a GROMACS `md.log` capture. Runtime is the wall-time column of the
/// `Time:` line; ns/day is carried in `extras` when present.
pub fn parse_gromacs_output(text: &str) -> Result<ParsedOutput, AdapterError> {
    let time = labelled_values(text, "Time:").ok_or_else(|| parse_err("no time line"))?;
    let wall = time.get(1).ok_or_else(|| parse_err("time line has no wall-time column"))?;
    let runtime = positive_runtime(number(wall, "wall time")?)?;

    let mut extras = BTreeMap::new();
    if let Some(perf) = labelled_values(text, "Performance:") {
        if let Some(ns_per_day) = perf.first() {
            extras.insert("ns_per_day".to_string(), ns_per_day.to_string());
        }
        if let Some(hour_per_ns) = perf.get(1) {
            extras.insert("hour_per_ns".to_string(), hour_per_ns.to_string());
        }
    }
    Ok(ParsedOutput { family: Family::Gromacs, runtime_seconds: runtime, gflops: None, passed: true, extras })
}

/// Parses the JSON line printed by the suite's `kernel` subcommand.
pub fn parse_builtin_output(text: &str) -> Result<ParsedOutput, AdapterError> {
    let result: KernelResult = text
        .lines()
        .rev()
        .map(str::trim)
        .filter(|l| l.starts_with('{'))
        .find_map(|l| serde_json::from_str(l).ok())
        .ok_or_else(|| parse_err("no kernel result"))?;
    let runtime = positive_runtime(result.runtime_seconds)?;
    let mut extras = BTreeMap::new();
    extras.insert("n".to_string(), result.n.to_string());
    extras.insert("residual".to_string(), result.residual.to_string());
    Ok(ParsedOutput {
        family: Family::BuiltinLu,
        runtime_seconds: runtime,
        gflops: Some(result.gflops),
        passed: result.passed,
        extras,
    })
}

/// Dispatches to the parser for `family`.
pub fn parse_output(family: Family, text: &str) -> Result<ParsedOutput, AdapterError> {
    match family {
        Family::Hpl => parse_hpl_output(text),
        Family::Vasp => parse_vasp_output(text),
        Family::Gromacs => parse_gromacs_output(text),
        Family::BuiltinLu => parse_builtin_output(text),
    }
}
