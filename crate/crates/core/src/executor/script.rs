//! PBS and Slurm job script generation. Scripts are only written, never submitted.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::adapters::build_command;
use crate::domain::{BenchmarkCase, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    Pbs,
    Slurm,
}

impl std::str::FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pbs" => Ok(Scheduler::Pbs),
            "slurm" => Ok(Scheduler::Slurm),
            other => Err(format!("unknown scheduler {other:?} (expected pbs or slurm)")),
        }
    }
}

/// Quotes `arg` for a POSIX shell if it contains anything outside a safe set.
pub fn shell_quote(arg: &str) -> String {
    let safe = !arg.is_empty() && arg.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_./=:,+@%".contains(&b));
    if safe {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

/// Job name used for a run: `<case>_<nodes>x<ppn>`, restricted to safe characters.
pub fn job_name(case: &BenchmarkCase, config: &RunConfig) -> String {
    let name: String = case
        .case_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{name}_{}x{}", config.nodes, config.ppn)
}

/// Renders a batch script whose body runs `build_command`'s argv verbatim.
/// When `output_path` is given, stdout is redirected there.
pub fn emit_batch_script(
    case: &BenchmarkCase,
    config: &RunConfig,
    scheduler: Scheduler,
    binary_path: &str,
    output_path: Option<&str>,
) -> String {
    let cmd = build_command(case, config, binary_path);
    let name = job_name(case, config);
    let mut s = String::from("#!/bin/bash\n");
    match scheduler {
        Scheduler::Pbs => {
            let _ = writeln!(s, "#PBS -N {name}");
            let _ = writeln!(s, "#PBS -l nodes={}:ppn={}", config.nodes, config.ppn);
            let _ = writeln!(s, "#PBS -j oe");
            s.push_str("\ncd \"${PBS_O_WORKDIR:-.}\"\n");
        }
        Scheduler::Slurm => {
            let _ = writeln!(s, "#SBATCH --job-name={name}");
            let _ = writeln!(s, "#SBATCH --nodes={}", config.nodes);
            let _ = writeln!(s, "#SBATCH --ntasks-per-node={}", config.ppn);
            s.push_str("\ncd \"${SLURM_SUBMIT_DIR:-.}\"\n");
        }
    }
    for (k, v) in &cmd.env {
        let _ = writeln!(s, "export {k}={}", shell_quote(v));
    }
    let line: Vec<String> = cmd.argv.iter().map(|a| shell_quote(a)).collect();
    s.push_str(&line.join(" "));
    if let Some(out) = output_path {
        let _ = write!(s, " > {}", shell_quote(out));
    }
    s.push('\n');
    s
}
