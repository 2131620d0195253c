//! Launcher command construction. Nothing here executes anything.

use std::collections::BTreeMap;

use crate::domain::{BenchmarkCase, Family, RunConfig};

pub const DEFAULT_LAUNCHER: &str = "mpirun";
pub const DEFAULT_NP_FLAG: &str = "-np";
pub const DEFAULT_KERNEL_N: i64 = 256;
pub const DEFAULT_KERNEL_SEED: i64 = 42;

/// A process invocation: argument vector plus extra environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchCommand {
    pub argv: Vec<String>,
    pub env: BTreeMap<String, String>,
}

/// Binary used for an external family when the case does not name one.
pub fn default_binary(family: Family) -> Option<&'static str> {
    match family {
        Family::Hpl => Some("xhpl"),
        Family::Vasp => Some("vasp_std"),
        Family::Gromacs => Some("gmx_mpi"),
        Family::BuiltinLu => None,
    }
}

/// Builds the invocation for one run.
///
/// External families go through an MPI launcher
/// (`<launcher> <np_flag> <total_cores> <binary> <args...>`); the launcher
/// and flag come from the `launcher` and `np_flag` case parameters. The
/// built-in kernel is single-process, so its argv is the suite binary's
/// `kernel` subcommand with no launcher. Case parameters named `env.X`
/// become environment variables.
pub fn build_command(case: &BenchmarkCase, config: &RunConfig, binary_path: &str) -> LaunchCommand {
    let mut env: BTreeMap<String, String> = case
        .parameters
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("env.").map(|name| (name.to_string(), v.to_string())))
        .collect();

    let argv = match case.family {
        Family::BuiltinLu => {
            let n = case.parameter("n").and_then(|v| v.as_i64()).unwrap_or(DEFAULT_KERNEL_N);
            let seed = case.parameter("seed").and_then(|v| v.as_i64()).unwrap_or(DEFAULT_KERNEL_SEED);
            vec![
                binary_path.to_string(),
                "kernel".to_string(),
                "--n".to_string(),
                n.to_string(),
                "--seed".to_string(),
                seed.to_string(),
            ]
        }
        _ => {
            env.entry("OMP_NUM_THREADS".to_string()).or_insert_with(|| "1".to_string());
            let launcher = case.parameter_str("launcher").unwrap_or_else(|| DEFAULT_LAUNCHER.into());
            let np_flag = case.parameter_str("np_flag").unwrap_or_else(|| DEFAULT_NP_FLAG.into());
            let mut argv = vec![launcher, np_flag, config.total_cores().to_string(), binary_path.to_string()];
            if let Some(args) = case.parameter_str("args") {
                argv.extend(args.split_whitespace().map(String::from));
            }
            argv
        }
    };
    LaunchCommand { argv, env }
}
