//! Application-specific support: input templates, HPL.dat generation,
//! launcher commands and output parsing for HPL, VASP, GROMACS and the
//! built-in kernel.

mod command;
mod hpl;
mod parse;
mod template;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

pub use command::{
    build_command, default_binary, LaunchCommand, DEFAULT_KERNEL_N, DEFAULT_KERNEL_SEED, DEFAULT_LAUNCHER,
    DEFAULT_NP_FLAG,
};
pub use hpl::{hpl_generate_input, square_grid, HplParams};
pub use parse::{
    parse_builtin_output, parse_gromacs_output, parse_hpl_output, parse_output, parse_vasp_output, ParsedOutput,
};
pub use template::{placeholders, render_template};

use crate::domain::{BenchmarkCase, RunConfig, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("template variable {0:?} has no binding")]
    MissingVariable(String),
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
    #[error("invalid process grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

/// Names always bound when rendering a case's templates.
pub const RUN_VARIABLES: [&str; 3] = ["nodes", "ppn", "total_cores"];

/// Template variables for one run: the case parameters overlaid with the
/// run-derived `nodes`, `ppn` and `total_cores`.
pub fn run_variables(case: &BenchmarkCase, config: &RunConfig) -> BTreeMap<String, Scalar> {
    let mut vars = case.parameters.clone();
    vars.insert("nodes".into(), Scalar::from(config.nodes));
    vars.insert("ppn".into(), Scalar::from(config.ppn));
    vars.insert("total_cores".into(), Scalar::Int(config.total_cores() as i64));
    vars
}

/// Checks that every placeholder in the case's templates is bound either by
/// a parameter or by a run-derived variable.
pub fn check_case_templates(case: &BenchmarkCase, base_dir: &Path) -> Result<(), AdapterError> {
    for rel in &case.template_paths {
        let path = base_dir.join(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| AdapterError::Io { path: path.display().to_string(), message: e.to_string() })?;
        for name in placeholders(&text)? {
            if !case.parameters.contains_key(&name) && !RUN_VARIABLES.contains(&name.as_str()) {
                return Err(AdapterError::MissingVariable(name));
            }
        }
    }
    Ok(())
}
