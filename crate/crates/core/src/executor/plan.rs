use serde::{Deserialize, Serialize};

use super::ExecError;
use crate::domain::{BenchmarkCase, RunConfig, Site};

/// The ordered run matrix for one case on one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub case: BenchmarkCase,
    pub site: Site,
    configs: Vec<RunConfig>,
}

impl RunPlan {
    /// Builds a plan from explicit configs. They must be sorted by
    /// `(nodes, ppn, repetition)`, valid, and share one ppn unless
    /// `allow_mixed_ppn` is set.
    pub fn new(
        case: BenchmarkCase,
        site: Site,
        configs: Vec<RunConfig>,
        allow_mixed_ppn: bool,
    ) -> Result<Self, ExecError> {
        if configs.is_empty() {
            return Err(ExecError::InvalidPlan("no configurations".into()));
        }
        for c in &configs {
            c.validate().map_err(|e| ExecError::InvalidPlan(e.to_string()))?;
        }
        if configs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExecError::InvalidPlan("configurations must be strictly ascending".into()));
        }
        if !allow_mixed_ppn && configs.iter().any(|c| c.ppn != configs[0].ppn) {
            return Err(ExecError::InvalidPlan("configurations differ in ppn".into()));
        }
        case.validate().map_err(|e| ExecError::InvalidPlan(e.to_string()))?;
        site.validate().map_err(|e| ExecError::InvalidPlan(e.to_string()))?;
        Ok(RunPlan { case, site, configs })
    }

    pub fn configs(&self) -> &[RunConfig] {
        &self.configs
    }
}

/// Plans `repetitions` runs at each node count with a fixed ppn.
pub fn plan_runs(
    case: BenchmarkCase,
    site: Site,
    node_list: &[u32],
    ppn: u32,
    repetitions: u32,
) -> Result<RunPlan, ExecError> {
    if node_list.is_empty() {
        return Err(ExecError::InvalidPlan("node list is empty".into()));
    }
    if node_list.contains(&0) {
        return Err(ExecError::InvalidPlan("node counts must be positive".into()));
    }
    if node_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExecError::InvalidPlan("node list must be strictly increasing without duplicates".into()));
    }
    if repetitions == 0 {
        return Err(ExecError::InvalidPlan("repetitions must be at least 1".into()));
    }
    if ppn == 0 {
        return Err(ExecError::InvalidPlan("ppn must be at least 1".into()));
    }
    let configs = node_list
        .iter()
        .flat_map(|&nodes| (0..repetitions).map(move |repetition| RunConfig { nodes, ppn, repetition }))
        .collect();
    RunPlan::new(case, site, configs, false)
}
