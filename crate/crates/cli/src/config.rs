//! TOML configuration file.
//!
//! Relative paths in the file resolve against the file's own directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use scalebench::domain::{check_unique_cases, DEFAULT_NODE_LIST};
use scalebench::executor::Scheduler;
use scalebench::service::ServiceConfig;
use scalebench::{BenchmarkCase, Family, Site};

pub const DEFAULT_CONFIG: &str = "scalebench.toml";
pub const CONFIG_ENV: &str = "SB_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunnerChoice {
    Local,
    Replay,
    BatchScript,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Remote {
    pub endpoint: Option<String>,
    pub token: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub node_list: Vec<u32>,
    pub ppn: u32,
    pub repetitions: u32,
    pub runner: RunnerChoice,
    pub scheduler: Scheduler,
    pub fixtures: PathBuf,
    pub scripts: PathBuf,
    pub work_dir: PathBuf,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            node_list: DEFAULT_NODE_LIST.to_vec(),
            ppn: 1,
            repetitions: 1,
            runner: RunnerChoice::Local,
            scheduler: Scheduler::Slurm,
            fixtures: "fixtures".into(),
            scripts: "jobs".into(),
            work_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Config {
    #[serde(default = "default_store")]
    pub store: PathBuf,
    pub site: Site,
    #[serde(default)]
    pub remote: Remote,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(default)]
    pub cases: Vec<BenchmarkCase>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_store() -> PathBuf {
    scalebench::resultstore::DEFAULT_STORE.into()
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut config: Config = toml::from_str(text)?;
        config.base_dir = base_dir.to_path_buf();
        config.site.validate().context("[site]")?;
        check_unique_cases(&config.cases).context("[[cases]]")?;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn find_case(&self, name: &str, family: Option<Family>) -> anyhow::Result<&BenchmarkCase> {
        let matches: Vec<&BenchmarkCase> =
            self.cases.iter().filter(|c| c.case_name == name && family.is_none_or(|f| c.family == f)).collect();
        match matches.as_slice() {
            [one] => Ok(one),
            [] => {
                let known: Vec<&str> = self.cases.iter().map(|c| c.case_name.as_str()).collect();
                bail!("unknown case {name:?} (configured: {})", known.join(", "))
            }
            _ => bail!("case name {name:?} exists in several families; pass --family"),
        }
    }
}

/// Text written by `init`.
pub fn template(site_id: &str) -> String {
    format!(
        r#"# scalebench configuration

# JSON-Lines log that `run` appends to and `push` reads from.
store = "results.jsonl"

[site]
id = "{site_id}"
provider = ""
description = ""
hyperthreading = false
cpu_model = ""
interconnect = ""

# Results service used by `push`. SB_ENDPOINT and SB_TOKEN override these.
[remote]
# endpoint = "http://127.0.0.1:8080"
# token = "change-me"

[defaults]
node_list = [1, 2, 4, 8]
ppn = 1
repetitions = 1
# local, replay or batch-script
runner = "local"
# pbs or slurm, for batch-script
scheduler = "slurm"
# replay reads <fixtures>/<family>/<case>/<nodes>x<ppn>.out
fixtures = "fixtures"
scripts = "jobs"
work_dir = "runs"

[service]
listen = "127.0.0.1:8080"
data = "service-results.jsonl"
tokens = []

# Built-in dense LU solve; needs nothing installed.
[[cases]]
family = "builtin_lu"
case_name = "builtin-lu"
parameters = {{ n = 256, seed = 42 }}

# HPL.dat is generated from n, nb and a near-square process grid
# unless a template named HPL.dat.tmpl is listed.
[[cases]]
family = "hpl"
case_name = "hpl"
parameters = {{ binary = "xhpl", n = 10000, nb = 192 }}

[[cases]]
family = "vasp"
case_name = "VASP-ELB"
# template_paths = ["templates/INCAR.tmpl"]
parameters = {{ binary = "vasp_std" }}

[[cases]]
family = "gromacs"
case_name = "gromacs"
parameters = {{ binary = "gmx_mpi", args = "mdrun -s topol.tpr -deffnm md" }}
"#
    )
}
