//! TOML run configuration.
//!
//! ```toml
//! [plan]
//! n_per_condition = 1000
//! levels = ["No", "Mild", "Moderate", "Heavy"]
//! master_seed = 2026
//! concurrency_limit = 8
//! corpus = "bundled"          # or a CSV path relative to this file
//!
//! [backend]
//! kind = "synthetic"          # synthetic | scripted | endpoint
//! [backend.synthetic]
//! base_hazard = 0.135
//!
//! [prompts]
//! dir = "prompts"             # optional; bundled templates otherwise
//!
//! [protocol]
//! concession_marker = "[CONCEDE]"
//!
//! [stats]
//! truncate_at = 23
//! t_test = "welch"
//! ```
//!
//! Secrets never appear here: the endpoint token is read from the
//! environment variable named by `backend.endpoint.token_env`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{EndpointConfig, PromptTemplate, SyntheticAgentParams};
use crate::debate::{ConvergenceProtocol, ToxicityLevel};
use crate::montecarlo::{BackendSpec, ExperimentPlan, ScriptedSpec};
use crate::stats::{ReportOptions, TTestKind, DEFAULT_TRUNCATE_AT};
use crate::topics;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub n_per_condition: u64,
    pub levels: Vec<ToxicityLevel>,
    pub master_seed: u64,
    pub concurrency_limit: usize,
    pub round_cap: u32,
    pub min_rounds: u32,
    pub model_tag: Option<String>,
    /// `"bundled"` or a path to a `id,domain,proposition` CSV file.
    pub corpus: String,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            n_per_condition: 1000,
            levels: ToxicityLevel::ALL.to_vec(),
            master_seed: 2026,
            concurrency_limit: 8,
            round_cap: 60,
            min_rounds: 2,
            model_tag: None,
            corpus: "bundled".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: String,
    pub synthetic: SyntheticAgentParams,
    pub scripted: ScriptedSpec,
    pub endpoint: EndpointConfig,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: "synthetic".into(),
            synthetic: SyntheticAgentParams::default(),
            scripted: ScriptedSpec::default(),
            endpoint: EndpointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub truncate_at: u32,
    pub t_test: TTestKind,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            truncate_at: DEFAULT_TRUNCATE_AT,
            t_test: TTestKind::Welch,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub plan: PlanSection,
    pub backend: BackendSection,
    pub prompts: PromptsSection,
    pub protocol: Option<ConvergenceProtocol>,
    pub stats: StatsSection,
}

/// Command-line values that shadow the file. They change the plan and
/// therefore its fingerprint (except concurrency).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub concurrency: Option<usize>,
    pub backend: Option<String>,
    pub levels: Option<Vec<ToxicityLevel>>,
    pub truncate_at: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub plan: ExperimentPlan,
    pub report: ReportOptions,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Applies overrides and loads the corpus and templates. Relative paths
    /// are taken from `base_dir`, normally the config file's directory.
    pub fn resolve(mut self, overrides: &Overrides, base_dir: &Path) -> Result<Resolved, ConfigError> {
        if let Some(seed) = overrides.seed {
            self.plan.master_seed = seed;
        }
        if let Some(n) = overrides.n {
            self.plan.n_per_condition = n;
        }
        if let Some(c) = overrides.concurrency {
            self.plan.concurrency_limit = c;
        }
        if let Some(levels) = &overrides.levels {
            self.plan.levels = levels.clone();
        }
        if let Some(kind) = &overrides.backend {
            self.backend.kind = kind.clone();
        }
        if let Some(t) = overrides.truncate_at {
            self.stats.truncate_at = t;
        }
        if self.stats.truncate_at == 0 {
            return Err(ConfigError::Invalid("truncate_at must be at least 1".into()));
        }

        let backend = match self.backend.kind.to_ascii_lowercase().as_str() {
            "synthetic" => BackendSpec::Synthetic(self.backend.synthetic),
            "scripted" => BackendSpec::Scripted(self.backend.scripted),
            "endpoint" => BackendSpec::Endpoint(self.backend.endpoint),
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown backend `{other}` (expected synthetic, scripted or endpoint)"
                )))
            }
        };
        let model_tag = self.plan.model_tag.clone().unwrap_or_else(|| match &backend {
            BackendSpec::Endpoint(e) => e.model.clone(),
            other => other.name().to_string(),
        });

        let corpus = if self.plan.corpus == "bundled" {
            topics::bundled()
        } else {
            let path = base_dir.join(&self.plan.corpus);
            topics::load(&path).map_err(|e| ConfigError::Invalid(format!("corpus {}: {e}", path.display())))?
        };
        let prompts = match &self.prompts.dir {
            Some(dir) => {
                let dir = base_dir.join(dir);
                PromptTemplate::load_dir(&dir)
                    .map_err(|e| ConfigError::Invalid(format!("prompts {}: {e}", dir.display())))?
            }
            None => PromptTemplate::default(),
        };

        let plan = ExperimentPlan {
            n_per_condition: self.plan.n_per_condition,
            levels: self.plan.levels,
            corpus,
            master_seed: self.plan.master_seed,
            concurrency_limit: self.plan.concurrency_limit,
            backend,
            round_cap: self.plan.round_cap,
            min_rounds: self.plan.min_rounds,
            model_tag,
            protocol: self.protocol.unwrap_or_default(),
            prompts,
        };
        plan.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Resolved {
            plan,
            report: ReportOptions {
                truncate_at: self.stats.truncate_at,
                t_test: self.stats.t_test,
            },
        })
    }
}

/// Loads `path` (or the defaults when `None`) and resolves it.
pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Resolved, ConfigError> {
    match path {
        Some(path) => {
            let base = path.parent().unwrap_or(Path::new("."));
            ConfigFile::load(path)?.resolve(overrides, base)
        }
        None => ConfigFile::default().resolve(overrides, Path::new(".")),
    }
}
