//! Run configuration, read from TOML.
//!
//! ```toml
//! method = "act-wese"
//! workers = 4
//! out = "runs/act-wese"
//!
//! [environment]
//! world = "world.json"            # or: generate = { kind = "household", seed = 7, count = 50 }
//!
//! [backends.weak]
//! transcripts = "transcripts/weak"  # or: endpoint = "...", model = "...", or: stub = true
//!
//! [backends.strong]
//! endpoint = "http://localhost:8000/v1/completions"
//! model = "big"
//! api_key = "${STRONG_KEY}"
//!
//! [budgets]
//! n_explore = 50
//! n_exploit = 50
//!
//! [retrieval]
//! mode = "one-hop"
//! cap = 10
//!
//! [pricing]
//! weak_per_1k = 0.0
//! strong_per_1k = 0.02
//! budget_dollars = 25.0
//! ```
//!
//! `${VAR}` anywhere in the file is replaced from the process environment
//! before parsing. Relative paths resolve against the config file's directory.
//! Endpoint roles also honour `WESE_WEAK_*`, `WESE_STRONG_*` and
//! `WESE_EXTRACTOR_*` (`ENDPOINT`, `MODEL`, `API_KEY`) overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::wiki::WikiConfig;
use crate::env::{load_environment, EnvKind, Environment, HouseholdEnv, WikiEnv, WorldConfig};
use crate::kg::RetrievalConfig;
use crate::llm::DEFAULT_STRONG_PRICE_PER_1K;
use crate::orchestrator::{EpisodeOptions, Method, PhaseBudget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub backends: BackendsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<BudgetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalConfig>,
    #[serde(default)]
    pub pricing: PricingConfig,
    #[serde(default)]
    pub episode: EpisodeOptions,
    /// Directory of prompt overrides (`explore.txt`, `exploit.txt`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
    /// Run only these task ids, in this order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<String>>,
    #[serde(default = "one", skip_serializing)]
    pub workers: usize,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: EnvKind,
    pub seed: u64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub household: Option<WorldConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong: Option<BackendSpec>,
    /// Defaults to the explorer's backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<BackendSpec>,
}

/// Exactly one of `stub`, `transcripts` or `endpoint`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stub: bool,
    /// Directory of `<task_id>.jsonl` replay transcripts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
}

/// Where a role's completions come from, after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSource {
    Stub,
    Transcripts(PathBuf),
    Endpoint {
        url: String,
        model: String,
        api_key: Option<String>,
        timeout_secs: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub n_explore: usize,
    pub n_exploit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingConfig {
    #[serde(default)]
    pub weak_per_1k: f64,
    #[serde(default = "strong_price")]
    pub strong_per_1k: f64,
    /// Stop starting new tasks once this much has been spent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_dollars: Option<f64>,
}

fn strong_price() -> f64 {
    DEFAULT_STRONG_PRICE_PER_1K
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            weak_per_1k: 0.0,
            strong_per_1k: strong_price(),
            budget_dollars: None,
        }
    }
}

/// Replaces every `${NAME}` with the environment variable's value.
pub fn interpolate_env(text: &str) -> Result<String, HarnessError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| HarnessError::Config("unterminated ${ in config".into()))?;
        let name = &after[..end];
        let value = std::env::var(name)
            .map_err(|_| HarnessError::Config(format!("environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let text = interpolate_env(text)?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let env = &self.environment;
        if env.world.is_some() == env.generate.is_some() {
            return Err(HarnessError::Config(
                "environment needs exactly one of `world` or `generate`".into(),
            ));
        }
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        if let Some(b) = self.budgets {
            PhaseBudget::new(b.n_explore, b.n_exploit).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let b = &self.backends;
        if self.method.decoupled() && !self.method.strong_explorer() && b.weak.is_none() {
            return Err(HarnessError::Config(format!(
                "method {} needs a weak backend",
                self.method
            )));
        }
        if b.strong.is_none() {
            return Err(HarnessError::Config(format!(
                "method {} needs a strong backend",
                self.method
            )));
        }
        for (role, spec) in [("weak", &b.weak), ("strong", &b.strong), ("extractor", &b.extractor)] {
            if let Some(spec) = spec {
                spec.source(role)?;
            }
        }
        if let Some(p) = &self.pricing.budget_dollars {
            if !(*p > 0.0) {
                return Err(HarnessError::Config("budget_dollars must be positive".into()));
            }
        }
        Ok(())
    }

    /// Explicit budgets, or the environment kind's defaults.
    pub fn budget(&self, kind: EnvKind) -> PhaseBudget {
        match self.budgets {
            Some(b) => PhaseBudget {
                n_explore: b.n_explore,
                n_exploit: b.n_exploit,
            },
            None => match kind {
                EnvKind::Household => PhaseBudget::decision(),
                EnvKind::WikiQa => PhaseBudget::qa(),
            },
        }
    }

    /// Explicit retrieval, or one-hop capped at 10 for QA and uncapped otherwise.
    pub fn retrieval(&self, kind: EnvKind) -> RetrievalConfig {
        self.retrieval.unwrap_or(RetrievalConfig {
            cap: (kind == EnvKind::WikiQa).then_some(10),
            ..RetrievalConfig::default()
        })
    }

    pub fn load_environment(&self) -> Result<Box<dyn Environment>, HarnessError> {
        if let Some(path) = &self.environment.world {
            return load_environment(&self.resolve(path)).map_err(|e| HarnessError::Config(e.to_string()));
        }
        let g = self
            .environment
            .generate
            .as_ref()
            .ok_or_else(|| HarnessError::Config("no environment".into()))?;
        Ok(match g.kind {
            EnvKind::Household => Box::new(HouseholdEnv::generate(
                g.seed,
                g.count,
                &g.household.clone().unwrap_or_default(),
            )),
            EnvKind::WikiQa => Box::new(WikiEnv::generate(g.seed, g.count, &WikiConfig::default())),
        })
    }

    /// The config as echoed into reports: no secrets, no machine-local settings.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

impl BackendSpec {
    pub fn stub() -> Self {
        BackendSpec {
            stub: true,
            ..Default::default()
        }
    }

    pub fn transcripts(dir: impl Into<PathBuf>) -> Self {
        BackendSpec {
            transcripts: Some(dir.into()),
            ..Default::default()
        }
    }

    /// Validates the spec; `role` names it in errors and selects the
    /// `WESE_<ROLE>_*` environment overrides.
    pub fn source(&self, role: &str) -> Result<BackendSource, HarnessError> {
        let prefix = format!("WESE_{}", role.to_uppercase());
        let env_url = std::env::var(format!("{prefix}_ENDPOINT")).ok();
        let url = env_url.or_else(|| self.endpoint.clone());
        let chosen = [self.stub, self.transcripts.is_some(), url.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if chosen != 1 {
            return Err(HarnessError::Config(format!(
                "backend {role}: give exactly one of stub, transcripts or endpoint"
            )));
        }
        if self.stub {
            return Ok(BackendSource::Stub);
        }
        if let Some(dir) = &self.transcripts {
            return Ok(BackendSource::Transcripts(dir.clone()));
        }
        let model = std::env::var(format!("{prefix}_MODEL"))
            .ok()
            .or_else(|| self.model.clone())
            .ok_or_else(|| HarnessError::Config(format!("backend {role}: endpoint needs a model")))?;
        let api_key = std::env::var(format!("{prefix}_API_KEY")).ok().or_else(|| self.api_key.clone());
        Ok(BackendSource::Endpoint {
            url: url.unwrap_or_default(),
            model,
            api_key,
            timeout_secs: self.timeout_secs,
        })
    }
}
