use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use unified_ie::harness::HttpConfig;
use unified_ie::model::{TextTask, WordTask};
use unified_ie::{IwRegistry, TaskSpec};

use crate::Usage;

/// Contents of the file passed with `--config`.
///
/// ```toml
/// iw_profile = "data/ja.profile"
/// cache_dir = ".uie-cache"
/// seed = 7
///
/// [profiles.tcree]
/// text_task = { kind = "TC", labels = ["sports", "movies", "women", "IT", "CM"] }
/// word_task = "RE"
/// max_units = 1
///
/// [backend]
/// kind = "http"
///
/// [backend.http]
/// base_url = "https://api.example.com/v1"
/// model = "my-finetuned-model"
/// auth_env_var = "UIE_API_KEY"
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub iw_profile: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub profiles: BTreeMap<String, Profile>,
    #[serde(default)]
    pub backend: BackendSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub text_task: TextTask,
    pub word_task: WordTask,
    #[serde(default)]
    pub instruction_word: Option<String>,
    #[serde(default)]
    pub max_units: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<HttpConfig>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", path.display())).into())
    }

    pub fn registry(&self, flag: Option<&Path>) -> Result<IwRegistry> {
        match flag.or(self.iw_profile.as_deref()) {
            Some(p) => IwRegistry::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(IwRegistry::english()),
        }
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn cache_dir(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.cache_dir.clone())
    }
}

/// Flags that pick or build a task spec.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct SpecArgs {
    /// Task profile name from the config file.
    #[arg(long)]
    pub profile: Option<String>,
    /// Word-level task key (NER, RE, EE, SENT_RW, SENT_N, SENT_ADJ, SENT_N_ADJ).
    #[arg(long)]
    pub task: Option<String>,
    /// Comma-separated text-level label set.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Treat the label set as sentiment classes instead of topics.
    #[arg(long)]
    pub sentiment: bool,
    /// Override the instruction word.
    #[arg(long)]
    pub iw: Option<String>,
    /// Instruction-word profile file (overrides the config).
    #[arg(long)]
    pub iw_profile: Option<PathBuf>,
}

impl SpecArgs {
    pub fn given(&self) -> bool {
        self.profile.is_some() || self.task.is_some() || !self.labels.is_empty()
    }

    /// Resolves flags over a profile over `fallback` (usually a dataset header).
    pub fn resolve(&self, config: &Config, fallback: Option<&TaskSpec>) -> Result<TaskSpec> {
        let registry = config.registry(self.iw_profile.as_deref())?;
        let profile = match &self.profile {
            Some(name) => Some(
                config
                    .profiles
                    .get(name)
                    .ok_or_else(|| Usage(format!("no profile named {name:?} in the config")))?,
            ),
            None => None,
        };
        let task = match &self.task {
            Some(key) => Some(
                WordTask::from_key(key).ok_or_else(|| Usage(format!("unknown task {key:?}")))?,
            ),
            None => None,
        };
        let text = if !self.labels.is_empty() {
            Some(if self.sentiment {
                TextTask::Sc(self.labels.clone())
            } else {
                TextTask::Tc(self.labels.clone())
            })
        } else {
            None
        };
        let base = match (profile, fallback) {
            (Some(p), _) => {
                let mut spec = TaskSpec::with_registry(p.text_task.clone(), p.word_task, &registry);
                if let Some(iw) = &p.instruction_word {
                    spec = spec.with_instruction_word(iw);
                }
                spec.max_units = p.max_units;
                Some(spec)
            }
            (None, Some(spec)) => Some(spec.clone()),
            (None, None) => None,
        };
        let mut spec = match (base, task, text) {
            (Some(mut spec), task, text) => {
                if let Some(t) = task {
                    spec.word_task = t;
                    spec.instruction_word = registry.get(t);
                }
                if let Some(text) = text {
                    spec.text_task = text;
                }
                spec
            }
            (None, Some(t), Some(text)) => TaskSpec::with_registry(text, t, &registry),
            (None, Some(t), None) if t.is_sentiment() || self.sentiment => {
                TaskSpec::with_registry(TextTask::default_polarity(), t, &registry)
            }
            _ => return Err(Usage(
                "no task spec: pass --profile, or --task with --labels, or a dataset with a header"
                    .into(),
            )
            .into()),
        };
        if let Some(iw) = &self.iw {
            spec = spec.with_instruction_word(iw);
        }
        let violations = spec.violations();
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Usage(format!("invalid task spec: {}", list.join("; "))).into());
        }
        Ok(spec)
    }
}
