//! Run configuration: a TOML file with strict keys. Relative paths resolve
//! against the directory holding the file.
//!
//! ```toml
//! [paths]
//! ontology = "ontology.jsonl"        # required
//! corpus = "corpus.jsonl"
//! embeddings = "embeddings.jsonl"
//! gold = "gold.jsonl"
//! output_dir = "out"                 # default "out"
//!
//! [run]
//! parallelism = 4                    # default 1
//!
//! [[backends]]
//! name = "a1"
//! kind = "scripted"
//! script = "scripts/a1.jsonl"
//!
//! [[backends]]
//! name = "judge"
//! kind = "http"
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "some-model"
//! api_key_env = "JUDGE_API_KEY"
//! max_concurrent_requests = 8
//!
//! [annotation]
//! annotators = ["a1", "a2", "a3"]
//! adjudicator = "judge"
//!
//! [extraction]
//! ed_backend = "a1"
//! eae_backend = "a1"
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotationConfig, AnnotationSettings, ThresholdMode, DEFAULT_MAX_ROUNDS};
use crate::extract::{ExtractConfig, ExtractSettings};
use crate::gateway::{
    load_script, DecodingParams, GatewayError, HttpBackend, HttpSettings, LlmClient, DEFAULT_MAX_PARSE_ATTEMPTS,
};
use crate::partition::{Strategy, DEFAULT_PARTITIONS};
use crate::recall::DEFAULT_TOP_K;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("backend {name}: {source}")]
    Backend { name: String, source: GatewayError },
}

fn invalid<T>(m: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(m.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub ontology: PathBuf,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub gold: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Paths {
    pub fn new(ontology: impl Into<PathBuf>) -> Self {
        Paths {
            ontology: ontology.into(),
            corpus: None,
            embeddings: None,
            gold: None,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_requests: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_transport_retries")]
    pub transport_retries: u32,
}

fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}
fn default_transport_retries() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { parallelism: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationSection {
    pub annotators: Vec<String>,
    pub adjudicator: Option<String>,
    pub max_filter_rounds: u32,
    pub max_refinement_rounds: u32,
    pub vote_threshold_mode: ThresholdMode,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_parse_attempts: u32,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        let d = DecodingParams::annotation();
        AnnotationSection {
            annotators: Vec::new(),
            adjudicator: None,
            max_filter_rounds: DEFAULT_MAX_ROUNDS,
            max_refinement_rounds: DEFAULT_MAX_ROUNDS,
            vote_threshold_mode: ThresholdMode::StrictMajority,
            temperature: d.temperature,
            max_output_tokens: d.max_output_tokens,
            max_parse_attempts: DEFAULT_MAX_PARSE_ATTEMPTS,
        }
    }
}

impl AnnotationSection {
    pub fn settings(&self) -> AnnotationSettings {
        AnnotationSettings {
            max_filter_rounds: self.max_filter_rounds,
            max_refinement_rounds: self.max_refinement_rounds,
            vote_threshold_mode: self.vote_threshold_mode,
            decoding: DecodingParams {
                temperature: self.temperature,
                max_output_tokens: self.max_output_tokens,
                greedy: false,
            },
            max_parse_attempts: self.max_parse_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionSection {
    pub ed_backend: Option<String>,
    pub eae_backend: Option<String>,
    pub top_k: usize,
    pub partitions: usize,
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub temperature: f64,
    pub greedy: bool,
    pub max_output_tokens: u32,
    pub max_parse_attempts: u32,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        let d = DecodingParams::extraction();
        ExtractionSection {
            ed_backend: None,
            eae_backend: None,
            top_k: DEFAULT_TOP_K,
            partitions: DEFAULT_PARTITIONS,
            strategy: Strategy::Level,
            seed: None,
            temperature: d.temperature,
            greedy: d.greedy,
            max_output_tokens: d.max_output_tokens,
            max_parse_attempts: DEFAULT_MAX_PARSE_ATTEMPTS,
        }
    }
}

impl ExtractionSection {
    pub fn settings(&self) -> ExtractSettings {
        ExtractSettings {
            top_k: self.top_k,
            partitions: self.partitions,
            strategy: self.strategy,
            seed: self.seed,
            decoding: DecodingParams {
                temperature: self.temperature,
                max_output_tokens: self.max_output_tokens,
                greedy: self.greedy,
            },
            max_parse_attempts: self.max_parse_attempts,
        }
    }
}

/// A parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub paths: Paths,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    #[serde(default)]
    pub annotation: AnnotationSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl AppConfig {
    /// Defaults everywhere except the ontology path.
    pub fn with_paths(paths: Paths) -> Self {
        AppConfig {
            paths,
            run: RunSection::default(),
            backends: Vec::new(),
            annotation: AnnotationSection::default(),
            extraction: ExtractionSection::default(),
        }
    }

    /// Parses TOML text, resolving relative paths against `base`. Does not
    /// validate.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut cfg: AppConfig = toml::from_str(text).map_err(|e| e.message().to_string())?;
        let p = &mut cfg.paths;
        resolve(base, &mut p.ontology);
        resolve(base, &mut p.output_dir);
        for opt in [&mut p.corpus, &mut p.embeddings, &mut p.gold] {
            if let Some(path) = opt.as_mut() {
                resolve(base, path);
            }
        }
        for b in &mut cfg.backends {
            if let Some(s) = b.script.as_mut() {
                resolve(base, s);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.parallelism == 0 {
            return invalid("run.parallelism must be at least 1");
        }
        let exists = |what: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { what, path: p.to_path_buf() })
            }
        };
        exists("paths.ontology", &self.paths.ontology)?;
        for (what, p) in [
            ("paths.corpus", &self.paths.corpus),
            ("paths.embeddings", &self.paths.embeddings),
            ("paths.gold", &self.paths.gold),
        ] {
            if let Some(p) = p {
                exists(what, p)?;
            }
        }
        let mut names = HashSet::new();
        for b in &self.backends {
            if !names.insert(b.name.as_str()) {
                return invalid(format!("backend name {:?} is used twice", b.name));
            }
            if b.max_concurrent_requests == 0 {
                return invalid(format!("backend {}: max_concurrent_requests must be at least 1", b.name));
            }
            match b.kind {
                BackendKind::Scripted => match &b.script {
                    Some(s) => exists("backend script", s)?,
                    None => return invalid(format!("backend {}: scripted backends need `script`", b.name)),
                },
                BackendKind::Http => {
                    if b.endpoint.is_none() || b.model.is_none() {
                        return invalid(format!("backend {}: http backends need `endpoint` and `model`", b.name));
                    }
                }
            }
        }
        let known = |role: &str, n: &str| {
            if names.contains(n) {
                Ok(())
            } else {
                invalid(format!("{role} refers to unknown backend {n:?}"))
            }
        };
        for a in &self.annotation.annotators {
            known("annotation.annotators", a)?;
        }
        for (role, n) in [
            ("annotation.adjudicator", &self.annotation.adjudicator),
            ("extraction.ed_backend", &self.extraction.ed_backend),
            ("extraction.eae_backend", &self.extraction.eae_backend),
        ] {
            if let Some(n) = n {
                known(role, n)?;
            }
        }
        let a = &self.annotation;
        if a.max_filter_rounds == 0 || a.max_refinement_rounds == 0 || a.max_parse_attempts == 0 {
            return invalid("annotation round caps and max_parse_attempts must be at least 1");
        }
        a.settings().decoding.validate().map_err(|e| ConfigError::Invalid(format!("annotation: {e}")))?;
        self.extraction.settings().validate().map_err(|e| ConfigError::Invalid(format!("extraction: {e}")))?;
        Ok(())
    }

    /// Builds one client per backend. Clients built from the same spec share
    /// a concurrency cap.
    pub fn clients(&self) -> Result<HashMap<String, LlmClient>, ConfigError> {
        self.backends.iter().map(|b| build_client(b).map(|c| (b.name.clone(), c))).collect()
    }

    fn pick(
        clients: &HashMap<String, LlmClient>,
        field: &str,
        name: Option<&String>,
    ) -> Result<LlmClient, ConfigError> {
        let name = name.ok_or_else(|| ConfigError::Invalid(format!("{field} is not set")))?;
        clients
            .get(name)
            .cloned()
            .ok_or_else(|| ConfigError::Invalid(format!("{field} refers to unknown backend {name:?}")))
    }

    pub fn annotation_config(&self, clients: &HashMap<String, LlmClient>) -> Result<AnnotationConfig, ConfigError> {
        let a = &self.annotation;
        if a.annotators.is_empty() {
            return invalid("annotation.annotators is empty");
        }
        let annotators = a
            .annotators
            .iter()
            .map(|n| Self::pick(clients, "annotation.annotators", Some(n)))
            .collect::<Result<Vec<_>, _>>()?;
        let adjudicator = Self::pick(clients, "annotation.adjudicator", a.adjudicator.as_ref())?;
        let cfg = AnnotationConfig { annotators, adjudicator, settings: a.settings() };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn extract_config(&self, clients: &HashMap<String, LlmClient>) -> Result<ExtractConfig, ConfigError> {
        let e = &self.extraction;
        Ok(ExtractConfig {
            ed_backend: Self::pick(clients, "extraction.ed_backend", e.ed_backend.as_ref())?,
            eae_backend: Self::pick(
                clients,
                "extraction.eae_backend",
                e.eae_backend.as_ref().or(e.ed_backend.as_ref()),
            )?,
            settings: e.settings(),
        })
    }
}

fn build_client(b: &BackendSpec) -> Result<LlmClient, ConfigError> {
    let wrap = |source| ConfigError::Backend { name: b.name.clone(), source };
    match b.kind {
        BackendKind::Scripted => {
            let path =
                b.script.as_ref().ok_or_else(|| ConfigError::Invalid(format!("backend {}: no script", b.name)))?;
            let file = File::open(path).map_err(|e| wrap(GatewayError::Io(e)))?;
            let store = load_script(BufReader::new(file)).map_err(wrap)?;
            Ok(LlmClient::new(
                &b.name,
                Arc::new(crate::gateway::ScriptedBackend::new(store)),
                b.max_concurrent_requests,
            ))
        }
        BackendKind::Http => {
            let mut s = HttpSettings::new(b.endpoint.clone().unwrap_or_default(), b.model.clone().unwrap_or_default());
            if let Some(var) = &b.api_key_env {
                s.api_key = Some(
                    std::env::var(var)
                        .map_err(|_| wrap(GatewayError::Config(format!("environment variable {var} is not set"))))?,
                );
            }
            s.timeout = Duration::from_secs(b.timeout_secs);
            s.transport_retries = b.transport_retries;
            Ok(LlmClient::new(&b.name, Arc::new(HttpBackend::new(s).map_err(wrap)?), b.max_concurrent_requests))
        }
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<AppConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg =
        AppConfig::parse(&text, base).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })?;
    cfg.validate()?;
    Ok(cfg)
}
