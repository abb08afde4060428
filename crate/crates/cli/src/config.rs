//! TOML service configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};
use std::time::Duration;

use codesign_core::agent::{DecisionNetwork, HttpBackend, HttpConfig, LmBackend, MockBackend};
use codesign_core::knowledge::KnowledgeError;
use codesign_core::KnowledgeIndex;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub addr: Option<String>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<PathBuf>,
    /// Markdown directory or saved index JSON. The bundled notes when unset.
    pub corpus: Option<PathBuf>,
    /// Decision network XML. The bundled network when unset.
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub server: ServerConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn backend(&self) -> Box<dyn LmBackend> {
        match self.backend.kind {
            BackendKind::Mock => Box::new(MockBackend::new()),
            BackendKind::Http => {
                let mut http = HttpConfig::from_env();
                if let Some(url) = &self.backend.base_url {
                    http.base_url = url.clone();
                }
                if let Some(model) = &self.backend.model {
                    http.model = model.clone();
                }
                if let Some(secs) = self.backend.timeout_secs {
                    http.timeout = Duration::from_secs(secs);
                }
                Box::new(HttpBackend::new(http))
            }
        }
    }

    pub fn knowledge(&self) -> Result<KnowledgeIndex, CliError> {
        let Some(path) = &self.corpus else {
            return Ok(KnowledgeIndex::bundled());
        };
        let result = if path.is_file() {
            KnowledgeIndex::load(path)
        } else {
            KnowledgeIndex::build(path)
        };
        result.map_err(|e: KnowledgeError| CliError::Usage(format!("knowledge corpus: {e}")))
    }

    pub fn network(&self) -> Result<DecisionNetwork, CliError> {
        match &self.network {
            None => Ok(DecisionNetwork::bundled()),
            Some(path) => DecisionNetwork::load(path).map_err(|e| CliError::Usage(e.to_string())),
        }
    }
}
