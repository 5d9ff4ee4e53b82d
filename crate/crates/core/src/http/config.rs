use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::fixtures;

/// Server settings. Loaded from a TOML file; the `STUDYFLOW_*`
/// environment variables override the file.
///
/// ```toml
/// address = "127.0.0.1:8080"
/// data_dir = "data"
/// suspension_ttl_seconds = 86400
/// admin_token = "change-me"
/// fixtures = ["example-study", "example"]
/// test_mode = false
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub address: SocketAddr,
    /// Where participant records live. Without one, records are kept in
    /// memory only.
    pub data_dir: Option<PathBuf>,
    pub suspension_ttl_seconds: u64,
    /// Bearer token for `/admin/api`. Without one, the admin API answers 401.
    pub admin_token: Option<String>,
    /// Fixture studies to serve.
    pub fixtures: Vec<String>,
    /// Honour the seed and forced-draw request headers.
    pub test_mode: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: None,
            suspension_ttl_seconds: 24 * 60 * 60,
            admin_token: None,
            fixtures: vec!["example-study".into(), "example".into()],
            test_mode: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {name}: {value:?}")]
    Env { name: &'static str, value: String },
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        config.apply_env(|name| std::env::var(name).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(value) = var("STUDYFLOW_ADDR") {
            self.address = value.parse().map_err(|_| ConfigError::Env {
                name: "STUDYFLOW_ADDR",
                value,
            })?;
        }
        if let Some(value) = var("STUDYFLOW_ADMIN_TOKEN") {
            self.admin_token = Some(value).filter(|v| !v.is_empty());
        }
        if let Some(value) = var("STUDYFLOW_DATA_DIR") {
            self.data_dir = Some(value.into());
        }
        if let Some(value) = var("STUDYFLOW_SUSPENSION_TTL_SECONDS") {
            self.suspension_ttl_seconds = value.parse().map_err(|_| ConfigError::Env {
                name: "STUDYFLOW_SUSPENSION_TTL_SECONDS",
                value,
            })?;
        }
        Ok(())
    }

    pub fn suspension_ttl(&self) -> Duration {
        Duration::from_secs(self.suspension_ttl_seconds)
    }

    pub fn check_fixtures(&self) -> Result<(), ConfigError> {
        match self.fixtures.iter().find(|f| !fixtures::NAMES.contains(&f.as_str())) {
            Some(unknown) => Err(ConfigError::UnknownFixture(unknown.clone())),
            None => Ok(()),
        }
    }
}
