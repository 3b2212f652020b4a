//! Service configuration: one TOML file, then environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use arac_core::{NormalizationConfig, PlatformConfig};
use serde::Deserialize;

use crate::ServerError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: SocketAddr,
    /// Journal file. Created with its parent directories when missing.
    pub storage: PathBuf,
    pub session_ttl_secs: u64,
    pub normalization: NormalizationConfig,
    /// Admin account created at startup when no active admin exists.
    pub bootstrap: Option<BootstrapAdmin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapAdmin {
    pub login: String,
    pub password: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            storage: PathBuf::from("arac-data/journal.jsonl"),
            session_ttl_secs: 8 * 3600,
            normalization: NormalizationConfig::default(),
            bootstrap: None,
        }
    }
}

pub const ENV_BIND: &str = "ARAC_BIND";
pub const ENV_STORAGE: &str = "ARAC_STORAGE";
pub const ENV_SESSION_TTL: &str = "ARAC_SESSION_TTL";
pub const ENV_STRIP_DIACRITICS: &str = "ARAC_STRIP_DIACRITICS";
pub const ENV_STRIP_TATWEEL: &str = "ARAC_STRIP_TATWEEL";
pub const ENV_ADMIN_LOGIN: &str = "ARAC_ADMIN_LOGIN";
pub const ENV_ADMIN_PASSWORD: &str = "ARAC_ADMIN_PASSWORD";

impl Config {
    /// Reads the optional file, then applies `ARAC_*` variables from the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServerError> {
        Self::load_with(path, |k| std::env::var(k).ok())
    }

    pub fn load_with(
        path: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ServerError> {
        let mut config = match path {
            Some(path) => {
                let raw = std::fs::read_to_string(path)
                    .map_err(|e| ServerError::ConfigInvalid(format!("{}: {e}", path.display())))?;
                Self::from_toml(&raw)?
            }
            None => Self::default(),
        };
        config.apply_env(env)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(raw: &str) -> Result<Self, ServerError> {
        toml::from_str(raw).map_err(|e| ServerError::ConfigInvalid(e.to_string()))
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ServerError> {
        fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ServerError> {
            raw.trim()
                .parse()
                .map_err(|_| ServerError::ConfigInvalid(format!("{key}: cannot parse {raw:?}")))
        }
        if let Some(v) = env(ENV_BIND) {
            self.bind = parse(ENV_BIND, &v)?;
        }
        if let Some(v) = env(ENV_STORAGE) {
            self.storage = PathBuf::from(v);
        }
        if let Some(v) = env(ENV_SESSION_TTL) {
            self.session_ttl_secs = parse(ENV_SESSION_TTL, &v)?;
        }
        if let Some(v) = env(ENV_STRIP_DIACRITICS) {
            self.normalization.strip_diacritics = parse(ENV_STRIP_DIACRITICS, &v)?;
        }
        if let Some(v) = env(ENV_STRIP_TATWEEL) {
            self.normalization.strip_tatweel = parse(ENV_STRIP_TATWEEL, &v)?;
        }
        match (env(ENV_ADMIN_LOGIN), env(ENV_ADMIN_PASSWORD)) {
            (Some(login), Some(password)) => {
                self.bootstrap = Some(BootstrapAdmin { login, password })
            }
            (None, None) => {}
            _ => {
                return Err(ServerError::ConfigInvalid(format!(
                    "{ENV_ADMIN_LOGIN} and {ENV_ADMIN_PASSWORD} must be set together"
                )))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ServerError> {
        if self.session_ttl_secs == 0 {
            return Err(ServerError::ConfigInvalid(
                "session_ttl_secs must be positive".into(),
            ));
        }
        if !self.normalization.nfc_compare {
            return Err(ServerError::ConfigInvalid(
                "normalization.nfc_compare cannot be disabled".into(),
            ));
        }
        if self.storage.as_os_str().is_empty() {
            return Err(ServerError::ConfigInvalid("storage path is empty".into()));
        }
        Ok(())
    }

    pub fn platform(&self) -> PlatformConfig {
        PlatformConfig {
            normalization: self.normalization,
            session_ttl: Duration::from_secs(self.session_ttl_secs),
        }
    }
}
