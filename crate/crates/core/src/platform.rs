use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::accounts::SessionTable;
use crate::error::Result;
use crate::ids::{AssignmentId, TextId};
use crate::locks::KeyedLocks;
use crate::normalize::NormalizationConfig;
use crate::store::{Store, Tables};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformConfig {
    pub normalization: NormalizationConfig,
    #[serde(with = "humantime_secs")]
    pub session_ttl: Duration,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            normalization: NormalizationConfig::default(),
            session_ttl: Duration::from_secs(8 * 3600),
        }
    }
}

mod humantime_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_secs)
    }
}

/// The platform: storage plus the locking and session state every
/// operation needs. Operations are implemented in the corpus, activity
/// and accounts modules as `impl Platform` blocks.
pub struct Platform {
    pub(crate) store: Store,
    pub(crate) config: PlatformConfig,
    pub(crate) sessions: SessionTable,
    pub(crate) text_locks: KeyedLocks<TextId>,
    pub(crate) assignment_locks: KeyedLocks<AssignmentId>,
    pub(crate) account_lock: parking_lot::Mutex<()>,
}

impl Platform {
    pub fn new(store: Store, config: PlatformConfig) -> Self {
        Self {
            store,
            config,
            sessions: SessionTable::default(),
            text_locks: KeyedLocks::new(),
            assignment_locks: KeyedLocks::new(),
            account_lock: parking_lot::Mutex::new(()),
        }
    }

    pub fn in_memory(config: PlatformConfig) -> Self {
        Self::new(Store::in_memory(), config)
    }

    pub fn open(path: impl AsRef<Path>, config: PlatformConfig) -> Result<Self> {
        Ok(Self::new(Store::open(path)?, config))
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn normalization(&self) -> &NormalizationConfig {
        &self.config.normalization
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn snapshot(&self) -> Arc<Tables> {
        self.store.snapshot()
    }
}
