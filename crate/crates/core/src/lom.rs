//! Learning Object Metadata subset attached to every text.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    VeryEasy,
    Easy,
    Medium,
    Difficult,
    VeryDifficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    School,
    HigherEducation,
    Training,
    Other,
}

fn default_language() -> String {
    "ar".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct General {
    #[serde(default)]
    pub title: String,
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl Default for General {
    fn default() -> Self {
        Self {
            title: String::new(),
            language: default_language(),
            description: String::new(),
            keywords: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Educational {
    pub difficulty: Difficulty,
    pub context: Context,
    #[serde(default)]
    pub learning_resource_type: String,
}

impl Default for Educational {
    fn default() -> Self {
        Self {
            difficulty: Difficulty::Medium,
            context: Context::School,
            learning_resource_type: "narrative text".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifecycle {
    #[serde(default)]
    pub author: String,
    pub date: DateTime<Utc>,
}

impl Default for Lifecycle {
    fn default() -> Self {
        Self {
            author: String::new(),
            date: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LomRecord {
    #[serde(default)]
    pub general: General,
    #[serde(default)]
    pub educational: Educational,
    #[serde(default)]
    pub lifecycle: Lifecycle,
}

impl LomRecord {
    /// Checks the fields the type system cannot: the language code.
    /// Enumerated fields are already constrained by deserialization.
    pub fn validate(&self) -> Result<()> {
        let lang = &self.general.language;
        if lang.len() != 2 || !lang.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(Error::InvalidMetadata(format!(
                "language must be a two-letter lowercase code, got {lang:?}"
            )));
        }
        Ok(())
    }

    /// Parses a JSON record, mapping shape errors to `InvalidMetadata`.
    pub fn from_json(raw: &str) -> Result<Self> {
        let lom: LomRecord =
            serde_json::from_str(raw).map_err(|e| Error::InvalidMetadata(e.to_string()))?;
        lom.validate()?;
        Ok(lom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_record_is_valid_arabic() {
        let lom = LomRecord::default();
        assert_eq!(lom.general.language, "ar");
        lom.validate().unwrap();
    }

    #[test]
    fn rejects_long_language_name() {
        let mut lom = LomRecord::default();
        lom.general.language = "arabic".into();
        assert!(matches!(lom.validate(), Err(Error::InvalidMetadata(_))));
        lom.general.language = "AR".into();
        assert!(lom.validate().is_err());
    }

    #[test]
    fn rejects_unknown_enum_values() {
        let raw = r#"{"educational":{"difficulty":"impossible","context":"school"},
                      "lifecycle":{"date":"2024-01-01T00:00:00Z"}}"#;
        assert!(matches!(
            LomRecord::from_json(raw),
            Err(Error::InvalidMetadata(_))
        ));

        let raw = r#"{"educational":{"difficulty":"medium","context":"higher_education"},
                      "lifecycle":{"author":"ابن خلدون","date":"2024-01-01T00:00:00Z"}}"#;
        let lom = LomRecord::from_json(raw).unwrap();
        assert_eq!(lom.educational.context, Context::HigherEducation);
        assert_eq!(lom.general.language, "ar");
    }
}
