//! Taxonomy type and its line-oriented file format.
//!
//! One entry per line, LF or CRLF; surrounding whitespace is trimmed;
//! blank lines and lines starting with `#` are skipped; a leading BOM is
//! ignored.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::TaxonomyId;
use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub id: TaxonomyId,
    pub name: String,
    pub entries: Vec<String>,
}

pub(crate) fn strip_bom(raw: &[u8]) -> &[u8] {
    raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw)
}

pub fn parse_taxonomy_file(content: &str) -> Vec<String> {
    content
        .strip_prefix('\u{FEFF}')
        .unwrap_or(content)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Decodes and parses an uploaded taxonomy file.
pub fn parse_taxonomy_bytes(raw: &[u8]) -> Result<Vec<String>> {
    let content = std::str::from_utf8(raw)
        .map_err(|e| Error::InvalidTaxonomy(format!("not UTF-8 at byte {}", e.valid_up_to())))?;
    Ok(parse_taxonomy_file(content))
}

/// Entries must be non-empty, distinct, and each a single token.
pub fn validate_entries(name: &str, entries: &[String]) -> Result<()> {
    if name.trim().is_empty() {
        return Err(Error::InvalidTaxonomy("name must not be empty".into()));
    }
    if entries.is_empty() {
        return Err(Error::InvalidTaxonomy("no entries".into()));
    }
    let mut seen = HashSet::new();
    for entry in entries {
        let n = tokenize(entry).len();
        if n != 1 {
            return Err(Error::InvalidTaxonomy(format!(
                "entry {entry:?} is {n} tokens, expected exactly one"
            )));
        }
        if !seen.insert(entry.as_str()) {
            return Err(Error::InvalidTaxonomy(format!("duplicate entry {entry:?}")));
        }
    }
    Ok(())
}
