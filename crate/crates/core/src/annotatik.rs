//! Taxonomy-driven automatic annotation.
//!
//! Every taxonomy entry is compared with every token of a text; each
//! equal (entry, token) pair yields one match. Matches are produced in
//! entry order, then token order, exactly once per pair.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normalize::NormalizationConfig;
use crate::taxonomy::{parse_taxonomy_file, strip_bom};
use crate::tokenize::{tokenize, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TaxonomyMatch {
    pub entry_index: usize,
    pub token_index: usize,
}

/// Finds every `(entry, token)` pair that compares equal under `norm`.
///
/// Tokens are normalized once and bucketed, so the cost is linear in
/// `tokens + entries + matches` rather than their product.
pub fn find_matches(
    tokens: &TokenSequence,
    entries: &[String],
    norm: &NormalizationConfig,
) -> Vec<TaxonomyMatch> {
    let mut positions: HashMap<String, Vec<usize>> = HashMap::new();
    for token in tokens.iter() {
        positions
            .entry(norm.normalize(&token.surface))
            .or_default()
            .push(token.index);
    }

    let mut matches = Vec::new();
    for (entry_index, entry) in entries.iter().enumerate() {
        if let Some(hits) = positions.get(&norm.normalize(entry)) {
            matches.extend(hits.iter().map(|&token_index| TaxonomyMatch {
                entry_index,
                token_index,
            }));
        }
    }
    matches
}

/// One line of `arac annotate` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OfflineAnnotation {
    pub token_index: usize,
    pub surface: String,
    pub span: [usize; 2],
    pub entry_index: usize,
    pub entry: String,
}

/// Runs the matcher over a text file and a taxonomy file without any store.
///
/// The text file is held under an exclusive advisory lock while it is read
/// and matched, so concurrent writers that honour the lock cannot change it
/// mid-run.
pub fn annotate_files(
    text_path: &Path,
    taxonomy_path: &Path,
    norm: &NormalizationConfig,
) -> Result<Vec<OfflineAnnotation>> {
    let mut text_file = File::open(text_path)?;
    text_file.lock()?;

    let mut raw = Vec::new();
    text_file.read_to_end(&mut raw)?;
    let body =
        std::str::from_utf8(strip_bom(&raw)).map_err(|e| Error::Encoding(e.valid_up_to()))?;

    let taxonomy_raw = std::fs::read(taxonomy_path)?;
    let taxonomy = std::str::from_utf8(&taxonomy_raw)
        .map_err(|e| Error::InvalidTaxonomy(format!("not UTF-8: {e}")))?;
    let entries = parse_taxonomy_file(taxonomy);

    let tokens = tokenize(body);
    let out = find_matches(&tokens, &entries, norm)
        .into_iter()
        .map(|m| {
            let token = &tokens.items[m.token_index];
            OfflineAnnotation {
                token_index: m.token_index,
                surface: token.surface.clone(),
                span: token.span,
                entry_index: m.entry_index,
                entry: entries[m.entry_index].clone(),
            }
        })
        .collect();

    text_file.unlock()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn coordination_fixture() {
        let tokens = tokenize("ذهب محمد ثم عاد");
        let m = find_matches(
            &tokens,
            &entries(&["و", "ف", "ثم", "أو"]),
            &NormalizationConfig::default(),
        );
        assert_eq!(
            m,
            [TaxonomyMatch {
                entry_index: 2,
                token_index: 2
            }]
        );
    }

    #[test]
    fn interrogative_fixture_is_empty() {
        let tokens = tokenize("ذهب محمد ثم عاد");
        let m = find_matches(
            &tokens,
            &entries(&["هل", "ماذا", "لماذا"]),
            &NormalizationConfig::default(),
        );
        assert!(m.is_empty());
    }

    #[test]
    fn repeated_tokens_each_match_once() {
        let tokens = tokenize("هل جاء؟ هل ذهب؟");
        let m = find_matches(
            &tokens,
            &entries(&["؟", "هل"]),
            &NormalizationConfig::default(),
        );
        let pairs: Vec<_> = m.iter().map(|m| (m.entry_index, m.token_index)).collect();
        assert_eq!(pairs, [(0, 2), (0, 5), (1, 0), (1, 3)]);
    }

    #[test]
    fn relaxed_matching_is_opt_in() {
        let tokens = tokenize("ذهب ثُمَّ عاد");
        let e = entries(&["ثم"]);
        assert!(find_matches(&tokens, &e, &NormalizationConfig::default()).is_empty());
        assert_eq!(
            find_matches(&tokens, &e, &NormalizationConfig::relaxed()).len(),
            1
        );
    }

    #[test]
    fn offline_run_over_files() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("t.txt");
        let tax = dir.path().join("coord.txt");
        std::fs::write(&text, "\u{FEFF}ذهب محمد ثم عاد و نام").unwrap();
        std::fs::write(&tax, "# coordination\r\nو\r\n\r\nف\nثم\n  أو  \n").unwrap();
        let out = annotate_files(&text, &tax, &NormalizationConfig::default()).unwrap();
        let pairs: Vec<_> = out
            .iter()
            .map(|a| (a.entry.as_str(), a.token_index))
            .collect();
        assert_eq!(pairs, [("و", 4), ("ثم", 2)]);
        assert_eq!(out[1].entry_index, 2);
    }

    #[test]
    fn offline_run_rejects_bad_utf8() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("t.txt");
        let tax = dir.path().join("x.txt");
        std::fs::write(&text, [0xFF, 0xFE]).unwrap();
        std::fs::write(&tax, "و\n").unwrap();
        assert!(matches!(
            annotate_files(&text, &tax, &NormalizationConfig::default()),
            Err(Error::Encoding(0))
        ));
    }
}
