//! Comparison normalization shared by annotation matching, keyword search
//! and answer grading.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub const TATWEEL: char = '\u{0640}';

/// Arabic harakat, tanwin, shadda and sukun (U+064B..=U+0652).
pub fn is_arabic_diacritic(c: char) -> bool {
    ('\u{064B}'..='\u{0652}').contains(&c)
}

/// How two strings are compared. NFC composition always applies; the two
/// stripping passes are opt-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    /// Always true. Kept in the config so it shows up in dumps.
    pub nfc_compare: bool,
    pub strip_diacritics: bool,
    pub strip_tatweel: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            nfc_compare: true,
            strip_diacritics: false,
            strip_tatweel: false,
        }
    }
}

impl NormalizationConfig {
    pub fn relaxed() -> Self {
        Self {
            strip_diacritics: true,
            strip_tatweel: true,
            ..Self::default()
        }
    }

    pub fn normalize(&self, s: &str) -> String {
        let composed: String = s.nfc().collect();
        if !self.strip_diacritics && !self.strip_tatweel {
            return composed;
        }
        composed
            .chars()
            .filter(|&c| !(self.strip_diacritics && is_arabic_diacritic(c)))
            .filter(|&c| !(self.strip_tatweel && c == TATWEEL))
            .nfc()
            .collect()
    }

    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        a == b || self.normalize(a) == self.normalize(b)
    }
}
