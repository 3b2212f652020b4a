#![allow(dead_code)]

use std::sync::Arc;

use arac_core::accounts::User;
use arac_core::ids::{ThemeId, UserId};
use arac_core::store::{Mutation, Store};
use arac_core::{
    Caller, LomRecord, NewText, NormalizationConfig, Platform, PlatformConfig, Role, TextDocument,
};
use chrono::Utc;
use unicode_normalization::UnicodeNormalization;

/// Platform with an admin, a teacher and one theme. Users are inserted
/// directly so no password hashing happens.
pub struct Bench {
    pub p: Platform,
    pub admin: Caller,
    pub teacher: Caller,
    pub theme: ThemeId,
}

pub fn user(login: &str, role: Role) -> User {
    User {
        id: UserId::new(),
        login: login.into(),
        password_digest: "not-a-real-digest".into(),
        role,
        created_at: Utc::now(),
        active: true,
    }
}

impl Bench {
    pub fn new(normalization: NormalizationConfig) -> Self {
        let p = Platform::new(
            Store::in_memory(),
            PlatformConfig {
                normalization,
                ..PlatformConfig::default()
            },
        );
        let admin = user("admin", Role::Admin);
        let teacher = user("teacher", Role::Teacher);
        p.store()
            .transact(vec![
                Mutation::PutUser(admin.clone()),
                Mutation::PutUser(teacher.clone()),
            ])
            .unwrap();
        let admin = p.caller_for(admin.id).unwrap();
        let teacher = p.caller_for(teacher.id).unwrap();
        let theme = p.create_theme(&admin, "عام").unwrap().id;
        Self {
            p,
            admin,
            teacher,
            theme,
        }
    }

    pub fn student(&self, login: &str) -> Caller {
        let u = user(login, Role::Student);
        self.p
            .store()
            .transact(vec![Mutation::PutUser(u.clone())])
            .unwrap();
        self.p.caller_for(u.id).unwrap()
    }

    pub fn text(&self, body: &str) -> Arc<TextDocument> {
        self.text_with(body, self.theme, LomRecord::default())
    }

    pub fn text_with(&self, body: &str, theme: ThemeId, lom: LomRecord) -> Arc<TextDocument> {
        self.p
            .ingest_text(
                &self.teacher,
                NewText {
                    title: "نص",
                    body: body.as_bytes(),
                    theme_id: theme,
                    lom,
                },
            )
            .unwrap()
    }
}

/// Comparison used by the oracles, written against the unicode crate
/// directly rather than the library's normalizer.
pub fn oracle_norm(s: &str, cfg: &NormalizationConfig) -> String {
    let s: String = s.nfc().collect();
    let s: String = s
        .chars()
        .filter(|c| !(cfg.strip_diacritics && ('\u{064B}'..='\u{0652}').contains(c)))
        .filter(|c| !(cfg.strip_tatweel && *c == '\u{0640}'))
        .collect();
    s.nfc().collect()
}

/// Whitespace split that also peels punctuation off, written as a plain
/// character scan.
pub fn oracle_split(body: &str) -> Vec<String> {
    let punct = |c: char| {
        use unicode_general_category::{get_general_category as cat, GeneralCategory as G};
        matches!(
            cat(c),
            G::ConnectorPunctuation
                | G::DashPunctuation
                | G::OpenPunctuation
                | G::ClosePunctuation
                | G::InitialPunctuation
                | G::FinalPunctuation
                | G::OtherPunctuation
        )
    };
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in body.chars() {
        if c.is_whitespace() || punct(c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if punct(c) {
                out.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// The double loop: every entry against every token, one hit per equal pair.
pub fn brute_force_matches(
    tokens: &[String],
    entries: &[String],
    cfg: &NormalizationConfig,
) -> Vec<(usize, usize)> {
    let entries: Vec<String> = entries.iter().map(|e| oracle_norm(e, cfg)).collect();
    let tokens: Vec<String> = tokens.iter().map(|t| oracle_norm(t, cfg)).collect();
    let mut result = Vec::new();
    for (j, entry) in entries.iter().enumerate() {
        for (i, token) in tokens.iter().enumerate() {
            if entry == token {
                result.push((j, i));
            }
        }
    }
    result
}

pub const WORDS: &[&str] = &[
    "و",
    "ف",
    "ثم",
    "أو",
    "هل",
    "ماذا",
    "ذهب",
    "محمد",
    "عاد",
    "الكتاب",
    "ثُمَّ",
    "ثـم",
    "في",
    "من",
    "إلى",
    "؟",
    "،",
    ".",
];

pub const ALPHABET: &[char] = &[
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ع', 'ف', 'ق', 'ك', 'ل',
    'م', 'ن', 'ه', 'و', 'ي', 'ء', 'أ', 'إ', 'ة', 'ى', '\u{064E}', '\u{064F}', '\u{0650}',
    '\u{0651}', '\u{0652}', '\u{0640}', '\u{0654}', '؟', '،', '؛', '.', '!', '«', '»', '-', '(',
    ')', '1', '٣', 'a', 'Z', ' ', ' ', ' ', ' ', '\n', '\t', '\u{00A0}', '\u{2003}', '\r',
];
