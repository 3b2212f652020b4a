//! Whitespace/punctuation tokenizer.
//!
//! A token is either a maximal run of code points that are neither
//! whitespace nor punctuation, or a single punctuation code point.
//! Whitespace is dropped. Punctuation means Unicode general category P*.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    /// Byte offsets `[start, end)` into the tokenized body.
    pub span: [usize; 2],
}

impl Token {
    pub fn byte_range(&self) -> Range<usize> {
        self.span[0]..self.span[1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    pub items: Vec<Token>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Token> {
        self.items.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.items.iter()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|t| t.surface.as_str())
    }
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn tokenize(body: &str) -> TokenSequence {
    let mut items = Vec::new();
    let mut run_start: Option<usize> = None;

    let push = |items: &mut Vec<Token>, range: Range<usize>| {
        items.push(Token {
            index: items.len(),
            surface: body[range.clone()].to_owned(),
            span: [range.start, range.end],
        });
    };

    for (pos, c) in body.char_indices() {
        if c.is_whitespace() || is_punctuation(c) {
            if let Some(start) = run_start.take() {
                push(&mut items, start..pos);
            }
            if !c.is_whitespace() {
                push(&mut items, pos..pos + c.len_utf8());
            }
        } else if run_start.is_none() {
            run_start = Some(pos);
        }
    }
    if let Some(start) = run_start {
        push(&mut items, start..body.len());
    }
    TokenSequence { items }
}
