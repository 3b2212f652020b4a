//! The indexed text base: themes, texts, taxonomies, annotations and
//! teacher queries.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::accounts::Caller;
use crate::annotatik::find_matches;
use crate::error::{Error, Result};
use crate::ids::{AnnotationId, TaxonomyId, TextId, ThemeId, UserId};
use crate::lom::{Context, Difficulty, LomRecord};
use crate::platform::Platform;
use crate::store::{Mutation, Tables};
use crate::taxonomy::{parse_taxonomy_bytes, strip_bom, validate_entries, Taxonomy};
use crate::tokenize::{tokenize, TokenSequence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub id: ThemeId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDocument {
    pub id: TextId,
    pub title: String,
    pub body: String,
    pub theme_id: ThemeId,
    /// Always `tokenize(body)`.
    pub tokens: TokenSequence,
    pub lom: LomRecord,
    pub created_by: UserId,
    pub created_at: DateTime<Utc>,
    /// Bumped whenever the body changes; exercises remember the revision
    /// their answers were taken from.
    pub revision: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSummary {
    pub id: TextId,
    pub title: String,
    pub theme_id: ThemeId,
    pub token_count: usize,
    pub lom: LomRecord,
    pub created_by: UserId,
    pub created_at: DateTime<Utc>,
}

impl From<&TextDocument> for TextSummary {
    fn from(t: &TextDocument) -> Self {
        Self {
            id: t.id,
            title: t.title.clone(),
            theme_id: t.theme_id,
            token_count: t.tokens.len(),
            lom: t.lom.clone(),
            created_by: t.created_by,
            created_at: t.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationLabel {
    Taxonomy {
        taxonomy_id: TaxonomyId,
        entry_index: usize,
    },
    Manual {
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Automatic,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: AnnotationId,
    pub text_id: TextId,
    pub token_index: usize,
    pub label: AnnotationLabel,
    pub source: AnnotationSource,
    pub created_by: Option<UserId>,
    pub created_at: DateTime<Utc>,
}

/// Teacher search criteria. Unset fields do not constrain; all set fields
/// must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryCriteria {
    pub theme_id: Option<ThemeId>,
    /// Substring of the title or the body, compared after normalization.
    pub keyword: Option<String>,
    pub difficulty: Option<Difficulty>,
    pub context: Option<Context>,
    /// Texts carrying at least one automatic annotation from this taxonomy.
    pub has_taxonomy: Option<TaxonomyId>,
    /// LOM lifecycle author, compared after normalization.
    pub author: Option<String>,
}

pub struct NewText<'a> {
    pub title: &'a str,
    pub body: &'a [u8],
    pub theme_id: ThemeId,
    pub lom: LomRecord,
}

/// Decodes an uploaded body as UTF-8, dropping a leading BOM.
pub fn decode_body(raw: &[u8]) -> Result<String> {
    let body = std::str::from_utf8(strip_bom(raw)).map_err(|e| Error::Encoding(e.valid_up_to()))?;
    if body.trim().is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(body.to_owned())
}

fn text_of(tables: &Tables, id: TextId) -> Result<&Arc<TextDocument>> {
    tables.texts.get(&id).ok_or(Error::UnknownText(id))
}

impl Platform {
    pub fn create_theme(&self, caller: &Caller, name: &str) -> Result<Theme> {
        caller.require_admin()?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if self.store.snapshot().theme_by_name(name).is_some() {
            return Err(Error::DuplicateName(name.to_owned()));
        }
        let theme = Theme {
            id: ThemeId::new(),
            name: name.to_owned(),
        };
        self.store
            .transact(vec![Mutation::PutTheme(theme.clone())])
            .map_err(|e| match e {
                // lost a race with a concurrent creator
                Error::Constraint(_) => Error::DuplicateName(name.to_owned()),
                e => e,
            })?;
        Ok(theme)
    }

    pub fn list_themes(&self) -> Vec<Theme> {
        let mut themes: Vec<_> = self.store.snapshot().themes.values().cloned().collect();
        themes.sort_by(|a, b| a.name.cmp(&b.name));
        themes
    }

    pub fn ingest_text(&self, caller: &Caller, new: NewText<'_>) -> Result<Arc<TextDocument>> {
        caller.require_author()?;
        let body = decode_body(new.body)?;
        new.lom.validate()?;
        if !self.store.snapshot().themes.contains_key(&new.theme_id) {
            return Err(Error::UnknownTheme(new.theme_id));
        }
        let text = TextDocument {
            id: TextId::new(),
            title: new.title.to_owned(),
            tokens: tokenize(&body),
            body,
            theme_id: new.theme_id,
            lom: new.lom,
            created_by: caller.user_id,
            created_at: Utc::now(),
            revision: 0,
        };
        let _guard = self.text_locks.lock(&text.id);
        let text = Arc::new(text);
        self.store.transact(vec![Mutation::PutText(text.clone())])?;
        Ok(text)
    }

    pub fn text(&self, id: TextId) -> Result<Arc<TextDocument>> {
        text_of(&self.store.snapshot(), id).cloned()
    }

    /// Replaces a text's body. Tokens are re-derived, the revision is bumped,
    /// and every annotation on the text is dropped since token positions no
    /// longer line up. Exercises built on the old body become stale.
    pub fn revise_text(
        &self,
        caller: &Caller,
        id: TextId,
        body: &[u8],
    ) -> Result<Arc<TextDocument>> {
        caller.require_author()?;
        let body = decode_body(body)?;
        let _guard = self.text_locks.lock(&id);
        let tables = self.store.snapshot();
        let old = text_of(&tables, id)?;
        let text = Arc::new(TextDocument {
            tokens: tokenize(&body),
            body,
            revision: old.revision + 1,
            ..TextDocument::clone(old)
        });
        let mut batch: Vec<_> = tables
            .annotations_of(id)
            .map(|a| Mutation::DeleteAnnotation(a.id))
            .collect();
        batch.push(Mutation::PutText(text.clone()));
        self.store.transact(batch)?;
        Ok(text)
    }

    pub fn attach_metadata(
        &self,
        caller: &Caller,
        id: TextId,
        lom: LomRecord,
    ) -> Result<Arc<TextDocument>> {
        caller.require_author()?;
        lom.validate()?;
        let _guard = self.text_locks.lock(&id);
        let old = self.text(id)?;
        let text = Arc::new(TextDocument {
            lom,
            ..TextDocument::clone(&old)
        });
        self.store.transact(vec![Mutation::PutText(text.clone())])?;
        Ok(text)
    }

    pub fn create_taxonomy(
        &self,
        caller: &Caller,
        name: &str,
        entries: Vec<String>,
    ) -> Result<Taxonomy> {
        caller.require_author()?;
        let entries: Vec<String> = entries.into_iter().map(|e| e.trim().to_owned()).collect();
        validate_entries(name, &entries)?;
        let taxonomy = Taxonomy {
            id: TaxonomyId::new(),
            name: name.trim().to_owned(),
            entries,
        };
        self.store
            .transact(vec![Mutation::PutTaxonomy(taxonomy.clone())])?;
        Ok(taxonomy)
    }

    /// Creates a taxonomy from an uploaded file in the line format.
    pub fn upload_taxonomy(&self, caller: &Caller, name: &str, file: &[u8]) -> Result<Taxonomy> {
        self.create_taxonomy(caller, name, parse_taxonomy_bytes(file)?)
    }

    pub fn taxonomy(&self, id: TaxonomyId) -> Result<Taxonomy> {
        self.store
            .snapshot()
            .taxonomies
            .get(&id)
            .cloned()
            .ok_or(Error::UnknownTaxonomy(id))
    }

    pub fn list_taxonomies(&self) -> Vec<Taxonomy> {
        let mut all: Vec<_> = self.store.snapshot().taxonomies.values().cloned().collect();
        all.sort_by(|a, b| a.name.cmp(&b.name).then(a.id.cmp(&b.id)));
        all
    }

    /// Annotates one text against one taxonomy.
    ///
    /// The stored automatic annotations for this (text, taxonomy) pair end up
    /// equal to the match set: new matches are inserted, existing ones kept,
    /// and ones that no longer match are removed. Manual annotations are not
    /// touched. The returned set is ordered by entry index, then token index.
    pub fn annotate_automatic(
        &self,
        caller: &Caller,
        text_id: TextId,
        taxonomy_id: TaxonomyId,
    ) -> Result<Vec<Annotation>> {
        caller.require_author()?;
        let _guard = self.text_locks.lock(&text_id);
        let tables = self.store.snapshot();
        let text = text_of(&tables, text_id)?;
        let taxonomy = tables
            .taxonomies
            .get(&taxonomy_id)
            .ok_or(Error::UnknownTaxonomy(taxonomy_id))?;

        let now = Utc::now();
        let mut keep = BTreeSet::new();
        let mut batch = Vec::new();
        let mut result = Vec::new();
        for m in find_matches(&text.tokens, &taxonomy.entries, &self.config.normalization) {
            let label = AnnotationLabel::Taxonomy {
                taxonomy_id,
                entry_index: m.entry_index,
            };
            let annotation = match tables.annotation_by_key(text_id, m.token_index, &label) {
                Some(existing) => existing.clone(),
                None => {
                    let fresh = Annotation {
                        id: AnnotationId::new(),
                        text_id,
                        token_index: m.token_index,
                        label,
                        source: AnnotationSource::Automatic,
                        created_by: Some(caller.user_id),
                        created_at: now,
                    };
                    batch.push(Mutation::PutAnnotation(fresh.clone()));
                    fresh
                }
            };
            keep.insert(annotation.id);
            result.push(annotation);
        }
        batch.extend(
            tables
                .annotations_of(text_id)
                .filter(|a| matches!(a.label, AnnotationLabel::Taxonomy { taxonomy_id: t, .. } if t == taxonomy_id))
                .filter(|a| !keep.contains(&a.id))
                .map(|a| Mutation::DeleteAnnotation(a.id)),
        );
        if !batch.is_empty() {
            self.store.transact(batch)?;
        }
        Ok(result)
    }

    pub fn annotate_manual(
        &self,
        caller: &Caller,
        text_id: TextId,
        token_index: usize,
        label: &str,
    ) -> Result<Annotation> {
        caller.require_author()?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::InvalidLabel("label must not be empty".into()));
        }
        let _guard = self.text_locks.lock(&text_id);
        let tables = self.store.snapshot();
        let text = text_of(&tables, text_id)?;
        if token_index >= text.tokens.len() {
            return Err(Error::IndexOutOfRange {
                index: token_index,
                len: text.tokens.len(),
            });
        }
        let label = AnnotationLabel::Manual {
            text: label.to_owned(),
        };
        if tables
            .annotation_by_key(text_id, token_index, &label)
            .is_some()
        {
            return Err(Error::DuplicateAnnotation(token_index));
        }
        let annotation = Annotation {
            id: AnnotationId::new(),
            text_id,
            token_index,
            label,
            source: AnnotationSource::Manual,
            created_by: Some(caller.user_id),
            created_at: Utc::now(),
        };
        self.store
            .transact(vec![Mutation::PutAnnotation(annotation.clone())])?;
        Ok(annotation)
    }

    /// All annotations of a text, by token index then label.
    pub fn annotations(&self, text_id: TextId) -> Result<Vec<Annotation>> {
        let tables = self.store.snapshot();
        text_of(&tables, text_id)?;
        let mut all: Vec<_> = tables.annotations_of(text_id).cloned().collect();
        all.sort_by(|a, b| (a.token_index, &a.label).cmp(&(b.token_index, &b.label)));
        Ok(all)
    }

    /// Texts matching every set criterion, newest first, ties broken by id.
    pub fn query_texts(&self, criteria: &QueryCriteria) -> Result<Vec<TextSummary>> {
        let tables = self.store.snapshot();
        let norm = &self.config.normalization;

        if let Some(theme) = criteria.theme_id {
            if !tables.themes.contains_key(&theme) {
                return Err(Error::UnknownTheme(theme));
            }
        }
        let annotated: Option<BTreeSet<TextId>> = match criteria.has_taxonomy {
            Some(tax) if !tables.taxonomies.contains_key(&tax) => {
                return Err(Error::UnknownTaxonomy(tax))
            }
            Some(tax) => Some(tables.texts_annotated_with(tax).collect()),
            None => None,
        };
        let keyword = criteria.keyword.as_deref().map(|k| norm.normalize(k));
        let author = criteria.author.as_deref().map(|a| norm.normalize(a.trim()));

        let candidates: Box<dyn Iterator<Item = &Arc<TextDocument>>> = match criteria.theme_id {
            Some(theme) => Box::new(tables.texts_in_theme(theme)),
            None => Box::new(tables.texts.values()),
        };
        let mut hits: Vec<TextSummary> = candidates
            .filter(|t| annotated.as_ref().is_none_or(|set| set.contains(&t.id)))
            .filter(|t| {
                criteria
                    .difficulty
                    .is_none_or(|d| t.lom.educational.difficulty == d)
            })
            .filter(|t| {
                criteria
                    .context
                    .is_none_or(|c| t.lom.educational.context == c)
            })
            .filter(|t| {
                author
                    .as_ref()
                    .is_none_or(|a| norm.normalize(t.lom.lifecycle.author.trim()) == *a)
            })
            .filter(|t| {
                keyword.as_ref().is_none_or(|k| {
                    norm.normalize(&t.title).contains(k.as_str())
                        || norm.normalize(&t.body).contains(k.as_str())
                })
            })
            .map(|t| TextSummary::from(t.as_ref()))
            .collect();
        hits.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(a.id.cmp(&b.id)));
        Ok(hits)
    }
}
