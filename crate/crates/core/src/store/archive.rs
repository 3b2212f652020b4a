//! Corpus archive: a tar container with a versioned manifest, one UTF-8
//! file per text body and one JSON record per entity.
//!
//! ```text
//! manifest.json         {"format":"arac-corpus","schema_version":1,...}
//! records.jsonl         one {"kind":...} record per entity
//! texts/<text-id>.txt   raw body bytes
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::accounts::User;
use crate::activity::{Assignment, CorrectionReport, Exam, Exercise, Submission};
use crate::corpus::{Annotation, AnnotationLabel, TextDocument, Theme};
use crate::error::{Error, Result};
use crate::ids::{AssignmentId, TextId, ThemeId, UserId};
use crate::lom::LomRecord;
use crate::taxonomy::Taxonomy;
use crate::tokenize::tokenize;

use super::{EntityRef, Mutation, Store, Tables};

pub const ARCHIVE_SCHEMA_VERSION: u32 = 1;
const FORMAT: &str = "arac-corpus";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format: String,
    pub schema_version: u32,
    pub exported_at: DateTime<Utc>,
    pub entity_count: usize,
    pub text_count: usize,
}

/// A text without its body (stored as a separate file) and token cache
/// (re-derived on import).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TextRecord {
    id: TextId,
    title: String,
    theme_id: ThemeId,
    lom: LomRecord,
    created_by: UserId,
    created_at: DateTime<Utc>,
    revision: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    User(User),
    Theme(Theme),
    Taxonomy(Taxonomy),
    Text(TextRecord),
    Annotation(Annotation),
    Exercise(Exercise),
    Exam(Exam),
    Assignment(Assignment),
    Submission {
        assignment_id: AssignmentId,
        submission: Submission,
    },
    Report(CorrectionReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportConflict {
    pub entity: EntityRef,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub created: Vec<EntityRef>,
    /// Already present with identical content.
    pub skipped: Vec<EntityRef>,
    /// Not imported; the existing entity was left as is.
    pub conflicts: Vec<ImportConflict>,
}

fn text_path(id: TextId) -> String {
    format!("texts/{id}.txt")
}

fn append(builder: &mut tar::Builder<BufWriter<File>>, path: &str, data: &[u8]) -> Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_size(data.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_cksum();
    builder.append_data(&mut header, path, data)?;
    Ok(())
}

fn records(tables: &Tables) -> Vec<Record> {
    tables
        .to_mutations()
        .into_iter()
        .filter_map(|m| match m {
            Mutation::PutUser(u) => Some(Record::User(u)),
            Mutation::PutTheme(t) => Some(Record::Theme(t)),
            Mutation::PutTaxonomy(t) => Some(Record::Taxonomy(t)),
            Mutation::PutText(t) => Some(Record::Text(TextRecord {
                id: t.id,
                title: t.title.clone(),
                theme_id: t.theme_id,
                lom: t.lom.clone(),
                created_by: t.created_by,
                created_at: t.created_at,
                revision: t.revision,
            })),
            Mutation::PutAnnotation(a) => Some(Record::Annotation(a)),
            Mutation::PutExercise(e) => Some(Record::Exercise(e)),
            Mutation::PutExam(e) => Some(Record::Exam(e)),
            Mutation::PutAssignment(a) => Some(Record::Assignment(a)),
            Mutation::PutSubmission(assignment_id, submission) => Some(Record::Submission {
                assignment_id,
                submission,
            }),
            Mutation::PutReport(r) => Some(Record::Report(r)),
            Mutation::DeleteAnnotation(_) => None,
        })
        .collect()
}

/// Reads an archive into `Put` mutations, checking the manifest first.
fn read_archive(path: &Path) -> Result<Vec<Mutation>> {
    fn malformed(e: impl std::fmt::Display) -> Error {
        Error::MalformedArchive(e.to_string())
    }
    let mut archive = tar::Archive::new(File::open(path)?);
    let mut manifest: Option<ArchiveManifest> = None;
    let mut lines: Option<String> = None;
    let mut bodies: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for entry in archive.entries().map_err(malformed)? {
        let mut entry = entry.map_err(malformed)?;
        let name = entry
            .path()
            .map_err(malformed)?
            .to_string_lossy()
            .into_owned();
        let mut data = Vec::new();
        entry.read_to_end(&mut data).map_err(malformed)?;
        match name.as_str() {
            "manifest.json" => manifest = Some(serde_json::from_slice(&data).map_err(malformed)?),
            "records.jsonl" => {
                lines = Some(
                    String::from_utf8(data)
                        .map_err(|_| Error::MalformedArchive("records are not UTF-8".into()))?,
                )
            }
            _ if name.starts_with("texts/") => {
                bodies.insert(name, data);
            }
            _ => {}
        }
    }
    let manifest =
        manifest.ok_or_else(|| Error::MalformedArchive("missing manifest.json".into()))?;
    if manifest.format != FORMAT {
        return Err(Error::MalformedArchive(format!(
            "unknown format {:?}",
            manifest.format
        )));
    }
    if manifest.schema_version != ARCHIVE_SCHEMA_VERSION {
        return Err(Error::UnsupportedVersion(manifest.schema_version));
    }
    let lines = lines.ok_or_else(|| Error::MalformedArchive("missing records.jsonl".into()))?;

    let mut out = Vec::new();
    for line in lines.lines().filter(|l| !l.trim().is_empty()) {
        let record: Record = serde_json::from_str(line).map_err(malformed)?;
        out.push(match record {
            Record::User(u) => Mutation::PutUser(u),
            Record::Theme(t) => Mutation::PutTheme(t),
            Record::Taxonomy(t) => Mutation::PutTaxonomy(t),
            Record::Text(r) => {
                let raw = bodies.remove(&text_path(r.id)).ok_or_else(|| {
                    Error::MalformedArchive(format!("missing body for text {}", r.id))
                })?;
                let body = String::from_utf8(raw)
                    .map_err(|e| Error::Encoding(e.utf8_error().valid_up_to()))?;
                Mutation::PutText(Arc::new(TextDocument {
                    id: r.id,
                    title: r.title,
                    tokens: tokenize(&body),
                    body,
                    theme_id: r.theme_id,
                    lom: r.lom,
                    created_by: r.created_by,
                    created_at: r.created_at,
                    revision: r.revision,
                }))
            }
            Record::Annotation(a) => Mutation::PutAnnotation(a),
            Record::Exercise(e) => Mutation::PutExercise(e),
            Record::Exam(e) => Mutation::PutExam(e),
            Record::Assignment(a) => Mutation::PutAssignment(a),
            Record::Submission {
                assignment_id,
                submission,
            } => Mutation::PutSubmission(assignment_id, submission),
            Record::Report(r) => Mutation::PutReport(r),
        });
    }
    Ok(out)
}

/// Entities a mutation's payload refers to.
fn references(m: &Mutation) -> Vec<EntityRef> {
    match m {
        Mutation::PutUser(_) | Mutation::PutTheme(_) | Mutation::PutTaxonomy(_) => vec![],
        Mutation::PutText(t) => vec![EntityRef::Theme(t.theme_id), EntityRef::User(t.created_by)],
        Mutation::PutAnnotation(a) => {
            let mut refs = vec![EntityRef::Text(a.text_id)];
            if let AnnotationLabel::Taxonomy { taxonomy_id, .. } = a.label {
                refs.push(EntityRef::Taxonomy(taxonomy_id));
            }
            refs
        }
        Mutation::DeleteAnnotation(_) => vec![],
        Mutation::PutExercise(e) => vec![EntityRef::Text(e.text_id), EntityRef::User(e.created_by)],
        Mutation::PutExam(e) => e
            .exercise_ids
            .iter()
            .map(|x| EntityRef::Exercise(*x))
            .chain([EntityRef::User(e.created_by)])
            .collect(),
        Mutation::PutAssignment(a) => {
            vec![EntityRef::Exam(a.exam_id), EntityRef::User(a.student_id)]
        }
        Mutation::PutSubmission(id, _)
        | Mutation::PutReport(CorrectionReport {
            assignment_id: id, ..
        }) => {
            vec![EntityRef::Assignment(*id)]
        }
    }
}

/// Whether the payload of `m` equals what `tables` holds under the same id.
/// `None` when the id is absent.
fn same_as_stored(tables: &Tables, m: &Mutation) -> Option<bool> {
    match m {
        Mutation::PutUser(u) => tables.users.get(&u.id).map(|x| x == u),
        Mutation::PutTheme(t) => tables.themes.get(&t.id).map(|x| x == t),
        Mutation::PutTaxonomy(t) => tables.taxonomies.get(&t.id).map(|x| x == t),
        Mutation::PutText(t) => tables.texts.get(&t.id).map(|x| x == t),
        Mutation::PutAnnotation(a) => tables.annotations.get(&a.id).map(|x| x == a),
        Mutation::PutExercise(e) => tables.exercises.get(&e.id).map(|x| x == e),
        Mutation::PutExam(e) => tables.exams.get(&e.id).map(|x| x == e),
        Mutation::PutAssignment(a) => tables.assignments.get(&a.id).map(|x| x == a),
        Mutation::PutSubmission(id, s) => tables.submissions.get(id).map(|x| x == s),
        Mutation::PutReport(r) => tables.reports.get(&r.assignment_id).map(|x| x == r),
        Mutation::DeleteAnnotation(_) => None,
    }
}

/// Unique keys a new entity would claim, checked against the store.
fn unique_clash(tables: &Tables, m: &Mutation) -> Option<String> {
    match m {
        Mutation::PutUser(u) if u.active => tables
            .active_user_by_login(&u.login)
            .map(|_| format!("login {:?} already in use", u.login)),
        Mutation::PutTheme(t) => tables
            .theme_by_name(&t.name)
            .map(|_| format!("theme name {:?} already in use", t.name)),
        Mutation::PutAnnotation(a) => tables
            .annotation_by_key(a.text_id, a.token_index, &a.label)
            .map(|_| "annotation key already in use".to_owned()),
        Mutation::PutAssignment(a) => tables
            .assignment_for(a.exam_id, a.student_id)
            .map(|_| "exam already assigned to student".to_owned()),
        _ => None,
    }
}

impl Store {
    /// Writes every entity to a tar archive at `path`.
    pub fn export_corpus(&self, path: impl AsRef<Path>) -> Result<ArchiveManifest> {
        let tables = self.snapshot();
        let manifest = ArchiveManifest {
            format: FORMAT.to_owned(),
            schema_version: ARCHIVE_SCHEMA_VERSION,
            exported_at: Utc::now(),
            entity_count: tables.entity_count(),
            text_count: tables.texts.len(),
        };
        let mut builder = tar::Builder::new(BufWriter::new(File::create(path.as_ref())?));
        append(
            &mut builder,
            "manifest.json",
            &serde_json::to_vec_pretty(&manifest)?,
        )?;
        let mut lines = Vec::new();
        for record in records(&tables) {
            serde_json::to_writer(&mut lines, &record)?;
            lines.push(b'\n');
        }
        append(&mut builder, "records.jsonl", &lines)?;
        for text in tables.texts.values() {
            append(&mut builder, &text_path(text.id), text.body.as_bytes())?;
        }
        builder
            .into_inner()?
            .into_inner()
            .map_err(|e| e.into_error())?
            .sync_all()?;
        Ok(manifest)
    }

    /// Imports an archive. New entities are created in one batch; entities
    /// already present with identical content are skipped; entities whose id
    /// or unique key collides with different existing content are reported
    /// as conflicts, together with everything that depends on them, and the
    /// existing data is never overwritten.
    pub fn import_corpus(&self, path: impl AsRef<Path>) -> Result<ImportReport> {
        let incoming = read_archive(path.as_ref())?;
        self.transact_with(|tables| {
            let mut report = ImportReport::default();
            let mut blocked: BTreeMap<EntityRef, String> = BTreeMap::new();
            let mut candidates = Vec::new();
            for m in incoming {
                let target = m.target();
                match same_as_stored(tables, &m) {
                    Some(true) => report.skipped.push(target),
                    Some(false) => {
                        blocked.insert(target, "id exists with different content".into());
                    }
                    None => match unique_clash(tables, &m) {
                        Some(reason) => {
                            blocked.insert(target, reason);
                        }
                        None => candidates.push(m),
                    },
                }
            }

            // Drop dependents of blocked entities until nothing changes.
            loop {
                let creating: BTreeSet<EntityRef> =
                    candidates.iter().map(Mutation::target).collect();
                let before = candidates.len();
                candidates.retain(|m| {
                    let bad = references(m).into_iter().find(|r| {
                        blocked.contains_key(r) || !(creating.contains(r) || exists(tables, *r))
                    });
                    match bad {
                        Some(r) => {
                            blocked.insert(m.target(), format!("depends on unavailable {r}"));
                            false
                        }
                        None => true,
                    }
                });
                if candidates.len() == before {
                    break;
                }
            }

            report.created = candidates.iter().map(Mutation::target).collect();
            report.conflicts = blocked
                .into_iter()
                .map(|(entity, reason)| ImportConflict { entity, reason })
                .collect();
            Ok((candidates, report))
        })
        .map_err(|e| match e {
            Error::Constraint(c) => Error::ConflictingIds(c.to_string()),
            e => e,
        })
    }
}

fn exists(tables: &Tables, r: EntityRef) -> bool {
    match r {
        EntityRef::User(id) => tables.users.contains_key(&id),
        EntityRef::Theme(id) => tables.themes.contains_key(&id),
        EntityRef::Taxonomy(id) => tables.taxonomies.contains_key(&id),
        EntityRef::Text(id) => tables.texts.contains_key(&id),
        EntityRef::Annotation(id) => tables.annotations.contains_key(&id),
        EntityRef::Exercise(id) => tables.exercises.contains_key(&id),
        EntityRef::Exam(id) => tables.exams.contains_key(&id),
        EntityRef::Assignment(id) => tables.assignments.contains_key(&id),
        EntityRef::Submission(id) => tables.submissions.contains_key(&id),
        EntityRef::Report(id) => tables.reports.contains_key(&id),
    }
}
