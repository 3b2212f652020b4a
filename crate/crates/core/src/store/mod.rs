//! Embedded transactional store.
//!
//! All entities live in persistent (structurally shared) ordered maps.
//! A commit clones the current tables cheaply, applies a whole batch of
//! mutations, checks every constraint the batch could have broken, appends
//! the batch to the journal, and only then publishes the new tables.
//! Readers take an `Arc` snapshot and never observe a partial batch.
//!
//! The journal is a JSON-lines file: a header line followed by one line per
//! committed batch. Opening a store replays it; a torn final line (crash
//! mid-append) is discarded.

mod archive;
mod integrity;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use im::{OrdMap, OrdSet};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::accounts::User;
use crate::activity::{Assignment, CorrectionReport, Exam, Exercise, Submission};
use crate::corpus::{Annotation, AnnotationLabel, AnnotationSource, TextDocument, Theme};
use crate::error::{ConstraintViolation, Error, Result};
use crate::ids::{
    AnnotationId, AssignmentId, ExamId, ExerciseId, TaxonomyId, TextId, ThemeId, UserId,
};
use crate::taxonomy::Taxonomy;

pub use archive::{ArchiveManifest, ImportConflict, ImportReport, ARCHIVE_SCHEMA_VERSION};
pub use integrity::verify_integrity;

/// One write in a batch. `Put*` inserts or replaces by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Mutation {
    PutUser(User),
    PutTheme(Theme),
    PutTaxonomy(Taxonomy),
    PutText(Arc<TextDocument>),
    PutAnnotation(Annotation),
    DeleteAnnotation(AnnotationId),
    PutExercise(Exercise),
    PutExam(Exam),
    PutAssignment(Assignment),
    PutSubmission(AssignmentId, Submission),
    PutReport(CorrectionReport),
}

/// Entity key, used to name what a batch touched or what import did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EntityRef {
    User(UserId),
    Theme(ThemeId),
    Taxonomy(TaxonomyId),
    Text(TextId),
    Annotation(AnnotationId),
    Exercise(ExerciseId),
    Exam(ExamId),
    Assignment(AssignmentId),
    Submission(AssignmentId),
    Report(AssignmentId),
}

impl std::fmt::Display for EntityRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntityRef::User(id) => write!(f, "user {id}"),
            EntityRef::Theme(id) => write!(f, "theme {id}"),
            EntityRef::Taxonomy(id) => write!(f, "taxonomy {id}"),
            EntityRef::Text(id) => write!(f, "text {id}"),
            EntityRef::Annotation(id) => write!(f, "annotation {id}"),
            EntityRef::Exercise(id) => write!(f, "exercise {id}"),
            EntityRef::Exam(id) => write!(f, "exam {id}"),
            EntityRef::Assignment(id) => write!(f, "assignment {id}"),
            EntityRef::Submission(id) => write!(f, "submission {id}"),
            EntityRef::Report(id) => write!(f, "report {id}"),
        }
    }
}

impl Mutation {
    pub fn target(&self) -> EntityRef {
        match self {
            Mutation::PutUser(u) => EntityRef::User(u.id),
            Mutation::PutTheme(t) => EntityRef::Theme(t.id),
            Mutation::PutTaxonomy(t) => EntityRef::Taxonomy(t.id),
            Mutation::PutText(t) => EntityRef::Text(t.id),
            Mutation::PutAnnotation(a) => EntityRef::Annotation(a.id),
            Mutation::DeleteAnnotation(id) => EntityRef::Annotation(*id),
            Mutation::PutExercise(e) => EntityRef::Exercise(e.id),
            Mutation::PutExam(e) => EntityRef::Exam(e.id),
            Mutation::PutAssignment(a) => EntityRef::Assignment(a.id),
            Mutation::PutSubmission(id, _) => EntityRef::Submission(*id),
            Mutation::PutReport(r) => EntityRef::Report(r.assignment_id),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Indexes {
    theme_names: OrdMap<String, ThemeId>,
    active_logins: OrdMap<String, UserId>,
    annotation_keys: OrdMap<(TextId, usize, AnnotationLabel), AnnotationId>,
    annotations_by_text: OrdMap<TextId, OrdSet<AnnotationId>>,
    /// taxonomy -> text -> number of automatic annotations
    annotations_by_taxonomy: OrdMap<TaxonomyId, OrdMap<TextId, usize>>,
    texts_by_theme: OrdMap<ThemeId, OrdSet<TextId>>,
    assignments_by_student: OrdMap<UserId, OrdSet<AssignmentId>>,
    assignment_keys: OrdMap<(ExamId, UserId), AssignmentId>,
}

/// A consistent view of every entity store plus secondary indexes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tables {
    pub users: OrdMap<UserId, User>,
    pub themes: OrdMap<ThemeId, Theme>,
    pub taxonomies: OrdMap<TaxonomyId, Taxonomy>,
    pub texts: OrdMap<TextId, Arc<TextDocument>>,
    pub annotations: OrdMap<AnnotationId, Annotation>,
    pub exercises: OrdMap<ExerciseId, Exercise>,
    pub exams: OrdMap<ExamId, Exam>,
    pub assignments: OrdMap<AssignmentId, Assignment>,
    pub submissions: OrdMap<AssignmentId, Submission>,
    pub reports: OrdMap<AssignmentId, CorrectionReport>,
    pub(crate) idx: Indexes,
}

fn set_insert<K: Ord + Clone, V: Ord + Clone>(map: &mut OrdMap<K, OrdSet<V>>, k: K, v: V) {
    let mut set = map.get(&k).cloned().unwrap_or_default();
    set.insert(v);
    map.insert(k, set);
}

fn set_remove<K: Ord + Clone, V: Ord + Clone>(map: &mut OrdMap<K, OrdSet<V>>, k: &K, v: &V) {
    if let Some(set) = map.get(k) {
        let set = set.without(v);
        if set.is_empty() {
            map.remove(k);
        } else {
            map.insert(k.clone(), set);
        }
    }
}

fn automatic_taxonomy(a: &Annotation) -> Option<TaxonomyId> {
    match (&a.label, a.source) {
        (AnnotationLabel::Taxonomy { taxonomy_id, .. }, AnnotationSource::Automatic) => {
            Some(*taxonomy_id)
        }
        _ => None,
    }
}

impl Tables {
    pub fn theme_by_name(&self, name: &str) -> Option<&Theme> {
        self.idx
            .theme_names
            .get(name)
            .and_then(|id| self.themes.get(id))
    }

    pub fn active_user_by_login(&self, login: &str) -> Option<&User> {
        self.idx
            .active_logins
            .get(login)
            .and_then(|id| self.users.get(id))
    }

    pub fn annotations_of(&self, text: TextId) -> impl Iterator<Item = &Annotation> {
        self.idx
            .annotations_by_text
            .get(&text)
            .into_iter()
            .flat_map(|ids| ids.iter())
            .filter_map(|id| self.annotations.get(id))
    }

    pub fn annotation_by_key(
        &self,
        text: TextId,
        token_index: usize,
        label: &AnnotationLabel,
    ) -> Option<&Annotation> {
        self.idx
            .annotation_keys
            .get(&(text, token_index, label.clone()))
            .and_then(|id| self.annotations.get(id))
    }

    /// Texts with at least one automatic annotation from `taxonomy`.
    pub fn texts_annotated_with(&self, taxonomy: TaxonomyId) -> impl Iterator<Item = TextId> + '_ {
        self.idx
            .annotations_by_taxonomy
            .get(&taxonomy)
            .into_iter()
            .flat_map(|texts| texts.keys().copied())
    }

    pub fn texts_in_theme(&self, theme: ThemeId) -> impl Iterator<Item = &Arc<TextDocument>> {
        self.idx
            .texts_by_theme
            .get(&theme)
            .into_iter()
            .flat_map(|ids| ids.iter())
            .filter_map(|id| self.texts.get(id))
    }

    pub fn assignments_of(&self, student: UserId) -> impl Iterator<Item = &Assignment> {
        self.idx
            .assignments_by_student
            .get(&student)
            .into_iter()
            .flat_map(|ids| ids.iter())
            .filter_map(|id| self.assignments.get(id))
    }

    pub fn assignment_for(&self, exam: ExamId, student: UserId) -> Option<&Assignment> {
        self.idx
            .assignment_keys
            .get(&(exam, student))
            .and_then(|id| self.assignments.get(id))
    }

    /// Every entity as a `Put` mutation, dependencies first.
    pub fn to_mutations(&self) -> Vec<Mutation> {
        let mut out = Vec::new();
        out.extend(self.users.values().cloned().map(Mutation::PutUser));
        out.extend(self.themes.values().cloned().map(Mutation::PutTheme));
        out.extend(self.taxonomies.values().cloned().map(Mutation::PutTaxonomy));
        out.extend(self.texts.values().cloned().map(Mutation::PutText));
        out.extend(
            self.annotations
                .values()
                .cloned()
                .map(Mutation::PutAnnotation),
        );
        out.extend(self.exercises.values().cloned().map(Mutation::PutExercise));
        out.extend(self.exams.values().cloned().map(Mutation::PutExam));
        out.extend(
            self.assignments
                .values()
                .cloned()
                .map(Mutation::PutAssignment),
        );
        out.extend(
            self.submissions
                .iter()
                .map(|(id, s)| Mutation::PutSubmission(*id, s.clone())),
        );
        out.extend(self.reports.values().cloned().map(Mutation::PutReport));
        out
    }

    pub fn entity_count(&self) -> usize {
        self.users.len()
            + self.themes.len()
            + self.taxonomies.len()
            + self.texts.len()
            + self.annotations.len()
            + self.exercises.len()
            + self.exams.len()
            + self.assignments.len()
            + self.submissions.len()
            + self.reports.len()
    }

    /// Applies one mutation to the primary maps and indexes. Unique keys are
    /// enforced here; references are checked once the whole batch is in.
    fn apply(&mut self, m: Mutation) -> Result<(), ConstraintViolation> {
        let target = m.target();
        let unique = |what: &str| ConstraintViolation::new(what, target.to_string());
        let idx = &mut self.idx;
        match m {
            Mutation::PutUser(u) => {
                if let Some(old) = self.users.get(&u.id) {
                    if old.active {
                        idx.active_logins.remove(&old.login);
                    }
                }
                if u.active {
                    if idx.active_logins.contains_key(&u.login) {
                        return Err(unique("unique active login"));
                    }
                    idx.active_logins.insert(u.login.clone(), u.id);
                }
                self.users.insert(u.id, u);
            }
            Mutation::PutTheme(t) => {
                if let Some(old) = self.themes.get(&t.id) {
                    idx.theme_names.remove(&old.name);
                }
                if idx.theme_names.contains_key(&t.name) {
                    return Err(unique("unique theme name"));
                }
                idx.theme_names.insert(t.name.clone(), t.id);
                self.themes.insert(t.id, t);
            }
            Mutation::PutTaxonomy(t) => {
                self.taxonomies.insert(t.id, t);
            }
            Mutation::PutText(t) => {
                if let Some(old) = self.texts.get(&t.id) {
                    if t.revision < old.revision
                        || (t.revision == old.revision && t.body != old.body)
                    {
                        return Err(unique("text revision increases with every body change"));
                    }
                    set_remove(&mut idx.texts_by_theme, &old.theme_id, &old.id);
                }
                set_insert(&mut idx.texts_by_theme, t.theme_id, t.id);
                self.texts.insert(t.id, t);
            }
            Mutation::PutAnnotation(a) => {
                if let Some(old) = self.annotations.get(&a.id).cloned() {
                    Self::unindex_annotation(idx, &old);
                }
                let key = (a.text_id, a.token_index, a.label.clone());
                if idx.annotation_keys.contains_key(&key) {
                    return Err(unique("unique (text, token_index, label) annotation"));
                }
                idx.annotation_keys.insert(key, a.id);
                set_insert(&mut idx.annotations_by_text, a.text_id, a.id);
                if let Some(tax) = automatic_taxonomy(&a) {
                    let mut texts = idx
                        .annotations_by_taxonomy
                        .get(&tax)
                        .cloned()
                        .unwrap_or_default();
                    *texts.entry(a.text_id).or_insert(0) += 1;
                    idx.annotations_by_taxonomy.insert(tax, texts);
                }
                self.annotations.insert(a.id, a);
            }
            Mutation::DeleteAnnotation(id) => {
                let old = self.annotations.remove(&id).ok_or_else(|| {
                    ConstraintViolation::new("delete of existing annotation", target.to_string())
                })?;
                Self::unindex_annotation(idx, &old);
            }
            Mutation::PutExercise(e) => {
                self.exercises.insert(e.id, e);
            }
            Mutation::PutExam(e) => {
                self.exams.insert(e.id, e);
            }
            Mutation::PutAssignment(a) => {
                if let Some(old) = self.assignments.get(&a.id) {
                    idx.assignment_keys.remove(&(old.exam_id, old.student_id));
                    set_remove(&mut idx.assignments_by_student, &old.student_id, &old.id);
                }
                let key = (a.exam_id, a.student_id);
                if idx.assignment_keys.contains_key(&key) {
                    return Err(unique("unique (exam, student) assignment"));
                }
                idx.assignment_keys.insert(key, a.id);
                set_insert(&mut idx.assignments_by_student, a.student_id, a.id);
                self.assignments.insert(a.id, a);
            }
            Mutation::PutSubmission(id, s) => {
                self.submissions.insert(id, s);
            }
            Mutation::PutReport(r) => {
                self.reports.insert(r.assignment_id, r);
            }
        }
        Ok(())
    }

    fn unindex_annotation(idx: &mut Indexes, a: &Annotation) {
        idx.annotation_keys
            .remove(&(a.text_id, a.token_index, a.label.clone()));
        set_remove(&mut idx.annotations_by_text, &a.text_id, &a.id);
        if let Some(tax) = automatic_taxonomy(a) {
            if let Some(texts) = idx.annotations_by_taxonomy.get(&tax) {
                let mut texts = texts.clone();
                match texts.get(&a.text_id).copied() {
                    Some(n) if n > 1 => {
                        texts.insert(a.text_id, n - 1);
                    }
                    _ => {
                        texts.remove(&a.text_id);
                    }
                }
                if texts.is_empty() {
                    idx.annotations_by_taxonomy.remove(&tax);
                } else {
                    idx.annotations_by_taxonomy.insert(tax, texts);
                }
            }
        }
    }

    /// Applies a batch and checks every constraint it could have broken.
    pub(crate) fn apply_batch(&mut self, batch: Vec<Mutation>) -> Result<(), ConstraintViolation> {
        let touched: Vec<EntityRef> = batch.iter().map(Mutation::target).collect();
        for m in batch {
            self.apply(m)?;
        }
        for t in touched {
            integrity::check_entity(self, t)?;
        }
        Ok(())
    }
}

const JOURNAL_HEADER: &str = r#"{"format":"arac-journal","version":1}"#;

#[derive(Serialize)]
struct BatchLineRef<'a> {
    batch: &'a [Mutation],
}

#[derive(Deserialize)]
struct BatchLine {
    batch: Vec<Mutation>,
}

struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    fn append(&mut self, batch: &[Mutation]) -> Result<()> {
        let mut line = serde_json::to_vec(&BatchLineRef { batch })?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub struct Store {
    current: RwLock<Arc<Tables>>,
    writer: Mutex<Option<Journal>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            current: RwLock::new(Arc::new(Tables::default())),
            writer: Mutex::new(None),
        }
    }

    /// Opens (or creates) a journaled store at `path`, replaying history.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let tables = Self::replay(&mut file)?;
        Ok(Self {
            current: RwLock::new(Arc::new(tables)),
            writer: Mutex::new(Some(Journal { path, file })),
        })
    }

    fn replay(file: &mut File) -> Result<Tables> {
        let len = file.metadata()?.len();
        if len == 0 {
            file.write_all(JOURNAL_HEADER.as_bytes())?;
            file.write_all(b"\n")?;
            file.sync_data()?;
            return Ok(Tables::default());
        }
        file.seek(SeekFrom::Start(0))?;
        let mut reader = BufReader::new(&*file);
        let mut tables = Tables::default();
        let mut offset = 0u64;
        let mut line = String::new();
        let mut first = true;
        let mut torn_at = None;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            let complete = line.ends_with('\n');
            if first {
                if line.trim_end() != JOURNAL_HEADER {
                    return Err(Error::MalformedArchive("not an arac journal".into()));
                }
                first = false;
            } else {
                if !complete {
                    torn_at = Some(offset);
                    break;
                }
                let b: BatchLine = serde_json::from_str(&line)?;
                tables.apply_batch(b.batch)?;
            }
            offset += n as u64;
        }
        drop(reader);
        if let Some(at) = torn_at {
            file.set_len(at)?;
        }
        Ok(tables)
    }

    pub fn snapshot(&self) -> Arc<Tables> {
        self.current.read().clone()
    }

    /// Commits a batch atomically: either every mutation becomes visible or
    /// none does.
    pub fn transact(&self, batch: Vec<Mutation>) -> Result<()> {
        self.transact_with(|_| Ok((batch, ())))
    }

    /// Builds a batch from the latest committed state while holding the
    /// commit lock, then commits it.
    pub fn transact_with<F, T>(&self, build: F) -> Result<T>
    where
        F: FnOnce(&Tables) -> Result<(Vec<Mutation>, T)>,
    {
        let mut writer = self.writer.lock();
        let base = self.snapshot();
        let (batch, out) = build(&base)?;
        if batch.is_empty() {
            return Ok(out);
        }
        let mut next = Tables::clone(&base);
        next.apply_batch(batch.clone())?;
        if let Some(journal) = writer.as_mut() {
            journal.append(&batch)?;
        }
        *self.current.write() = Arc::new(next);
        Ok(out)
    }

    /// Rewrites the journal as a single batch holding the current state.
    pub fn compact(&self) -> Result<()> {
        let mut writer = self.writer.lock();
        let Some(journal) = writer.as_mut() else {
            return Ok(());
        };
        let tables = self.snapshot();
        let tmp = journal.path.with_extension("compact.tmp");
        {
            let mut out = File::create(&tmp)?;
            out.write_all(JOURNAL_HEADER.as_bytes())?;
            out.write_all(b"\n")?;
            let all = tables.to_mutations();
            if !all.is_empty() {
                out.write_all(&serde_json::to_vec(&BatchLineRef { batch: &all })?)?;
                out.write_all(b"\n")?;
            }
            out.sync_all()?;
        }
        std::fs::rename(&tmp, &journal.path)?;
        journal.file = OpenOptions::new()
            .append(true)
            .read(true)
            .open(&journal.path)?;
        Ok(())
    }
}
