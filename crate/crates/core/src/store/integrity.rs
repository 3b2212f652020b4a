//! Referential and structural constraints.

use crate::accounts::Role;
use crate::activity::{AssignmentStatus, Verdict};
use crate::corpus::{AnnotationLabel, AnnotationSource};
use crate::error::ConstraintViolation;
use crate::tokenize::tokenize;

use super::{EntityRef, Indexes, Tables};

fn violation(constraint: &str, entity: EntityRef) -> ConstraintViolation {
    ConstraintViolation::new(constraint, entity.to_string())
}

fn ensure(ok: bool, constraint: &str, entity: EntityRef) -> Result<(), ConstraintViolation> {
    if ok {
        Ok(())
    } else {
        Err(violation(constraint, entity))
    }
}

/// Checks the constraints that involve `entity` in `t`. A removed entity
/// passes trivially since nothing may reference an annotation.
pub(super) fn check_entity(t: &Tables, entity: EntityRef) -> Result<(), ConstraintViolation> {
    match entity {
        EntityRef::User(id) => {
            let Some(u) = t.users.get(&id) else {
                return Ok(());
            };
            ensure(!u.login.trim().is_empty(), "non-empty login", entity)
        }
        EntityRef::Theme(id) => {
            let Some(th) = t.themes.get(&id) else {
                return Ok(());
            };
            ensure(!th.name.trim().is_empty(), "non-empty theme name", entity)
        }
        EntityRef::Taxonomy(id) => {
            let Some(tax) = t.taxonomies.get(&id) else {
                return Ok(());
            };
            ensure(!tax.entries.is_empty(), "taxonomy has entries", entity)?;
            ensure(
                tax.entries.iter().all(|e| tokenize(e).len() == 1),
                "taxonomy entries are single tokens",
                entity,
            )?;
            // replacing a taxonomy must not orphan annotations pointing at its entries
            let texts: Vec<_> = t.texts_annotated_with(id).collect();
            for a in texts.into_iter().flat_map(|text| t.annotations_of(text)) {
                if let AnnotationLabel::Taxonomy {
                    taxonomy_id,
                    entry_index,
                } = a.label
                {
                    if taxonomy_id == id && entry_index >= tax.entries.len() {
                        return Err(violation(
                            "annotation entry index in range",
                            EntityRef::Annotation(a.id),
                        ));
                    }
                }
            }
            Ok(())
        }
        EntityRef::Text(id) => {
            let Some(text) = t.texts.get(&id) else {
                return Ok(());
            };
            ensure(!text.body.trim().is_empty(), "non-empty body", entity)?;
            ensure(
                t.themes.contains_key(&text.theme_id),
                "text theme exists",
                entity,
            )?;
            ensure(
                t.users.contains_key(&text.created_by),
                "text author exists",
                entity,
            )?;
            ensure(
                text.tokens == tokenize(&text.body),
                "token cache matches body",
                entity,
            )?;
            for a in t.annotations_of(id) {
                ensure(
                    a.token_index < text.tokens.len(),
                    "annotation token index in range",
                    EntityRef::Annotation(a.id),
                )?;
            }
            Ok(())
        }
        EntityRef::Annotation(id) => {
            let Some(a) = t.annotations.get(&id) else {
                return Ok(());
            };
            let text = t
                .texts
                .get(&a.text_id)
                .ok_or_else(|| violation("annotation text exists", entity))?;
            ensure(
                a.token_index < text.tokens.len(),
                "annotation token index in range",
                entity,
            )?;
            match &a.label {
                AnnotationLabel::Taxonomy {
                    taxonomy_id,
                    entry_index,
                } => {
                    ensure(
                        a.source == AnnotationSource::Automatic,
                        "taxonomy labels are automatic",
                        entity,
                    )?;
                    let tax = t
                        .taxonomies
                        .get(taxonomy_id)
                        .ok_or_else(|| violation("annotation taxonomy exists", entity))?;
                    ensure(
                        *entry_index < tax.entries.len(),
                        "annotation entry index in range",
                        entity,
                    )
                }
                AnnotationLabel::Manual { text } => {
                    ensure(
                        a.source == AnnotationSource::Manual,
                        "free labels are manual",
                        entity,
                    )?;
                    ensure(!text.trim().is_empty(), "non-empty manual label", entity)
                }
            }
        }
        EntityRef::Exercise(id) => {
            let Some(e) = t.exercises.get(&id) else {
                return Ok(());
            };
            let text = t
                .texts
                .get(&e.text_id)
                .ok_or_else(|| violation("exercise text exists", entity))?;
            ensure(
                t.users.contains_key(&e.created_by),
                "exercise author exists",
                entity,
            )?;
            ensure(!e.gaps.is_empty(), "exercise has gaps", entity)?;
            ensure(
                e.gaps
                    .windows(2)
                    .all(|w| w[0].token_index < w[1].token_index),
                "gaps strictly increasing",
                entity,
            )?;
            ensure(
                e.text_revision <= text.revision,
                "exercise revision not ahead of text",
                entity,
            )?;
            if e.text_revision == text.revision {
                ensure(
                    e.gaps.iter().all(|g| {
                        text.tokens
                            .get(g.token_index)
                            .is_some_and(|tok| tok.surface == g.expected)
                    }),
                    "gap answers match text tokens",
                    entity,
                )?;
            }
            Ok(())
        }
        EntityRef::Exam(id) => {
            let Some(e) = t.exams.get(&id) else {
                return Ok(());
            };
            ensure(!e.exercise_ids.is_empty(), "exam has exercises", entity)?;
            ensure(
                t.users.contains_key(&e.created_by),
                "exam author exists",
                entity,
            )?;
            let mut seen = std::collections::BTreeSet::new();
            for x in &e.exercise_ids {
                ensure(t.exercises.contains_key(x), "exam exercises exist", entity)?;
                ensure(seen.insert(*x), "exam exercises distinct", entity)?;
            }
            Ok(())
        }
        EntityRef::Assignment(id) => {
            let Some(a) = t.assignments.get(&id) else {
                return Ok(());
            };
            ensure(
                t.exams.contains_key(&a.exam_id),
                "assignment exam exists",
                entity,
            )?;
            ensure(
                t.users
                    .get(&a.student_id)
                    .is_some_and(|u| u.role == Role::Student),
                "assignment student exists",
                entity,
            )?;
            let accomplished = a.status == AssignmentStatus::Accomplished;
            ensure(
                accomplished == a.accomplished_at.is_some(),
                "accomplished_at set iff accomplished",
                entity,
            )?;
            ensure(
                accomplished == t.reports.contains_key(&id),
                "report exists iff accomplished",
                entity,
            )
        }
        EntityRef::Submission(id) => {
            let Some(s) = t.submissions.get(&id) else {
                return Ok(());
            };
            let a = t
                .assignments
                .get(&id)
                .ok_or_else(|| violation("submission assignment exists", entity))?;
            ensure(
                a.exam_id == s.exam_id && a.student_id == s.student_id,
                "submission matches assignment",
                entity,
            )
        }
        EntityRef::Report(id) => {
            let Some(r) = t.reports.get(&id) else {
                return Ok(());
            };
            let a = t
                .assignments
                .get(&id)
                .ok_or_else(|| violation("report assignment exists", entity))?;
            ensure(
                a.exam_id == r.exam_id && a.student_id == r.student_id,
                "report matches assignment",
                entity,
            )?;
            ensure(
                a.status == AssignmentStatus::Accomplished,
                "reported assignment accomplished",
                entity,
            )?;
            ensure(
                r.question_count == r.per_gap.len() as u64,
                "question count",
                entity,
            )?;
            let correct = r
                .per_gap
                .iter()
                .filter(|g| g.verdict == Verdict::Correct)
                .count() as u64;
            ensure(r.correct_count == correct, "correct count", entity)
        }
    }
}

fn rebuild_indexes(t: &Tables) -> Result<Indexes, ConstraintViolation> {
    let mut rebuilt = Tables::default();
    for m in t.to_mutations() {
        rebuilt.apply(m)?;
    }
    Ok(rebuilt.idx)
}

/// Full scan: every entity's constraints hold and the secondary indexes
/// agree with the primary maps.
pub fn verify_integrity(t: &Tables) -> Vec<ConstraintViolation> {
    let mut problems: Vec<ConstraintViolation> = t
        .to_mutations()
        .iter()
        .filter_map(|m| check_entity(t, m.target()).err())
        .collect();
    match rebuild_indexes(t) {
        Ok(idx) if idx == t.idx => {}
        Ok(_) => problems.push(ConstraintViolation::new("indexes match entities", "store")),
        Err(e) => problems.push(e),
    }
    problems
}
