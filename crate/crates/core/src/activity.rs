//! Gap-fill exercises, exams, assignments and grading.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::accounts::{Caller, Role};
use crate::error::{Error, Result};
use crate::ids::{AssignmentId, ExamId, ExerciseId, TextId, UserId};
use crate::performance::{compute_performance, Performance};
use crate::platform::Platform;
use crate::store::{Mutation, Tables};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub token_index: usize,
    /// Token surface captured when the exercise was created.
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exercise {
    pub id: ExerciseId,
    pub text_id: TextId,
    pub text_revision: u32,
    pub title: String,
    pub instructions: String,
    /// Strictly increasing token indices; gap ordinal `n` is `gaps[n - 1]`.
    pub gaps: Vec<Gap>,
    pub created_by: UserId,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Literal(String),
    /// 1-based gap ordinal.
    Gap(usize),
}

/// What a learner sees: the text with gapped tokens replaced by markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExerciseView {
    pub exercise_id: ExerciseId,
    pub title: String,
    pub instructions: String,
    pub rendered_segments: Vec<Segment>,
    pub gap_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exam {
    pub id: ExamId,
    pub title: String,
    pub exercise_ids: Vec<ExerciseId>,
    pub created_by: UserId,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStatus {
    Assigned,
    Accomplished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub exam_id: ExamId,
    pub student_id: UserId,
    pub status: AssignmentStatus,
    pub assigned_at: DateTime<Utc>,
    pub accomplished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmittedAnswer {
    pub exercise_id: ExerciseId,
    /// 1-based gap ordinal within the exercise.
    pub gap: usize,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub exam_id: ExamId,
    pub student_id: UserId,
    pub answers: Vec<SubmittedAnswer>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub exercise_id: ExerciseId,
    pub gap: usize,
    pub expected: String,
    pub given: Option<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StoredReport")]
pub struct CorrectionReport {
    pub assignment_id: AssignmentId,
    pub exam_id: ExamId,
    pub student_id: UserId,
    pub per_gap: Vec<GapVerdict>,
    pub correct_count: u64,
    pub question_count: u64,
    pub performance: Performance,
}

/// Deserialization shape: the performance is recomputed from the counts.
#[derive(Deserialize)]
struct StoredReport {
    assignment_id: AssignmentId,
    exam_id: ExamId,
    student_id: UserId,
    per_gap: Vec<GapVerdict>,
    correct_count: u64,
    question_count: u64,
}

impl TryFrom<StoredReport> for CorrectionReport {
    type Error = Error;

    fn try_from(r: StoredReport) -> Result<Self> {
        Ok(Self {
            performance: compute_performance(r.correct_count, r.question_count)?,
            assignment_id: r.assignment_id,
            exam_id: r.exam_id,
            student_id: r.student_id,
            per_gap: r.per_gap,
            correct_count: r.correct_count,
            question_count: r.question_count,
        })
    }
}

/// A student's assignment with what is needed to take the exam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssignmentOverview {
    #[serde(flatten)]
    pub assignment: Assignment,
    pub exam_title: String,
    pub exercise_ids: Vec<ExerciseId>,
}

pub struct NewExercise<'a> {
    pub text_id: TextId,
    pub gaps: &'a [usize],
    pub title: &'a str,
    pub instructions: &'a str,
}

/// Renders an exercise against the text body it was built from.
pub fn render(
    exercise: &Exercise,
    body: &str,
    tokens: &crate::tokenize::TokenSequence,
) -> ExerciseView {
    let mut segments = Vec::with_capacity(exercise.gaps.len() * 2 + 1);
    let mut cursor = 0;
    for (n, gap) in exercise.gaps.iter().enumerate() {
        let span = tokens.items[gap.token_index].byte_range();
        if span.start > cursor {
            segments.push(Segment::Literal(body[cursor..span.start].to_owned()));
        }
        segments.push(Segment::Gap(n + 1));
        cursor = span.end;
    }
    if cursor < body.len() {
        segments.push(Segment::Literal(body[cursor..].to_owned()));
    }
    ExerciseView {
        exercise_id: exercise.id,
        title: exercise.title.clone(),
        instructions: exercise.instructions.clone(),
        rendered_segments: segments,
        gap_count: exercise.gaps.len(),
    }
}

fn fresh_exercise(
    tables: &Tables,
    id: ExerciseId,
) -> Result<(&Exercise, &crate::corpus::TextDocument)> {
    let exercise = tables
        .exercises
        .get(&id)
        .ok_or(Error::UnknownExercise(id))?;
    let text = tables
        .texts
        .get(&exercise.text_id)
        .ok_or(Error::UnknownText(exercise.text_id))?;
    if text.revision != exercise.text_revision {
        return Err(Error::StaleExercise(id));
    }
    Ok((exercise, text))
}

impl Platform {
    pub fn create_exercise(&self, caller: &Caller, new: NewExercise<'_>) -> Result<Exercise> {
        caller.require_author()?;
        if new.gaps.is_empty() {
            return Err(Error::EmptyGapSet);
        }
        let mut positions = new.gaps.to_vec();
        positions.sort_unstable();
        if let Some(w) = positions.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateGapIndex(w[0]));
        }
        // Holding the text lock pins the revision the answers are read from.
        let _guard = self.text_locks.lock(&new.text_id);
        let tables = self.store.snapshot();
        let text = tables
            .texts
            .get(&new.text_id)
            .ok_or(Error::UnknownText(new.text_id))?;
        let gaps = positions
            .into_iter()
            .map(|i| {
                text.tokens
                    .get(i)
                    .map(|t| Gap {
                        token_index: i,
                        expected: t.surface.clone(),
                    })
                    .ok_or(Error::IndexOutOfRange {
                        index: i,
                        len: text.tokens.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let exercise = Exercise {
            id: ExerciseId::new(),
            text_id: text.id,
            text_revision: text.revision,
            title: new.title.to_owned(),
            instructions: new.instructions.to_owned(),
            gaps,
            created_by: caller.user_id,
            created_at: Utc::now(),
        };
        self.store
            .transact(vec![Mutation::PutExercise(exercise.clone())])?;
        Ok(exercise)
    }

    pub fn exercise(&self, id: ExerciseId) -> Result<Exercise> {
        self.store
            .snapshot()
            .exercises
            .get(&id)
            .cloned()
            .ok_or(Error::UnknownExercise(id))
    }

    pub fn render_exercise(&self, id: ExerciseId) -> Result<ExerciseView> {
        let tables = self.store.snapshot();
        let (exercise, text) = fresh_exercise(&tables, id)?;
        Ok(render(exercise, &text.body, &text.tokens))
    }

    /// Whether `student` has an assignment whose exam contains `exercise`.
    pub fn exercise_assigned_to(&self, exercise: ExerciseId, student: UserId) -> bool {
        let tables = self.store.snapshot();
        let assigned = tables.assignments_of(student).any(|a| {
            tables
                .exams
                .get(&a.exam_id)
                .is_some_and(|e| e.exercise_ids.contains(&exercise))
        });
        assigned
    }

    pub fn assemble_exam(
        &self,
        caller: &Caller,
        title: &str,
        exercise_ids: &[ExerciseId],
    ) -> Result<Exam> {
        caller.require_author()?;
        if exercise_ids.is_empty() {
            return Err(Error::EmptyExam);
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = exercise_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::DuplicateExercise(*dup));
        }
        let tables = self.store.snapshot();
        if let Some(missing) = exercise_ids
            .iter()
            .find(|id| !tables.exercises.contains_key(id))
        {
            return Err(Error::UnknownExercise(*missing));
        }
        let exam = Exam {
            id: ExamId::new(),
            title: title.to_owned(),
            exercise_ids: exercise_ids.to_vec(),
            created_by: caller.user_id,
            created_at: Utc::now(),
        };
        self.store.transact(vec![Mutation::PutExam(exam.clone())])?;
        Ok(exam)
    }

    pub fn exam(&self, id: ExamId) -> Result<Exam> {
        self.store
            .snapshot()
            .exams
            .get(&id)
            .cloned()
            .ok_or(Error::UnknownExam(id))
    }

    /// Assigns an exam to every listed student, all or nothing.
    pub fn assign_exam(
        &self,
        caller: &Caller,
        exam_id: ExamId,
        students: &[UserId],
    ) -> Result<Vec<Assignment>> {
        caller.require_author()?;
        let _serial = self.account_lock.lock();
        let tables = self.store.snapshot();
        if !tables.exams.contains_key(&exam_id) {
            return Err(Error::UnknownExam(exam_id));
        }
        let now = Utc::now();
        let mut seen = BTreeSet::new();
        let mut assignments = Vec::with_capacity(students.len());
        for &student in students {
            match tables.users.get(&student) {
                Some(u) if u.active && u.role == Role::Student => {}
                Some(u) if u.active => return Err(Error::NotAStudent(student)),
                _ => return Err(Error::UnknownUser(student)),
            }
            if tables.assignment_for(exam_id, student).is_some() || !seen.insert(student) {
                return Err(Error::AlreadyAssigned {
                    exam: exam_id,
                    student,
                });
            }
            assignments.push(Assignment {
                id: AssignmentId::new(),
                exam_id,
                student_id: student,
                status: AssignmentStatus::Assigned,
                assigned_at: now,
                accomplished_at: None,
            });
        }
        self.store.transact(
            assignments
                .iter()
                .cloned()
                .map(Mutation::PutAssignment)
                .collect(),
        )?;
        Ok(assignments)
    }

    pub fn assignment(&self, id: AssignmentId) -> Result<Assignment> {
        self.store
            .snapshot()
            .assignments
            .get(&id)
            .cloned()
            .ok_or(Error::NoAssignment)
    }

    pub fn my_assignments(&self, caller: &Caller) -> Vec<AssignmentOverview> {
        let tables = self.store.snapshot();
        let mut rows: Vec<_> = tables
            .assignments_of(caller.user_id)
            .filter_map(|a| {
                let exam = tables.exams.get(&a.exam_id)?;
                Some(AssignmentOverview {
                    assignment: a.clone(),
                    exam_title: exam.title.clone(),
                    exercise_ids: exam.exercise_ids.clone(),
                })
            })
            .collect();
        rows.sort_by_key(|r| (r.assignment.assigned_at, r.assignment.id));
        rows
    }

    /// Grades a learner's submission and marks the assignment accomplished.
    ///
    /// Gaps are visited in exam order, then gap order. A missing or blank
    /// answer is incorrect. Only the assigned student may submit, once.
    pub fn grade_submission(
        &self,
        caller: &Caller,
        submission: Submission,
    ) -> Result<CorrectionReport> {
        if caller.user_id != submission.student_id {
            return Err(Error::NotAuthorized);
        }
        let assignment_id = self
            .store
            .snapshot()
            .assignment_for(submission.exam_id, submission.student_id)
            .map(|a| a.id)
            .ok_or(Error::NoAssignment)?;

        let _guard = self.assignment_locks.lock(&assignment_id);
        let tables = self.store.snapshot();
        let assignment = tables
            .assignments
            .get(&assignment_id)
            .ok_or(Error::NoAssignment)?;
        if assignment.status == AssignmentStatus::Accomplished {
            return Err(Error::AlreadyAccomplished);
        }
        let exam = tables
            .exams
            .get(&submission.exam_id)
            .ok_or(Error::UnknownExam(submission.exam_id))?;

        let mut expected: BTreeMap<(ExerciseId, usize), &str> = BTreeMap::new();
        let mut slots = Vec::new();
        for &exercise_id in &exam.exercise_ids {
            let (exercise, _) = fresh_exercise(&tables, exercise_id)?;
            for (n, gap) in exercise.gaps.iter().enumerate() {
                expected.insert((exercise_id, n + 1), &gap.expected);
                slots.push((exercise_id, n + 1));
            }
        }

        let mut given: BTreeMap<(ExerciseId, usize), &str> = BTreeMap::new();
        for a in &submission.answers {
            let key = (a.exercise_id, a.gap);
            if !expected.contains_key(&key) {
                return Err(Error::UnknownGap {
                    exercise: a.exercise_id,
                    ordinal: a.gap,
                });
            }
            given.insert(key, &a.answer);
        }

        let norm = &self.config.normalization;
        let per_gap: Vec<GapVerdict> = slots
            .into_iter()
            .map(|key| {
                let want = expected[&key];
                let got = given.get(&key).map(|s| s.trim()).filter(|s| !s.is_empty());
                let verdict = match got {
                    Some(g) if norm.equivalent(g, want) => Verdict::Correct,
                    _ => Verdict::Incorrect,
                };
                GapVerdict {
                    exercise_id: key.0,
                    gap: key.1,
                    expected: want.to_owned(),
                    given: got.map(str::to_owned),
                    verdict,
                }
            })
            .collect();

        let question_count = per_gap.len() as u64;
        let correct_count = per_gap
            .iter()
            .filter(|g| g.verdict == Verdict::Correct)
            .count() as u64;
        let report = CorrectionReport {
            assignment_id,
            exam_id: exam.id,
            student_id: submission.student_id,
            performance: compute_performance(correct_count, question_count)?,
            per_gap,
            correct_count,
            question_count,
        };
        let accomplished = Assignment {
            status: AssignmentStatus::Accomplished,
            accomplished_at: Some(submission.submitted_at),
            ..assignment.clone()
        };
        self.store.transact(vec![
            Mutation::PutSubmission(assignment_id, submission),
            Mutation::PutReport(report.clone()),
            Mutation::PutAssignment(accomplished),
        ])?;
        Ok(report)
    }

    /// The persisted report of an accomplished assignment. Students may
    /// only read their own.
    pub fn correction_report(
        &self,
        caller: &Caller,
        assignment_id: AssignmentId,
    ) -> Result<CorrectionReport> {
        let tables = self.store.snapshot();
        let assignment = tables
            .assignments
            .get(&assignment_id)
            .ok_or(Error::NoAssignment)?;
        caller.require_view_student(assignment.student_id)?;
        if assignment.status != AssignmentStatus::Accomplished {
            return Err(Error::NotAccomplished);
        }
        tables
            .reports
            .get(&assignment_id)
            .cloned()
            .ok_or(Error::NotAccomplished)
    }

    /// Report lookup by (exam, student) pair.
    pub fn correction_report_for(
        &self,
        caller: &Caller,
        exam: ExamId,
        student: UserId,
    ) -> Result<CorrectionReport> {
        let id = self
            .store
            .snapshot()
            .assignment_for(exam, student)
            .map(|a| a.id)
            .ok_or(Error::NoAssignment)?;
        self.correction_report(caller, id)
    }
}
