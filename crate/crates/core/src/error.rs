use thiserror::Error;

use crate::ids::{ExamId, ExerciseId, TaxonomyId, TextId, ThemeId, UserId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which integrity rule a rejected batch broke.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{constraint} violated by {entity}")]
pub struct ConstraintViolation {
    pub constraint: String,
    pub entity: String,
}

impl ConstraintViolation {
    pub fn new(constraint: impl Into<String>, entity: impl Into<String>) -> Self {
        Self {
            constraint: constraint.into(),
            entity: entity.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("text body is not valid UTF-8 (invalid byte at offset {0})")]
    Encoding(usize),
    #[error("text body is empty")]
    EmptyBody,
    #[error("unknown theme {0}")]
    UnknownTheme(ThemeId),
    #[error("unknown text {0}")]
    UnknownText(TextId),
    #[error("unknown taxonomy {0}")]
    UnknownTaxonomy(TaxonomyId),
    #[error("unknown exercise {0}")]
    UnknownExercise(ExerciseId),
    #[error("unknown exam {0}")]
    UnknownExam(ExamId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("token index {index} out of range for a text of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("annotation already exists at token {0} with this label")]
    DuplicateAnnotation(usize),
    #[error("name must not be empty")]
    EmptyName,
    #[error("a theme named {0:?} already exists")]
    DuplicateName(String),
    #[error("not authorized")]
    NotAuthorized,
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("an exercise needs at least one gap")]
    EmptyGapSet,
    #[error("gap index {0} appears more than once")]
    DuplicateGapIndex(usize),
    #[error("an exam needs at least one exercise")]
    EmptyExam,
    #[error("exercise {0} appears more than once")]
    DuplicateExercise(ExerciseId),
    #[error("exam {exam} is already assigned to {student}")]
    AlreadyAssigned { exam: ExamId, student: UserId },
    #[error("user {0} is not a student")]
    NotAStudent(UserId),
    #[error("no assignment found")]
    NoAssignment,
    #[error("assignment already accomplished")]
    AlreadyAccomplished,
    #[error("assignment not accomplished yet")]
    NotAccomplished,
    #[error("source text of exercise {0} changed since the exercise was created")]
    StaleExercise(ExerciseId),
    #[error("answer refers to gap {ordinal} of exercise {exercise}, which is not in the exam")]
    UnknownGap {
        exercise: ExerciseId,
        ordinal: usize,
    },
    #[error("correct answers ({correct}) must not exceed a positive question count ({total})")]
    InvalidCounts { correct: u64, total: u64 },
    #[error("login {0:?} is already taken")]
    DuplicateLogin(String),
    #[error("login must not be empty")]
    EmptyLogin,
    #[error("password must be at least {0} characters")]
    WeakPassword(usize),
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("session missing or expired")]
    Unauthenticated,
    #[error("unsupported archive schema version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
    #[error("import conflicts with existing store: {0}")]
    ConflictingIds(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintViolation),
    #[error("password hashing failed: {0}")]
    Hashing(String),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("storage encoding: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used verbatim on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Encoding(_) => "encoding_error",
            Error::EmptyBody => "empty_body",
            Error::UnknownTheme(_) => "unknown_theme",
            Error::UnknownText(_) => "unknown_text",
            Error::UnknownTaxonomy(_) => "unknown_taxonomy",
            Error::UnknownExercise(_) => "unknown_exercise",
            Error::UnknownExam(_) => "unknown_exam",
            Error::UnknownUser(_) => "unknown_user",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DuplicateAnnotation(_) => "duplicate_annotation",
            Error::EmptyName => "empty_name",
            Error::DuplicateName(_) => "duplicate_name",
            Error::NotAuthorized => "not_authorized",
            Error::InvalidMetadata(_) => "invalid_metadata",
            Error::InvalidTaxonomy(_) => "invalid_taxonomy",
            Error::InvalidLabel(_) => "invalid_label",
            Error::EmptyGapSet => "empty_gap_set",
            Error::DuplicateGapIndex(_) => "duplicate_gap_index",
            Error::EmptyExam => "empty_exam",
            Error::DuplicateExercise(_) => "duplicate_exercise",
            Error::AlreadyAssigned { .. } => "already_assigned",
            Error::NotAStudent(_) => "not_a_student",
            Error::NoAssignment => "no_assignment",
            Error::AlreadyAccomplished => "already_accomplished",
            Error::NotAccomplished => "not_accomplished",
            Error::StaleExercise(_) => "stale_exercise",
            Error::UnknownGap { .. } => "unknown_gap",
            Error::InvalidCounts { .. } => "invalid_counts",
            Error::DuplicateLogin(_) => "duplicate_login",
            Error::EmptyLogin => "empty_login",
            Error::WeakPassword(_) => "weak_password",
            Error::InvalidCredentials => "invalid_credentials",
            Error::Unauthenticated => "unauthenticated",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::MalformedArchive(_) => "malformed_archive",
            Error::ConflictingIds(_) => "conflicting_ids",
            Error::Constraint(_) => "constraint_violation",
            Error::Hashing(_) | Error::Io(_) | Error::Json(_) => "internal",
        }
    }
}
