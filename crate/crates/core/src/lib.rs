//! Core of the ARAC platform: a pedagogically indexed base of Arabic texts.
//!
//! Texts are tokenized on ingestion, annotated against taxonomies of
//! lexemes (coordination particles, interrogatives, ...) or by hand,
//! described with LOM metadata and searched by teachers. Teachers turn texts
//! into gap-fill exercises, assemble exams and assign them; learners submit
//! answers and get a per-gap correction with a performance score.
//!
//! [`Platform`] is the entry point. Everything is persisted through the
//! transactional [`store::Store`].

pub mod accounts;
pub mod activity;
pub mod annotatik;
pub mod corpus;
pub mod error;
pub mod ids;
mod locks;
pub mod lom;
pub mod normalize;
pub mod performance;
mod platform;
pub mod store;
pub mod taxonomy;
#[cfg(test)]
mod testkit;
pub mod tokenize;

pub use accounts::{Caller, Role, SessionToken, User};
pub use activity::{
    Assignment, AssignmentStatus, CorrectionReport, Exam, Exercise, ExerciseView, NewExercise,
    Segment, Submission, SubmittedAnswer, Verdict,
};
pub use corpus::{Annotation, AnnotationLabel, NewText, QueryCriteria, TextDocument, Theme};
pub use error::{Error, Result};
pub use lom::LomRecord;
pub use normalize::NormalizationConfig;
pub use performance::{compute_performance, Performance};
pub use platform::{Platform, PlatformConfig};
pub use taxonomy::Taxonomy;
pub use tokenize::{tokenize, Token, TokenSequence};
