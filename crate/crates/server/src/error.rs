use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use arac_core::Error;

/// Wire form of every error: a stable machine code plus a message for
/// humans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
            },
        }
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }

    pub fn method_not_allowed() -> Self {
        Self::new(
            StatusCode::METHOD_NOT_ALLOWED,
            "method_not_allowed",
            "method not allowed",
        )
    }

    pub fn internal() -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "internal error",
        )
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        Unauthenticated | InvalidCredentials => StatusCode::UNAUTHORIZED,
        NotAuthorized => StatusCode::FORBIDDEN,
        UnknownTheme(_) | UnknownText(_) | UnknownTaxonomy(_) | UnknownExercise(_)
        | UnknownExam(_) | UnknownUser(_) | NoAssignment => StatusCode::NOT_FOUND,
        DuplicateAnnotation(_)
        | DuplicateName(_)
        | AlreadyAssigned { .. }
        | AlreadyAccomplished
        | NotAccomplished
        | StaleExercise(_)
        | DuplicateLogin(_)
        | ConflictingIds(_)
        | Constraint(_) => StatusCode::CONFLICT,
        Encoding(_)
        | EmptyBody
        | IndexOutOfRange { .. }
        | EmptyName
        | InvalidMetadata(_)
        | InvalidTaxonomy(_)
        | InvalidLabel(_)
        | EmptyGapSet
        | DuplicateGapIndex(_)
        | EmptyExam
        | DuplicateExercise(_)
        | NotAStudent(_)
        | UnknownGap { .. }
        | InvalidCounts { .. }
        | EmptyLogin
        | WeakPassword(_)
        | UnsupportedVersion(_)
        | MalformedArchive(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Hashing(_) | Io(_) | Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = status_of(&e);
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
            return Self::internal();
        }
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::invalid_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::invalid_request(r.body_text())
    }
}

impl From<MultipartRejection> for ApiError {
    fn from(r: MultipartRejection) -> Self {
        Self::invalid_request(r.body_text())
    }
}

// A path segment that is not an id cannot name anything.
impl From<PathRejection> for ApiError {
    fn from(_: PathRejection) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            "malformed identifier in path",
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
