//! Routes and handlers. Every handler resolves the caller first, then runs
//! the platform call on the blocking pool: storage commits fsync and
//! password hashing is deliberately slow.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{delete, get, post, put};
use axum::Router;
use chrono::Utc;
use serde::Deserialize;

use arac_core::accounts::UserProfile;
use arac_core::corpus::decode_body;
use arac_core::ids::{AssignmentId, ExamId, ExerciseId, TaxonomyId, TextId, ThemeId, UserId};
use arac_core::{
    tokenize, Caller, Error, LomRecord, NewExercise, NewText, Platform, QueryCriteria, Role,
    Submission, SubmittedAnswer,
};

use crate::error::ApiError;

const UPLOAD_LIMIT: usize = 32 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
}

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Json<T>(T);

impl<T: serde::Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> axum::response::Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Id<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Params<T>(T);

type ApiResult<T> = Result<Json<T>, ApiError>;

/// A resolved bearer session.
pub struct Session {
    pub caller: Caller,
    pub token: String,
}

impl FromRequestParts<AppState> for Session {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or(Error::Unauthenticated)?
            .to_owned();
        let caller = state.platform.resolve_session(&token)?;
        Ok(Self { caller, token })
    }
}

async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> arac_core::Result<T> + Send + 'static,
{
    let platform = state.platform.clone();
    tokio::task::spawn_blocking(move || f(&platform))
        .await
        .map_err(|_| ApiError::internal())?
        .map_err(ApiError::from)
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/themes", post(create_theme).get(list_themes))
        .route("/api/texts", post(ingest_text).get(query_texts))
        .route("/api/texts/{id}", get(get_text).put(revise_text))
        .route("/api/texts/{id}/metadata", put(attach_metadata))
        .route("/api/tokenize", post(tokenize_body))
        .route(
            "/api/taxonomies",
            post(upload_taxonomy).get(list_taxonomies),
        )
        .route(
            "/api/texts/{id}/annotate/{taxonomy_id}",
            post(annotate_automatic),
        )
        .route(
            "/api/texts/{id}/annotations",
            post(annotate_manual).get(list_annotations),
        )
        .route("/api/exercises", post(create_exercise))
        .route("/api/exercises/{id}/view", get(render_exercise))
        .route("/api/exams", post(assemble_exam))
        .route("/api/exams/{id}/assign", post(assign_exam))
        .route("/api/me/assignments", get(my_assignments))
        .route("/api/assignments/{id}/submit", post(submit))
        .route("/api/assignments/{id}/report", get(report))
        .route("/api/students/{id}/history", get(history))
        .route("/api/students/{id}/assignments", get(monitor_exams))
        .route("/api/users", post(create_account))
        .route("/api/users/{id}", delete(delete_account))
        .route("/api/corpus/export", get(export_corpus))
        .route("/api/corpus/import", post(import_corpus))
        .fallback(|| async { ApiError::not_found() })
        .method_not_allowed_fallback(|| async { ApiError::method_not_allowed() })
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .with_state(AppState { platform })
}

#[derive(Deserialize)]
struct Credentials {
    login: String,
    password: String,
}

async fn login(State(state): State<AppState>, Json(c): Json<Credentials>) -> impl IntoResponse {
    blocking(&state, move |p| p.authenticate(&c.login, &c.password))
        .await
        .map(Json)
}

async fn logout(State(state): State<AppState>, session: Session) -> StatusCode {
    state.platform.logout(&session.token);
    StatusCode::NO_CONTENT
}

#[derive(Deserialize)]
struct NameBody {
    name: String,
}

async fn create_theme(
    State(state): State<AppState>,
    s: Session,
    Json(b): Json<NameBody>,
) -> ApiResult<arac_core::Theme> {
    blocking(&state, move |p| p.create_theme(&s.caller, &b.name))
        .await
        .map(Json)
}

async fn list_themes(
    State(state): State<AppState>,
    _s: Session,
) -> ApiResult<Vec<arac_core::Theme>> {
    Ok(Json(state.platform.list_themes()))
}

#[derive(Deserialize)]
struct TextMeta {
    title: String,
    theme_id: ThemeId,
    #[serde(default)]
    lom: Option<serde_json::Value>,
}

fn lom_from(value: Option<serde_json::Value>) -> Result<LomRecord, ApiError> {
    match value {
        None | Some(serde_json::Value::Null) => Ok(LomRecord::default()),
        Some(v) => Ok(LomRecord::from_json(&v.to_string())?),
    }
}

/// Multipart upload: a `metadata` JSON part and a `body` part holding the
/// raw text bytes.
async fn ingest_text(
    State(state): State<AppState>,
    s: Session,
    request: axum::extract::Request,
) -> Result<(StatusCode, Json<Arc<arac_core::TextDocument>>), ApiError> {
    s.caller.require_author()?;
    let mut form = Multipart::from_request(request, &state).await?;
    let mut meta = None;
    let mut body = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::invalid_request(e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_owned();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::invalid_request(e.body_text()))?;
        match name.as_str() {
            "metadata" => {
                meta = Some(
                    serde_json::from_slice::<TextMeta>(&bytes)
                        .map_err(|e| ApiError::invalid_request(format!("metadata: {e}")))?,
                )
            }
            "body" => body = Some(bytes),
            other => {
                return Err(ApiError::invalid_request(format!(
                    "unexpected part {other:?}"
                )))
            }
        }
    }
    let meta = meta.ok_or_else(|| ApiError::invalid_request("missing metadata part"))?;
    let body = body.ok_or_else(|| ApiError::invalid_request("missing body part"))?;
    let lom = lom_from(meta.lom)?;
    let text = blocking(&state, move |p| {
        p.ingest_text(
            &s.caller,
            NewText {
                title: &meta.title,
                body: &body,
                theme_id: meta.theme_id,
                lom,
            },
        )
    })
    .await?;
    Ok((StatusCode::CREATED, Json(text)))
}

async fn query_texts(
    State(state): State<AppState>,
    s: Session,
    Params(criteria): Params<QueryCriteria>,
) -> ApiResult<Vec<arac_core::corpus::TextSummary>> {
    s.caller.require_author()?;
    Ok(Json(state.platform.query_texts(&criteria)?))
}

async fn get_text(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<TextId>,
) -> ApiResult<Arc<arac_core::TextDocument>> {
    s.caller.require_author()?;
    Ok(Json(state.platform.text(id)?))
}

async fn revise_text(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<TextId>,
    body: Bytes,
) -> ApiResult<Arc<arac_core::TextDocument>> {
    blocking(&state, move |p| p.revise_text(&s.caller, id, &body))
        .await
        .map(Json)
}

async fn attach_metadata(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<TextId>,
    body: Bytes,
) -> ApiResult<Arc<arac_core::TextDocument>> {
    s.caller.require_author()?;
    let raw = std::str::from_utf8(&body)
        .map_err(|_| Error::InvalidMetadata("metadata is not UTF-8".into()))?;
    let lom = LomRecord::from_json(raw)?;
    blocking(&state, move |p| p.attach_metadata(&s.caller, id, lom))
        .await
        .map(Json)
}

async fn tokenize_body(s: Session, body: Bytes) -> ApiResult<arac_core::TokenSequence> {
    s.caller.require_author()?;
    Ok(Json(tokenize(&decode_body(&body)?)))
}

#[derive(Deserialize)]
struct TaxonomyParams {
    name: String,
}

/// The body is the taxonomy file itself: one entry per line.
async fn upload_taxonomy(
    State(state): State<AppState>,
    s: Session,
    Params(q): Params<TaxonomyParams>,
    body: Bytes,
) -> Result<(StatusCode, Json<arac_core::Taxonomy>), ApiError> {
    let taxonomy = blocking(&state, move |p| {
        p.upload_taxonomy(&s.caller, &q.name, &body)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(taxonomy)))
}

async fn list_taxonomies(
    State(state): State<AppState>,
    s: Session,
) -> ApiResult<Vec<arac_core::Taxonomy>> {
    s.caller.require_author()?;
    Ok(Json(state.platform.list_taxonomies()))
}

async fn annotate_automatic(
    State(state): State<AppState>,
    s: Session,
    Id((id, taxonomy_id)): Id<(TextId, TaxonomyId)>,
) -> ApiResult<Vec<arac_core::Annotation>> {
    blocking(&state, move |p| {
        p.annotate_automatic(&s.caller, id, taxonomy_id)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct ManualAnnotation {
    token_index: usize,
    label: String,
}

async fn annotate_manual(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<TextId>,
    Json(b): Json<ManualAnnotation>,
) -> Result<(StatusCode, Json<arac_core::Annotation>), ApiError> {
    let a = blocking(&state, move |p| {
        p.annotate_manual(&s.caller, id, b.token_index, &b.label)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(a)))
}

async fn list_annotations(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<TextId>,
) -> ApiResult<Vec<arac_core::Annotation>> {
    s.caller.require_author()?;
    Ok(Json(state.platform.annotations(id)?))
}

#[derive(Deserialize)]
struct ExerciseBody {
    text_id: TextId,
    gaps: Vec<usize>,
    #[serde(default)]
    title: String,
    #[serde(default)]
    instructions: String,
}

async fn create_exercise(
    State(state): State<AppState>,
    s: Session,
    Json(b): Json<ExerciseBody>,
) -> Result<(StatusCode, Json<arac_core::Exercise>), ApiError> {
    let ex = blocking(&state, move |p| {
        p.create_exercise(
            &s.caller,
            NewExercise {
                text_id: b.text_id,
                gaps: &b.gaps,
                title: &b.title,
                instructions: &b.instructions,
            },
        )
    })
    .await?;
    Ok((StatusCode::CREATED, Json(ex)))
}

/// Students only see exercises of exams assigned to them.
async fn render_exercise(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<ExerciseId>,
) -> ApiResult<arac_core::ExerciseView> {
    let p = &state.platform;
    if s.caller.role == Role::Student && !p.exercise_assigned_to(id, s.caller.user_id) {
        return Err(Error::NotAuthorized.into());
    }
    Ok(Json(p.render_exercise(id)?))
}

#[derive(Deserialize)]
struct ExamBody {
    #[serde(default)]
    title: String,
    exercise_ids: Vec<ExerciseId>,
}

async fn assemble_exam(
    State(state): State<AppState>,
    s: Session,
    Json(b): Json<ExamBody>,
) -> Result<(StatusCode, Json<arac_core::Exam>), ApiError> {
    let exam = blocking(&state, move |p| {
        p.assemble_exam(&s.caller, &b.title, &b.exercise_ids)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(exam)))
}

#[derive(Deserialize)]
struct AssignBody {
    student_ids: Vec<UserId>,
}

async fn assign_exam(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<ExamId>,
    Json(b): Json<AssignBody>,
) -> Result<(StatusCode, Json<Vec<arac_core::Assignment>>), ApiError> {
    let rows = blocking(&state, move |p| {
        p.assign_exam(&s.caller, id, &b.student_ids)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(rows)))
}

async fn my_assignments(
    State(state): State<AppState>,
    s: Session,
) -> ApiResult<Vec<arac_core::activity::AssignmentOverview>> {
    Ok(Json(state.platform.my_assignments(&s.caller)))
}

#[derive(Deserialize)]
struct SubmitBody {
    answers: Vec<SubmittedAnswer>,
}

async fn submit(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<AssignmentId>,
    Json(b): Json<SubmitBody>,
) -> ApiResult<arac_core::CorrectionReport> {
    blocking(&state, move |p| {
        let assignment = p.assignment(id)?;
        if assignment.student_id != s.caller.user_id {
            return Err(Error::NotAuthorized);
        }
        p.grade_submission(
            &s.caller,
            Submission {
                exam_id: assignment.exam_id,
                student_id: assignment.student_id,
                answers: b.answers,
                submitted_at: Utc::now(),
            },
        )
    })
    .await
    .map(Json)
}

async fn report(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<AssignmentId>,
) -> ApiResult<arac_core::CorrectionReport> {
    Ok(Json(state.platform.correction_report(&s.caller, id)?))
}

async fn history(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<UserId>,
) -> ApiResult<arac_core::accounts::PerformanceHistory> {
    Ok(Json(state.platform.performance_history(&s.caller, id)?))
}

async fn monitor_exams(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<UserId>,
) -> ApiResult<Vec<arac_core::accounts::ExamStatusRow>> {
    Ok(Json(state.platform.monitor_exams(&s.caller, id)?))
}

#[derive(Deserialize)]
struct NewAccount {
    login: String,
    password: String,
    role: Role,
}

async fn create_account(
    State(state): State<AppState>,
    s: Session,
    Json(b): Json<NewAccount>,
) -> Result<(StatusCode, Json<UserProfile>), ApiError> {
    let user = blocking(&state, move |p| {
        p.create_account(&s.caller, &b.login, &b.password, b.role)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(UserProfile::from(&user))))
}

async fn delete_account(
    State(state): State<AppState>,
    s: Session,
    Id(id): Id<UserId>,
) -> ApiResult<UserProfile> {
    let user = blocking(&state, move |p| p.delete_account(&s.caller, id)).await?;
    Ok(Json(UserProfile::from(&user)))
}

async fn export_corpus(
    State(state): State<AppState>,
    s: Session,
) -> Result<impl IntoResponse, ApiError> {
    s.caller.require_admin()?;
    let bytes = blocking(&state, |p| {
        let file = tempfile::NamedTempFile::new()?;
        p.store().export_corpus(file.path())?;
        Ok(std::fs::read(file.path())?)
    })
    .await?;
    Ok(([(CONTENT_TYPE, "application/x-tar")], bytes))
}

async fn import_corpus(
    State(state): State<AppState>,
    s: Session,
    body: Bytes,
) -> ApiResult<arac_core::store::ImportReport> {
    s.caller.require_admin()?;
    blocking(&state, move |p| {
        let file = tempfile::NamedTempFile::new()?;
        std::fs::write(file.path(), &body)?;
        p.store().import_corpus(file.path())
    })
    .await
    .map(Json)
}
