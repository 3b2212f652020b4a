//! The endpoint-to-operation table. `docs/endpoints.md` mirrors it and a
//! test keeps the two, and the router, in step.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    Authenticated,
    Staff,
    Admin,
    /// Staff, or the student the resource belongs to.
    Owner,
}

#[derive(Debug, Clone, Copy)]
pub struct Endpoint {
    pub method: &'static str,
    pub path: &'static str,
    pub operation: &'static str,
    pub access: Access,
}

const fn ep(
    method: &'static str,
    path: &'static str,
    operation: &'static str,
    access: Access,
) -> Endpoint {
    Endpoint {
        method,
        path,
        operation,
        access,
    }
}

use Access::*;

pub const ENDPOINTS: &[Endpoint] = &[
    ep("POST", "/api/login", "authenticate", Public),
    ep("POST", "/api/logout", "logout", Authenticated),
    ep("POST", "/api/themes", "create_theme", Admin),
    ep("GET", "/api/themes", "list_themes", Authenticated),
    ep("POST", "/api/texts", "ingest_text", Staff),
    ep("GET", "/api/texts", "query_texts", Staff),
    ep("GET", "/api/texts/{id}", "text", Staff),
    ep("PUT", "/api/texts/{id}", "revise_text", Staff),
    ep("PUT", "/api/texts/{id}/metadata", "attach_metadata", Staff),
    ep("POST", "/api/tokenize", "tokenize", Staff),
    ep("POST", "/api/taxonomies", "upload_taxonomy", Staff),
    ep("GET", "/api/taxonomies", "list_taxonomies", Staff),
    ep(
        "POST",
        "/api/texts/{id}/annotate/{taxonomy_id}",
        "annotate_automatic",
        Staff,
    ),
    ep(
        "POST",
        "/api/texts/{id}/annotations",
        "annotate_manual",
        Staff,
    ),
    ep("GET", "/api/texts/{id}/annotations", "annotations", Staff),
    ep("POST", "/api/exercises", "create_exercise", Staff),
    ep("GET", "/api/exercises/{id}/view", "render_exercise", Owner),
    ep("POST", "/api/exams", "assemble_exam", Staff),
    ep("POST", "/api/exams/{id}/assign", "assign_exam", Staff),
    ep(
        "GET",
        "/api/me/assignments",
        "my_assignments",
        Authenticated,
    ),
    ep(
        "POST",
        "/api/assignments/{id}/submit",
        "grade_submission",
        Owner,
    ),
    ep(
        "GET",
        "/api/assignments/{id}/report",
        "correction_report",
        Owner,
    ),
    ep(
        "GET",
        "/api/students/{id}/history",
        "performance_history",
        Owner,
    ),
    ep(
        "GET",
        "/api/students/{id}/assignments",
        "monitor_exams",
        Owner,
    ),
    ep("POST", "/api/users", "create_account", Admin),
    ep("DELETE", "/api/users/{id}", "delete_account", Admin),
    ep("GET", "/api/corpus/export", "export_corpus", Admin),
    ep("POST", "/api/corpus/import", "import_corpus", Admin),
];
