//! Machine-readable description of the wire surface, served at `/api/spec`.

use icp_core::Error;
use serde::Serialize;

use crate::error::status_of;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Auth {
    None,
    Member,
    Admin,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Endpoint {
    pub method: &'static str,
    pub path: &'static str,
    pub auth: Auth,
    pub summary: &'static str,
}

const fn ep(method: &'static str, path: &'static str, auth: Auth, summary: &'static str) -> Endpoint {
    Endpoint {
        method,
        path,
        auth,
        summary,
    }
}

pub const ENDPOINTS: &[Endpoint] = &[
    ep("GET", "/api/spec", Auth::None, "this document"),
    ep("POST", "/api/members", Auth::None, "register {display_name, email}"),
    ep("POST", "/api/sessions", Auth::None, "log in by email {email}; returns a bearer token"),
    ep("DELETE", "/api/sessions", Auth::Member, "log out"),
    ep("GET", "/api/members/{id}/profile", Auth::Member, "profile with memberships"),
    ep("PUT", "/api/members/{id}/profile", Auth::Member, "edit own identity {display_name?, country?, biography?}"),
    ep("POST", "/api/members/{id}/memberships", Auth::Member, "declare own membership {subject, scope}"),
    ep("DELETE", "/api/members/{id}/memberships", Auth::Member, "revoke own membership {subject}"),
    ep("GET", "/api/taxonomy/roots", Auth::None, "level-1 categories"),
    ep("GET", "/api/taxonomy/export", Auth::None, "seed document of the active classification"),
    ep("GET", "/api/taxonomy/view", Auth::Member, "visible subjects for ?scope=working_context|secondary_interests|all"),
    ep("POST", "/api/taxonomy/subjects", Auth::Member, "add a subject {label, parent?}"),
    ep("GET", "/api/taxonomy/{id}", Auth::None, "one subject"),
    ep("GET", "/api/taxonomy/{id}/children", Auth::None, "active children"),
    ep("GET", "/api/taxonomy/{id}/path", Auth::None, "root-to-subject path"),
    ep("POST", "/api/discussions", Auth::Member, "start a discussion {title, body, subjects}"),
    ep("POST", "/api/weblinks", Auth::Member, "index a web link {title, url, subjects}"),
    ep("POST", "/api/documents", Auth::Member, "index a document {title, file_name?, content_base64, subjects}"),
    ep("GET", "/api/resources/{id}", Auth::Member, "consult a resource with its thread"),
    ep("GET", "/api/resources/{id}/export", Auth::Member, "thread export"),
    ep("GET", "/api/resources/{id}/attachment", Auth::Member, "document bytes"),
    ep("PUT", "/api/resources/{id}/body", Auth::Member, "author edits the discussion body {body}"),
    ep("POST", "/api/resources/{id}/replies", Auth::Member, "reply to a discussion {body}"),
    ep("POST", "/api/resources/{id}/subjects", Auth::Member, "spread to a subject {subject}"),
    ep("DELETE", "/api/resources/{id}/subjects/{sid}", Auth::Member, "author removes an association"),
    ep("POST", "/api/search/resources", Auth::Member, "resource search {cart, scope}"),
    ep("POST", "/api/search/profiles", Auth::Member, "profile search {cart, scope}"),
    ep("GET", "/api/admin/usage", Auth::Admin, "usage counts per subject"),
    ep("GET", "/api/admin/stats", Auth::Admin, "subject statistics"),
    ep("POST", "/api/admin/prune", Auth::Admin, "deprecate unused subjects {min_age_days?, usage_window?, dry_run?, now?}"),
    ep("POST", "/api/admin/subjects/{id}/purge", Auth::Admin, "hard-delete an unreferenced deprecated subject"),
    ep("DELETE", "/api/admin/resources/{id}", Auth::Admin, "delete a resource"),
];

#[derive(Serialize)]
pub struct ErrorCode {
    pub code: &'static str,
    pub status: u16,
}

#[derive(Serialize)]
pub struct ApiDocument {
    pub name: &'static str,
    pub version: &'static str,
    pub envelope: &'static str,
    pub endpoints: &'static [Endpoint],
    pub errors: Vec<ErrorCode>,
}

pub fn document() -> ApiDocument {
    let mut errors: Vec<ErrorCode> = Error::catalog()
        .iter()
        .map(|e| ErrorCode {
            code: e.code(),
            status: status_of(e).as_u16(),
        })
        .collect();
    for (code, status) in [("Unauthorized", 401), ("SessionExpired", 401), ("AdminOnly", 403), ("BadRequest", 400)] {
        errors.push(ErrorCode { code, status });
    }
    ApiDocument {
        name: "icp",
        version: env!("CARGO_PKG_VERSION"),
        envelope: "success: {taxonomy_version, data}; failure: {error: {code, message}}",
        endpoints: ENDPOINTS,
        errors,
    }
}
