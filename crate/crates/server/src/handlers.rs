use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::Engine as _;
use icp_core::taxonomy::UsageCounts;
use icp_core::{
    CartEntry, Error, IdentityUpdate, MemberId, MemberProfile, MembershipScope, PrunePolicy, ResourceId, Scope,
    SearchQuery, Subject, SubjectId, Target, Timestamp, UsageWindow,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::App;

type Reply = Result<Response, ApiError>;

/// Success envelope. Every response carries the classification version so
/// clients can detect a stale tree.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub taxonomy_version: u64,
    pub data: T,
}

fn respond<T: Serialize>(app: &App, status: StatusCode, data: T) -> Reply {
    let body = Envelope {
        taxonomy_version: app.engine.taxonomy_version(),
        data,
    };
    Ok((status, Json(body)).into_response())
}

fn ok<T: Serialize>(app: &App, data: T) -> Reply {
    respond(app, StatusCode::OK, data)
}

fn created<T: Serialize>(app: &App, data: T) -> Reply {
    respond(app, StatusCode::CREATED, data)
}

fn parse_id<T: FromStr>(raw: &str) -> Result<T, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not a valid id")))
}

/// JSON request body. An empty body reads as `{}`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) {
            b"{}"
        } else {
            &bytes
        };
        serde_json::from_slice(bytes)
            .map(Body)
            .map_err(|e| ApiError::bad_request(format!("invalid request document: {e}")))
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

/// The member behind the request's session token.
pub struct Member(pub MemberId);

impl FromRequestParts<Arc<App>> for Member {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Arc<App>) -> Result<Self, ApiError> {
        let token = bearer(&parts.headers).ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        Ok(Member(app.sessions.resolve(token)?.member))
    }
}

/// Requests carrying the configured admin token.
pub struct Admin;

impl FromRequestParts<Arc<App>> for Admin {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Arc<App>) -> Result<Self, ApiError> {
        let token = bearer(&parts.headers).ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        match &app.admin_token {
            Some(admin) if admin == token => Ok(Admin),
            _ if app.sessions.resolve(token).is_ok() => Err(ApiError::admin_only()),
            _ => Err(ApiError::unauthorized("invalid admin token")),
        }
    }
}

// ---- members and sessions ----

#[derive(Deserialize)]
pub struct RegisterBody {
    display_name: String,
    email: String,
}

pub async fn register(app: axum::extract::State<Arc<App>>, Body(body): Body<RegisterBody>) -> Reply {
    let profile = app.engine.register(&body.display_name, &body.email)?;
    created(&app, profile)
}

#[derive(Deserialize)]
pub struct LoginBody {
    email: String,
}

pub async fn login(app: axum::extract::State<Arc<App>>, Body(body): Body<LoginBody>) -> Reply {
    let profile = app
        .engine
        .member_by_email(&body.email)
        .ok_or_else(|| ApiError::unauthorized("no member is registered with that email"))?;
    created(&app, app.sessions.issue(profile.id))
}

pub async fn logout(app: axum::extract::State<Arc<App>>, headers: HeaderMap) -> Reply {
    let token = bearer(&headers).ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
    app.sessions.resolve(token)?;
    app.sessions.revoke(token);
    ok(&app, ())
}

#[derive(Serialize)]
pub struct ProfileView {
    #[serde(flatten)]
    profile: MemberProfile,
    /// Declared subjects that are no longer CoPs.
    stale_memberships: BTreeSet<SubjectId>,
}

fn profile_view(app: &App, profile: MemberProfile) -> Result<ProfileView, ApiError> {
    let stale_memberships = app.engine.stale_memberships(profile.id)?;
    Ok(ProfileView {
        profile,
        stale_memberships,
    })
}

pub async fn get_profile(app: axum::extract::State<Arc<App>>, _me: Member, Path(id): Path<String>) -> Reply {
    let profile = app.engine.profile(parse_id(&id)?)?;
    ok(&app, profile_view(&app, profile)?)
}

fn owner(me: MemberId, id: &str) -> Result<MemberId, ApiError> {
    let id: MemberId = parse_id(id)?;
    if id != me {
        return Err(Error::NotProfileOwner.into());
    }
    Ok(id)
}

pub async fn put_profile(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(update): Body<IdentityUpdate>,
) -> Reply {
    let id = owner(me, &id)?;
    let profile = app.engine.update_identity(id, update)?;
    ok(&app, profile_view(&app, profile)?)
}

#[derive(Deserialize)]
pub struct MembershipBody {
    subject: SubjectId,
    #[serde(default = "working")]
    scope: MembershipScope,
}

fn working() -> MembershipScope {
    MembershipScope::WorkingContext
}

pub async fn declare_membership(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(body): Body<MembershipBody>,
) -> Reply {
    let id = owner(me, &id)?;
    let profile = app.engine.declare_membership(id, body.subject, body.scope)?;
    ok(&app, profile_view(&app, profile)?)
}

#[derive(Deserialize)]
pub struct RevokeBody {
    subject: SubjectId,
}

pub async fn revoke_membership(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(body): Body<RevokeBody>,
) -> Reply {
    let id = owner(me, &id)?;
    let profile = app.engine.revoke_membership(id, body.subject)?;
    ok(&app, profile_view(&app, profile)?)
}

// ---- taxonomy ----

#[derive(Serialize)]
pub struct SubjectView {
    #[serde(flatten)]
    subject: Subject,
    cop: bool,
}

fn subject_views(app: &App, subjects: impl IntoIterator<Item = Subject>) -> Vec<SubjectView> {
    let state = app.engine.snapshot();
    subjects
        .into_iter()
        .map(|subject| SubjectView {
            cop: state.taxonomy().is_cop(subject.id).unwrap_or(false),
            subject,
        })
        .collect()
}

pub async fn roots(app: axum::extract::State<Arc<App>>) -> Reply {
    ok(&app, subject_views(&app, app.engine.roots()))
}

pub async fn subject(app: axum::extract::State<Arc<App>>, Path(id): Path<String>) -> Reply {
    let subject = app.engine.subject(parse_id(&id)?)?;
    ok(&app, subject_views(&app, [subject]).pop())
}

pub async fn children(app: axum::extract::State<Arc<App>>, Path(id): Path<String>) -> Reply {
    let children = app.engine.children(parse_id(&id)?)?;
    ok(&app, subject_views(&app, children))
}

pub async fn path(app: axum::extract::State<Arc<App>>, Path(id): Path<String>) -> Reply {
    let path = app.engine.path(parse_id(&id)?)?;
    ok(&app, subject_views(&app, path))
}

#[derive(Deserialize)]
pub struct SubjectBody {
    label: String,
    #[serde(default)]
    parent: Option<SubjectId>,
}

pub async fn add_subject(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<SubjectBody>,
) -> Reply {
    let subject = app.engine.add_subject(&body.label, body.parent, me)?;
    created(&app, subject_views(&app, [subject]).pop())
}

#[derive(Deserialize)]
pub struct ViewParams {
    scope: Option<String>,
}

fn parse_scope(raw: Option<&str>) -> Result<Scope, ApiError> {
    match raw {
        None | Some("") => Ok(Scope::All),
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::InvalidQuery(format!("unknown scope `{raw}`")).into()),
    }
}

pub async fn view(app: axum::extract::State<Arc<App>>, Member(me): Member, Query(params): Query<ViewParams>) -> Reply {
    let scope = parse_scope(params.scope.as_deref())?;
    let ids = app.engine.visible_subjects(me, scope)?;
    let state = app.engine.snapshot();
    let subjects: Vec<Subject> = ids
        .into_iter()
        .filter_map(|id| state.taxonomy().get(id).ok().cloned())
        .collect();
    ok(&app, subject_views(&app, subjects))
}

pub async fn export_seed(app: axum::extract::State<Arc<App>>) -> Reply {
    ok(&app, app.engine.export_seed())
}

// ---- resources ----

#[derive(Deserialize)]
pub struct DiscussionBody {
    title: String,
    body: String,
    subjects: BTreeSet<SubjectId>,
}

pub async fn create_discussion(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<DiscussionBody>,
) -> Reply {
    let resource = app
        .engine
        .create_discussion(me, &body.title, &body.body, &body.subjects)?;
    created(&app, resource)
}

#[derive(Deserialize)]
pub struct WeblinkBody {
    title: String,
    url: String,
    subjects: BTreeSet<SubjectId>,
}

pub async fn create_weblink(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<WeblinkBody>,
) -> Reply {
    let resource = app
        .engine
        .create_weblink(me, &body.title, &body.url, &body.subjects)?;
    created(&app, resource)
}

#[derive(Deserialize)]
pub struct DocumentBody {
    title: String,
    #[serde(default)]
    file_name: Option<String>,
    /// Standard base64 of the attachment bytes.
    content_base64: String,
    subjects: BTreeSet<SubjectId>,
}

pub async fn create_document(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<DocumentBody>,
) -> Reply {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(body.content_base64.trim())
        .map_err(|e| ApiError::bad_request(format!("content_base64: {e}")))?;
    let resource = app
        .engine
        .create_document(me, &body.title, &bytes, body.file_name, &body.subjects)?;
    created(&app, resource)
}

pub async fn consult(app: axum::extract::State<Arc<App>>, Member(me): Member, Path(id): Path<String>) -> Reply {
    let view = app.engine.consult(me, parse_id(&id)?)?;
    ok(&app, view)
}

pub async fn export_thread(app: axum::extract::State<Arc<App>>, Member(me): Member, Path(id): Path<String>) -> Reply {
    let export = app.engine.export_thread(me, parse_id(&id)?)?;
    ok(&app, export)
}

pub async fn attachment(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let id: ResourceId = parse_id(&id)?;
    let export = app.engine.export_thread(me, id)?;
    let icp_core::Content::Document { attachment } = export.content else {
        return Err(Error::BlobNotFound(format!("resource {id} has no attachment")).into());
    };
    let bytes = app.engine.blob(&attachment.sha256)?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

#[derive(Deserialize)]
pub struct TextBody {
    body: String,
}

pub async fn add_reply(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(body): Body<TextBody>,
) -> Reply {
    let reply = app.engine.reply(me, parse_id(&id)?, &body.body)?;
    created(&app, reply)
}

pub async fn edit_body(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(body): Body<TextBody>,
) -> Reply {
    let resource = app.engine.edit_body(me, parse_id(&id)?, &body.body)?;
    ok(&app, resource)
}

#[derive(Deserialize)]
pub struct SpreadBody {
    subject: SubjectId,
}

pub async fn spread(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path(id): Path<String>,
    Body(body): Body<SpreadBody>,
) -> Reply {
    let association = app.engine.spread(me, parse_id(&id)?, body.subject)?;
    created(&app, association)
}

pub async fn remove_association(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Path((id, sid)): Path<(String, String)>,
) -> Reply {
    app.engine
        .remove_association(me, parse_id(&id)?, parse_id(&sid)?)?;
    ok(&app, ())
}

// ---- search ----

#[derive(Deserialize)]
pub struct SearchBody {
    #[serde(default)]
    target: Option<Target>,
    #[serde(default)]
    cart: Vec<CartEntry>,
    #[serde(default)]
    scope: Scope,
}

impl SearchBody {
    fn query(self, target: Target) -> SearchQuery {
        SearchQuery {
            // a mismatched explicit target is rejected by the engine
            target: self.target.unwrap_or(target),
            cart: self.cart,
            scope: self.scope,
        }
    }
}

pub async fn search_resources(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<SearchBody>,
) -> Reply {
    let results = app
        .engine
        .search_resources(me, &body.query(Target::Resources))?;
    ok(&app, results)
}

pub async fn search_profiles(
    app: axum::extract::State<Arc<App>>,
    Member(me): Member,
    Body(body): Body<SearchBody>,
) -> Reply {
    let results = app
        .engine
        .search_profiles(me, &body.query(Target::Profiles))?;
    ok(&app, results)
}

// ---- admin ----

#[derive(Serialize)]
pub struct UsageRow {
    subject: SubjectId,
    label: String,
    #[serde(flatten)]
    counts: UsageCounts,
}

pub async fn usage(app: axum::extract::State<Arc<App>>, _admin: Admin) -> Reply {
    let counts = app.engine.usage_counts()?;
    let state = app.engine.snapshot();
    let rows: Vec<UsageRow> = state
        .taxonomy()
        .iter()
        .map(|s| UsageRow {
            subject: s.id,
            label: s.label.clone(),
            counts: counts.get(&s.id).copied().unwrap_or_default(),
        })
        .collect();
    ok(&app, rows)
}

#[derive(Deserialize)]
pub struct PruneBody {
    #[serde(default)]
    min_age_days: Option<u32>,
    #[serde(default)]
    usage_window: Option<UsageWindow>,
    #[serde(default)]
    dry_run: bool,
    /// Evaluation instant; defaults to the server clock.
    #[serde(default)]
    now: Option<Timestamp>,
}

#[derive(Serialize)]
pub struct PruneReport {
    dry_run: bool,
    subjects: Vec<SubjectId>,
}

pub async fn prune(app: axum::extract::State<Arc<App>>, _admin: Admin, Body(body): Body<PruneBody>) -> Reply {
    let base = app.engine.config().prune_policy;
    let policy = PrunePolicy {
        min_age_days: body.min_age_days.unwrap_or(base.min_age_days),
        usage_window: body.usage_window.unwrap_or(base.usage_window),
    };
    let now = body.now.unwrap_or_else(|| app.engine.now());
    let subjects = if body.dry_run {
        app.engine.prune_candidates(now, &policy)?
    } else {
        app.engine.prune_unused(now, &policy)?
    };
    ok(
        &app,
        PruneReport {
            dry_run: body.dry_run,
            subjects,
        },
    )
}

pub async fn stats(app: axum::extract::State<Arc<App>>, _admin: Admin) -> Reply {
    ok(&app, app.engine.subject_stats()?)
}

pub async fn purge_subject(app: axum::extract::State<Arc<App>>, _admin: Admin, Path(id): Path<String>) -> Reply {
    app.engine.purge_subject(parse_id(&id)?)?;
    ok(&app, ())
}

pub async fn delete_resource(app: axum::extract::State<Arc<App>>, _admin: Admin, Path(id): Path<String>) -> Reply {
    app.engine.delete_resource(parse_id(&id)?)?;
    ok(&app, ())
}

pub async fn api_spec(app: axum::extract::State<Arc<App>>) -> Reply {
    ok(&app, crate::api_spec::document())
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NoSuchEndpoint", "no endpoint at this path")
}
