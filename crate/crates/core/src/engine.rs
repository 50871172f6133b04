//! The engine: one writer, many readers.
//!
//! State lives behind an `Arc` swapped under a write lock. Readers clone the
//! `Arc` and work on that snapshot without holding any lock; writers
//! validate against the current state, persist the resulting changes, then
//! apply them (copy-on-write if readers still hold the old snapshot).
//!
//! Reads that record usage (search, consult) queue their events and flush
//! them opportunistically, so a read never waits on the writer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::{Clock, SystemClock, Timestamp};
use crate::error::{Error, Result};
use crate::ids::{MemberId, ResourceId, SubjectId};
use crate::profiles::{IdentityUpdate, MemberProfile, MembershipScope, Scope};
use crate::resources::{self, BlobRef, Content, Origin, Reply, Resource, SubjectAssociation};
use crate::search::{self, Execution, ProfileHit, ResourceHit, SearchQuery, SearchResults};
use crate::state::{Change, State};
use crate::store::Store;
use crate::taxonomy::{
    prune_candidates, Creator, PrunePolicy, SeedDocument, Subject, Taxonomy, UsageCounts,
    UsageEvent, UsageKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Whether members may create level-1 categories.
    pub allow_member_roots: bool,
    pub prune_policy: PrunePolicy,
    /// Fold the event log into a new snapshot once it grows past this.
    pub compaction_bytes: u64,
    pub execution: Execution,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            allow_member_roots: false,
            prune_policy: PrunePolicy::default(),
            compaction_bytes: 4 << 20,
            execution: Execution::Auto,
        }
    }
}

/// A resource as returned by `consult`: the full thread and its index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceView {
    pub resource: Resource,
    pub replies: Vec<Reply>,
    pub associations: Vec<SubjectAssociation>,
    pub last_activity: Timestamp,
}

/// Export form of a discussion thread.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadExport {
    pub title: String,
    #[serde(flatten)]
    pub content: Content,
    pub author: MemberId,
    pub created_at: Timestamp,
    pub replies: Vec<Reply>,
    pub associations: Vec<ExportedAssociation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedAssociation {
    pub subject: SubjectId,
    pub path: Vec<String>,
    pub origin: Origin,
    pub associated_by: MemberId,
    pub associated_at: Timestamp,
}

/// One row of the subject statistics table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub id: SubjectId,
    pub label: String,
    pub path: Vec<String>,
    pub level: u32,
    pub active: bool,
    pub cop: bool,
    pub created_by: Creator,
    pub usage: UsageCounts,
    pub associations: usize,
    /// Members declaring this subject (stale declarations included).
    pub members: Vec<MemberId>,
}

struct Inner {
    state: Arc<State>,
    store: Option<Store>,
    // blobs of an in-memory engine
    blobs: BTreeMap<String, Vec<u8>>,
}

pub struct Engine {
    inner: RwLock<Inner>,
    pending: Mutex<Vec<UsageEvent>>,
    clock: Arc<dyn Clock>,
    config: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("taxonomy_version", &self.snapshot().taxonomy().version())
            .finish_non_exhaustive()
    }
}

fn commit(inner: &mut Inner, changes: &[Change], compaction_bytes: u64) -> Result<()> {
    if changes.is_empty() {
        return Ok(());
    }
    if let Some(store) = inner.store.as_mut() {
        store.append(changes)?;
    }
    let state = Arc::make_mut(&mut inner.state);
    for change in changes {
        state.apply(change);
    }
    if let Some(store) = inner.store.as_mut() {
        if store.log_bytes() > compaction_bytes {
            // the changes are already durable in the log; a failed
            // compaction only delays folding them
            if let Err(err) = store.save(&inner.state) {
                log::warn!("snapshot compaction failed: {err}");
            }
        }
    }
    Ok(())
}

impl Engine {
    pub fn in_memory(config: EngineConfig, clock: Arc<dyn Clock>) -> Engine {
        Self::from_state(State::new(), config, clock)
    }

    pub fn from_state(state: State, config: EngineConfig, clock: Arc<dyn Clock>) -> Engine {
        Engine {
            inner: RwLock::new(Inner {
                state: Arc::new(state),
                store: None,
                blobs: BTreeMap::new(),
            }),
            pending: Mutex::new(Vec::new()),
            clock,
            config,
        }
    }

    /// Opens a persistent engine over `dir`, recovering its latest state.
    pub fn open(dir: impl AsRef<Path>, config: EngineConfig, clock: Arc<dyn Clock>) -> Result<Engine> {
        let (store, snapshot) = Store::open(dir)?;
        Ok(Engine {
            inner: RwLock::new(Inner {
                state: Arc::new(snapshot.state),
                store: Some(store),
                blobs: BTreeMap::new(),
            }),
            pending: Mutex::new(Vec::new()),
            clock,
            config,
        })
    }

    pub fn open_default(dir: impl AsRef<Path>) -> Result<Engine> {
        Self::open(dir, EngineConfig::default(), Arc::new(SystemClock))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// A consistent read-only view of the current state.
    pub fn snapshot(&self) -> Arc<State> {
        self.inner.read().state.clone()
    }

    pub fn taxonomy_version(&self) -> u64 {
        self.snapshot().taxonomy().version()
    }

    fn write<T>(&self, op: impl FnOnce(&State, Timestamp) -> Result<(T, Vec<Change>)>) -> Result<T> {
        let mut inner = self.inner.write();
        self.flush_locked(&mut inner)?;
        let (out, changes) = op(&inner.state, self.clock.now())?;
        commit(&mut inner, &changes, self.config.compaction_bytes)?;
        Ok(out)
    }

    fn flush_locked(&self, inner: &mut Inner) -> Result<()> {
        let events = std::mem::take(&mut *self.pending.lock());
        if events.is_empty() {
            return Ok(());
        }
        let changes: Vec<Change> = events
            .iter()
            .cloned()
            .map(|event| Change::UsageRecorded { event })
            .collect();
        commit(inner, &changes, self.config.compaction_bytes).inspect_err(|_| {
            let mut pending = self.pending.lock();
            let newer = std::mem::take(&mut *pending);
            *pending = events;
            pending.extend(newer);
        })
    }

    fn enqueue(&self, events: Vec<UsageEvent>) {
        if events.is_empty() {
            return;
        }
        self.pending.lock().extend(events);
        if let Some(mut inner) = self.inner.try_write() {
            if let Err(err) = self.flush_locked(&mut inner) {
                log::warn!("deferred usage flush failed: {err}");
            }
        }
    }

    /// Persists queued usage events.
    pub fn flush_usage(&self) -> Result<()> {
        let mut inner = self.inner.write();
        self.flush_locked(&mut inner)
    }

    /// Digest of the state after flushing queued usage.
    pub fn digest(&self) -> Result<String> {
        self.flush_usage()?;
        Ok(self.snapshot().digest())
    }

    /// Folds the event log into a fresh snapshot.
    pub fn save(&self) -> Result<()> {
        let mut inner = self.inner.write();
        self.flush_locked(&mut inner)?;
        let Inner { state, store, .. } = &mut *inner;
        match store {
            Some(store) => store.save(state),
            None => Ok(()),
        }
    }

    // ---- taxonomy ----

    /// Installs a seed classification. The current classification must be
    /// empty.
    pub fn load_seed(&self, doc: &SeedDocument) -> Result<u64> {
        self.write(|state, now| {
            if !state.taxonomy().is_empty() {
                return Err(Error::TaxonomyNotEmpty);
            }
            let taxonomy = Taxonomy::from_seed(doc, now)?;
            Ok((taxonomy.len() as u64, vec![Change::TaxonomySeeded { taxonomy }]))
        })
    }

    pub fn export_seed(&self) -> SeedDocument {
        self.snapshot().taxonomy().to_seed()
    }

    pub fn add_subject(&self, label: &str, parent: Option<SubjectId>, creator: MemberId) -> Result<Subject> {
        let allow_roots = self.config.allow_member_roots;
        self.write(|state, now| {
            state.profiles().get(creator)?;
            let subject = state.taxonomy().plan_subject(
                label,
                parent,
                Creator::Member(creator),
                now,
                allow_roots,
            )?;
            Ok((subject.clone(), vec![Change::SubjectAdded { subject }]))
        })
    }

    pub fn subject(&self, id: SubjectId) -> Result<Subject> {
        self.snapshot().taxonomy().get(id).cloned()
    }

    pub fn roots(&self) -> Vec<Subject> {
        self.snapshot().taxonomy().roots().into_iter().cloned().collect()
    }

    pub fn children(&self, id: SubjectId) -> Result<Vec<Subject>> {
        let state = self.snapshot();
        Ok(state.taxonomy().children(id)?.into_iter().cloned().collect())
    }

    pub fn path(&self, id: SubjectId) -> Result<Vec<Subject>> {
        let state = self.snapshot();
        Ok(state.taxonomy().path(id)?.into_iter().cloned().collect())
    }

    pub fn descendants(&self, id: SubjectId) -> Result<BTreeSet<SubjectId>> {
        self.snapshot().taxonomy().descendants(id)
    }

    pub fn ancestors(&self, id: SubjectId) -> Result<BTreeSet<SubjectId>> {
        self.snapshot().taxonomy().ancestors(id)
    }

    pub fn is_cop(&self, id: SubjectId) -> Result<bool> {
        self.snapshot().taxonomy().is_cop(id)
    }

    pub fn record_usage(&self, event: UsageEvent) -> Result<()> {
        self.write(|state, _| {
            state.taxonomy().get_active(event.subject)?;
            state.profiles().get(event.member)?;
            Ok(((), vec![Change::UsageRecorded { event }]))
        })
    }

    /// Usage tallies per subject, queued events included.
    pub fn usage_counts(&self) -> Result<BTreeMap<SubjectId, UsageCounts>> {
        self.flush_usage()?;
        Ok(UsageCounts::tally(self.snapshot().usage()))
    }

    /// What `prune_unused` would deprecate, without mutating anything.
    pub fn prune_candidates(&self, now: Timestamp, policy: &PrunePolicy) -> Result<Vec<SubjectId>> {
        self.flush_usage()?;
        let state = self.snapshot();
        Ok(prune_candidates(state.taxonomy(), state.usage(), now, policy, |s| {
            state.is_referenced(s)
        }))
    }

    pub fn prune_unused(&self, now: Timestamp, policy: &PrunePolicy) -> Result<Vec<SubjectId>> {
        self.write(|state, _| {
            let ids = prune_candidates(state.taxonomy(), state.usage(), now, policy, |s| {
                state.is_referenced(s)
            });
            let changes = if ids.is_empty() {
                Vec::new()
            } else {
                vec![Change::SubjectsDeprecated {
                    subjects: ids.clone(),
                    at: now,
                }]
            };
            Ok((ids, changes))
        })
    }

    /// Hard-deletes a deprecated subject nothing refers to.
    pub fn purge_subject(&self, id: SubjectId) -> Result<()> {
        self.write(|state, now| {
            let subject = state.taxonomy().get(id)?;
            let in_use = subject.is_active()
                || state.taxonomy().all_children(id).next().is_some()
                || state.is_referenced(id)
                || state.usage().iter().any(|e| e.subject == id);
            if in_use {
                return Err(Error::SubjectInUse(id));
            }
            Ok(((), vec![Change::SubjectPurged { subject: id, at: now }]))
        })
    }

    pub fn subject_stats(&self) -> Result<Vec<SubjectStats>> {
        self.flush_usage()?;
        let state = self.snapshot();
        let taxonomy = state.taxonomy();
        let usage = UsageCounts::tally(state.usage());
        let mut rows: Vec<SubjectStats> = taxonomy
            .iter()
            .map(|s| SubjectStats {
                id: s.id,
                label: s.label.clone(),
                path: taxonomy
                    .path(s.id)
                    .map(|p| p.iter().map(|x| x.label.clone()).collect())
                    .unwrap_or_default(),
                level: s.level,
                active: s.is_active(),
                cop: taxonomy.is_cop(s.id).unwrap_or(false),
                created_by: s.created_by,
                usage: usage.get(&s.id).copied().unwrap_or_default(),
                associations: state.resources().association_count(s.id),
                members: state
                    .profiles()
                    .iter()
                    .filter(|p| p.scope_of(s.id).is_some())
                    .map(|p| p.id)
                    .collect(),
            })
            .collect();
        rows.sort_by(|a, b| a.path.cmp(&b.path).then(a.id.cmp(&b.id)));
        Ok(rows)
    }

    // ---- profiles ----

    pub fn register(&self, display_name: &str, email: &str) -> Result<MemberProfile> {
        self.write(|state, now| {
            let profile = state.profiles().plan_register(display_name, email, now)?;
            Ok((profile.clone(), vec![Change::MemberRegistered { profile }]))
        })
    }

    pub fn profile(&self, member: MemberId) -> Result<MemberProfile> {
        self.snapshot().profiles().get(member).cloned()
    }

    pub fn member_by_email(&self, email: &str) -> Option<MemberProfile> {
        self.snapshot().profiles().by_email(email).cloned()
    }

    pub fn update_identity(&self, member: MemberId, update: IdentityUpdate) -> Result<MemberProfile> {
        self.write(|state, _| {
            state.profiles().get(member)?;
            if update.display_name.as_deref().is_some_and(|n| n.trim().is_empty()) {
                return Err(Error::EmptyDisplayName);
            }
            Ok(((), vec![Change::IdentityUpdated { member, update }]))
        })?;
        self.profile(member)
    }

    /// Declares `subject` a membership. Re-declaring in the same scope is a
    /// no-op; declaring in the other scope is a conflict.
    pub fn declare_membership(
        &self,
        member: MemberId,
        subject: SubjectId,
        scope: MembershipScope,
    ) -> Result<MemberProfile> {
        self.write(|state, now| {
            let fresh = state
                .profiles()
                .check_declare(state.taxonomy(), member, subject, scope)?;
            if !fresh {
                return Ok(((), Vec::new()));
            }
            let changes = vec![
                Change::MembershipDeclared {
                    member,
                    subject,
                    scope,
                },
                Change::UsageRecorded {
                    event: UsageEvent {
                        subject,
                        member,
                        kind: UsageKind::ProfileFill,
                        at: now,
                    },
                },
            ];
            Ok(((), changes))
        })?;
        self.profile(member)
    }

    pub fn revoke_membership(&self, member: MemberId, subject: SubjectId) -> Result<MemberProfile> {
        self.write(|state, _| {
            state.profiles().check_revoke(member, subject)?;
            Ok(((), vec![Change::MembershipRevoked { member, subject }]))
        })?;
        self.profile(member)
    }

    /// Live memberships (declared subjects that are still CoPs).
    pub fn memberships(&self, member: MemberId, scope: Scope) -> Result<BTreeSet<SubjectId>> {
        let state = self.snapshot();
        Ok(state.profiles().get(member)?.memberships(state.taxonomy(), scope))
    }

    pub fn stale_memberships(&self, member: MemberId) -> Result<BTreeSet<SubjectId>> {
        let state = self.snapshot();
        Ok(state.profiles().get(member)?.stale_memberships(state.taxonomy()))
    }

    pub fn visible_subjects(&self, member: MemberId, scope: Scope) -> Result<BTreeSet<SubjectId>> {
        let state = self.snapshot();
        Ok(state
            .profiles()
            .get(member)?
            .visible_subjects(state.taxonomy(), scope))
    }

    // ---- resources ----

    fn create(
        &self,
        author: MemberId,
        title: &str,
        subjects: &BTreeSet<SubjectId>,
        content: impl FnOnce() -> Result<Content>,
    ) -> Result<Resource> {
        self.write(|state, now| {
            let profile = state.profiles().get(author)?;
            resources::check_creation(state.taxonomy(), profile, title, subjects)?;
            let resource = Resource {
                id: state.resources().next_resource_id(),
                author,
                title: title.trim().to_string(),
                content: content()?,
                created_at: now,
                edited_at: None,
            };
            let associations: Vec<_> = subjects
                .iter()
                .map(|&subject| SubjectAssociation {
                    resource: resource.id,
                    subject,
                    associated_by: author,
                    origin: Origin::Authored,
                    associated_at: now,
                })
                .collect();
            let mut changes = vec![Change::ResourceCreated {
                resource: resource.clone(),
                associations,
            }];
            changes.extend(subjects.iter().map(|&subject| Change::UsageRecorded {
                event: UsageEvent {
                    subject,
                    member: author,
                    kind: UsageKind::Index,
                    at: now,
                },
            }));
            Ok((resource, changes))
        })
    }

    /// Starts a discussion indexed on CoPs the author belongs to.
    pub fn create_discussion(
        &self,
        author: MemberId,
        title: &str,
        body: &str,
        subjects: &BTreeSet<SubjectId>,
    ) -> Result<Resource> {
        self.create(author, title, subjects, || {
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            Ok(Content::Discussion {
                body: body.to_string(),
            })
        })
    }

    pub fn create_weblink(
        &self,
        author: MemberId,
        title: &str,
        url: &str,
        subjects: &BTreeSet<SubjectId>,
    ) -> Result<Resource> {
        self.create(author, title, subjects, || {
            Ok(Content::Weblink {
                url: resources::validate_url(url)?,
            })
        })
    }

    /// Stores `bytes` as a blob and indexes a document pointing at it.
    pub fn create_document(
        &self,
        author: MemberId,
        title: &str,
        bytes: &[u8],
        file_name: Option<String>,
        subjects: &BTreeSet<SubjectId>,
    ) -> Result<Resource> {
        {
            // validate before writing any blob
            let state = self.snapshot();
            let profile = state.profiles().get(author)?;
            resources::check_creation(state.taxonomy(), profile, title, subjects)?;
        }
        let attachment = self.put_blob(bytes, file_name)?;
        self.create(author, title, subjects, || Ok(Content::Document { attachment }))
    }

    fn put_blob(&self, bytes: &[u8], file_name: Option<String>) -> Result<BlobRef> {
        let mut inner = self.inner.write();
        match &inner.store {
            Some(store) => store.put_blob(bytes, file_name),
            None => {
                let sha256 = hex::encode(Sha256::digest(bytes));
                inner.blobs.insert(sha256.clone(), bytes.to_vec());
                Ok(BlobRef {
                    sha256,
                    size: bytes.len() as u64,
                    file_name,
                })
            }
        }
    }

    pub fn blob(&self, sha256: &str) -> Result<Vec<u8>> {
        let inner = self.inner.read();
        match &inner.store {
            Some(store) => store.blob(sha256),
            None => inner
                .blobs
                .get(sha256)
                .cloned()
                .ok_or_else(|| Error::BlobNotFound(sha256.to_string())),
        }
    }

    pub fn reply(&self, author: MemberId, discussion: ResourceId, body: &str) -> Result<Reply> {
        self.write(|state, now| {
            let entry = state.resources().get(discussion)?;
            let profile = state.profiles().get(author)?;
            if !search::visible_to(state.taxonomy(), profile, entry) {
                return Err(Error::NotVisible(format!(
                    "resource {discussion} is not visible to {author}"
                )));
            }
            if !matches!(entry.resource.content, Content::Discussion { .. }) {
                return Err(Error::NotADiscussion(discussion));
            }
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            let reply = Reply {
                id: state.resources().next_reply_id(),
                discussion,
                author,
                body: body.to_string(),
                created_at: now,
            };
            Ok((reply.clone(), vec![Change::ReplyAdded { reply }]))
        })
    }

    /// Associates a visible resource with another CoP or category.
    pub fn spread(&self, member: MemberId, resource: ResourceId, subject: SubjectId) -> Result<SubjectAssociation> {
        self.write(|state, now| {
            let entry = state.resources().get(resource)?;
            let profile = state.profiles().get(member)?;
            let taxonomy = state.taxonomy();
            let view = profile.visible_subjects(taxonomy, Scope::All);
            if !search::visible_to(taxonomy, profile, entry) {
                return Err(Error::NotVisible(format!(
                    "resource {resource} is not visible to {member}"
                )));
            }
            taxonomy.get_active(subject)?;
            if entry.associations.contains_key(&subject) {
                return Err(Error::AlreadyAssociated { resource, subject });
            }
            if !view.contains(&subject) {
                return Err(Error::NotVisible(format!(
                    "subject {subject} is outside the classification view of {member}"
                )));
            }
            let association = SubjectAssociation {
                resource,
                subject,
                associated_by: member,
                origin: Origin::Spread,
                associated_at: now,
            };
            let changes = vec![
                Change::AssociationAdded {
                    association: association.clone(),
                },
                Change::UsageRecorded {
                    event: UsageEvent {
                        subject,
                        member,
                        kind: UsageKind::Spread,
                        at: now,
                    },
                },
            ];
            Ok((association, changes))
        })
    }

    /// The author's regulation right: drop a subject judged irrelevant.
    pub fn remove_association(&self, actor: MemberId, resource: ResourceId, subject: SubjectId) -> Result<()> {
        self.write(|state, now| {
            let entry = state.resources().get(resource)?;
            state.profiles().get(actor)?;
            resources::check_removal(entry, actor, subject)?;
            Ok((
                (),
                vec![Change::AssociationRemoved {
                    resource,
                    subject,
                    actor,
                    at: now,
                }],
            ))
        })
    }

    pub fn edit_body(&self, actor: MemberId, resource: ResourceId, body: &str) -> Result<Resource> {
        self.write(|state, now| {
            let entry = state.resources().get(resource)?;
            if entry.author() != actor {
                return Err(Error::NotAuthor(resource));
            }
            let mut updated = entry.resource.clone();
            let Content::Discussion { body: current } = &mut updated.content else {
                return Err(Error::NotADiscussion(resource));
            };
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            *current = body.to_string();
            updated.edited_at = Some(now);
            Ok((
                updated,
                vec![Change::BodyEdited {
                    resource,
                    body: body.to_string(),
                    at: now,
                }],
            ))
        })
    }

    /// Admin-only removal of a whole resource.
    pub fn delete_resource(&self, resource: ResourceId) -> Result<()> {
        self.write(|state, now| {
            state.resources().get(resource)?;
            Ok(((), vec![Change::ResourceDeleted { resource, at: now }]))
        })
    }

    /// Reads the full thread and records a consult event per subject.
    pub fn consult(&self, member: MemberId, resource: ResourceId) -> Result<ResourceView> {
        let state = self.snapshot();
        let entry = state.resources().get(resource)?;
        let profile = state.profiles().get(member)?;
        if !search::visible_to(state.taxonomy(), profile, entry) {
            return Err(Error::NotVisible(format!(
                "resource {resource} is not visible to {member}"
            )));
        }
        let now = self.clock.now();
        let events = entry
            .tagged()
            .filter(|s| state.taxonomy().is_active(*s))
            .map(|subject| UsageEvent {
                subject,
                member,
                kind: UsageKind::Consult,
                at: now,
            })
            .collect();
        let view = ResourceView {
            resource: entry.resource.clone(),
            replies: entry.replies.clone(),
            associations: entry.associations.values().cloned().collect(),
            last_activity: entry.last_activity(),
        };
        self.enqueue(events);
        Ok(view)
    }

    /// Thread export; the same visibility rule as `consult`, without usage.
    pub fn export_thread(&self, member: MemberId, resource: ResourceId) -> Result<ThreadExport> {
        let state = self.snapshot();
        let entry = state.resources().get(resource)?;
        let profile = state.profiles().get(member)?;
        if !search::visible_to(state.taxonomy(), profile, entry) {
            return Err(Error::NotVisible(format!(
                "resource {resource} is not visible to {member}"
            )));
        }
        let taxonomy = state.taxonomy();
        Ok(ThreadExport {
            title: entry.resource.title.clone(),
            content: entry.resource.content.clone(),
            author: entry.author(),
            created_at: entry.resource.created_at,
            replies: entry.replies.clone(),
            associations: entry
                .associations
                .values()
                .map(|a| ExportedAssociation {
                    subject: a.subject,
                    path: taxonomy
                        .path(a.subject)
                        .map(|p| p.iter().map(|s| s.label.clone()).collect())
                        .unwrap_or_default(),
                    origin: a.origin,
                    associated_by: a.associated_by,
                    associated_at: a.associated_at,
                })
                .collect(),
        })
    }

    // ---- search ----

    pub fn effective_subjects(&self, resource: ResourceId) -> Result<BTreeSet<SubjectId>> {
        let state = self.snapshot();
        let entry = state.resources().get(resource)?;
        Ok(search::effective_subjects(state.taxonomy(), entry))
    }

    pub fn subject_matches(&self, resource: ResourceId, subject: SubjectId) -> Result<bool> {
        let state = self.snapshot();
        let entry = state.resources().get(resource)?;
        state.taxonomy().get(subject)?;
        Ok(search::subject_matches(state.taxonomy(), entry, subject))
    }

    pub fn visible_to(&self, member: MemberId, resource: ResourceId) -> Result<bool> {
        let state = self.snapshot();
        let entry = state.resources().get(resource)?;
        let profile = state.profiles().get(member)?;
        Ok(search::visible_to(state.taxonomy(), profile, entry))
    }

    pub fn search_resources(&self, member: MemberId, query: &SearchQuery) -> Result<SearchResults<ResourceHit>> {
        let state = self.snapshot();
        let (results, usage) =
            search::search_resources(&state, member, query, self.config.execution, self.clock.now())?;
        self.enqueue(usage);
        Ok(results)
    }

    pub fn search_profiles(&self, member: MemberId, query: &SearchQuery) -> Result<SearchResults<ProfileHit>> {
        let state = self.snapshot();
        let (results, usage) =
            search::search_profiles(&state, member, query, self.config.execution, self.clock.now())?;
        self.enqueue(usage);
        Ok(results)
    }
}
