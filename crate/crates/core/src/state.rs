//! The complete engine state and the change records that mutate it.
//!
//! Every mutation is expressed as a [`Change`]. Operations validate against
//! the current state and emit changes; [`State::apply`] is infallible and is
//! used both live and when replaying the event log, so a restart rebuilds
//! exactly the acknowledged state.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{MemberId, ResourceId, SubjectId};
use crate::profiles::{IdentityUpdate, MemberProfile, MembershipScope, Profiles};
use crate::resources::{Origin, Reply, Resource, Resources, SubjectAssociation};
use crate::taxonomy::{Subject, Taxonomy, UsageEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Member(MemberId),
    Admin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AuditAction {
    AssociationRemoved {
        resource: ResourceId,
        subject: SubjectId,
        resource_author: MemberId,
    },
    ResourceDeleted {
        resource: ResourceId,
    },
    SubjectPurged {
        subject: SubjectId,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub at: Timestamp,
    pub actor: Actor,
    #[serde(flatten)]
    pub action: AuditAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Change {
    SubjectAdded {
        subject: Subject,
    },
    SubjectsDeprecated {
        subjects: Vec<SubjectId>,
        at: Timestamp,
    },
    SubjectPurged {
        subject: SubjectId,
        at: Timestamp,
    },
    /// Replaces an empty classification wholesale (seed import).
    TaxonomySeeded {
        taxonomy: Taxonomy,
    },
    MemberRegistered {
        profile: MemberProfile,
    },
    IdentityUpdated {
        member: MemberId,
        update: IdentityUpdate,
    },
    MembershipDeclared {
        member: MemberId,
        subject: SubjectId,
        scope: MembershipScope,
    },
    MembershipRevoked {
        member: MemberId,
        subject: SubjectId,
    },
    ResourceCreated {
        resource: Resource,
        associations: Vec<SubjectAssociation>,
    },
    BodyEdited {
        resource: ResourceId,
        body: String,
        at: Timestamp,
    },
    ResourceDeleted {
        resource: ResourceId,
        at: Timestamp,
    },
    ReplyAdded {
        reply: Reply,
    },
    AssociationAdded {
        association: SubjectAssociation,
    },
    AssociationRemoved {
        resource: ResourceId,
        subject: SubjectId,
        actor: MemberId,
        at: Timestamp,
    },
    UsageRecorded {
        event: UsageEvent,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    taxonomy: Taxonomy,
    profiles: Profiles,
    resources: Resources,
    usage: Vec<UsageEvent>,
    audit: Vec<AuditRecord>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_taxonomy(taxonomy: Taxonomy) -> Self {
        State {
            taxonomy,
            ..Self::default()
        }
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn profiles(&self) -> &Profiles {
        &self.profiles
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    /// The usage log in append order.
    pub fn usage(&self) -> &[UsageEvent] {
        &self.usage
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    /// True if an association or a profile (stale or not) points at `subject`.
    pub fn is_referenced(&self, subject: SubjectId) -> bool {
        self.resources.references(subject) || self.profiles.references(subject)
    }

    pub fn apply(&mut self, change: &Change) {
        match change {
            Change::SubjectAdded { subject } => self.taxonomy.insert(subject.clone()),
            Change::SubjectsDeprecated { subjects, at } => self.taxonomy.deprecate(subjects, *at),
            Change::SubjectPurged { subject, at } => {
                self.taxonomy.purge(*subject);
                self.audit.push(AuditRecord {
                    at: *at,
                    actor: Actor::Admin,
                    action: AuditAction::SubjectPurged { subject: *subject },
                });
            }
            Change::TaxonomySeeded { taxonomy } => self.taxonomy = taxonomy.clone(),
            Change::MemberRegistered { profile } => self.profiles.insert(profile.clone()),
            Change::IdentityUpdated { member, update } => {
                self.profiles.update_identity(*member, update)
            }
            Change::MembershipDeclared {
                member,
                subject,
                scope,
            } => self.profiles.declare(*member, *subject, *scope),
            Change::MembershipRevoked { member, subject } => {
                self.profiles.revoke(*member, *subject)
            }
            Change::ResourceCreated {
                resource,
                associations,
            } => self.resources.insert(resource.clone(), associations),
            Change::BodyEdited { resource, body, at } => {
                self.resources.edit_body(*resource, body, *at)
            }
            Change::ResourceDeleted { resource, at } => {
                self.resources.remove(*resource);
                self.audit.push(AuditRecord {
                    at: *at,
                    actor: Actor::Admin,
                    action: AuditAction::ResourceDeleted {
                        resource: *resource,
                    },
                });
            }
            Change::ReplyAdded { reply } => self.resources.add_reply(reply.clone()),
            Change::AssociationAdded { association } => {
                self.resources.associate(association.clone())
            }
            Change::AssociationRemoved {
                resource,
                subject,
                actor,
                at,
            } => {
                let resource_author = self
                    .resources
                    .get(*resource)
                    .map(|e| e.author())
                    .unwrap_or(*actor);
                self.resources.dissociate(*resource, *subject);
                self.audit.push(AuditRecord {
                    at: *at,
                    actor: Actor::Member(*actor),
                    action: AuditAction::AssociationRemoved {
                        resource: *resource,
                        subject: *subject,
                        resource_author,
                    },
                });
            }
            Change::UsageRecorded { event } => self.usage.push(event.clone()),
        }
    }

    /// Hex SHA-256 over the canonical serialization. Equal digests mean
    /// structurally equal states.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state always serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Referential integrity plus every module invariant. Names the first
    /// offending reference.
    pub fn check_integrity(&self) -> Result<()> {
        let corrupt = |what: String| Err(Error::CorruptStore(what));
        self.taxonomy
            .check_invariants()
            .map_err(|e| Error::CorruptStore(e.to_string()))?;
        let taxonomy = &self.taxonomy;

        for profile in self.profiles.iter() {
            for subject in profile.declared(crate::profiles::Scope::All) {
                if !taxonomy.contains(subject) {
                    return corrupt(format!("subject {subject} in profile of {}", profile.id));
                }
            }
            if let Some(both) = profile
                .working_context
                .intersection(&profile.secondary_interests)
                .next()
            {
                return corrupt(format!(
                    "subject {both} in both membership sets of {}",
                    profile.id
                ));
            }
        }

        let member = |id: MemberId| self.profiles.contains(id);
        for entry in self.resources.iter() {
            let rid = entry.id();
            if !member(entry.author()) {
                return corrupt(format!("member {} authoring {rid}", entry.author()));
            }
            if entry.associations.is_empty() {
                return corrupt(format!("resource {rid} has no associations"));
            }
            for (subject, assoc) in &entry.associations {
                if !taxonomy.contains(*subject) {
                    return corrupt(format!("subject {subject} in association of {rid}"));
                }
                if assoc.subject != *subject || assoc.resource != rid {
                    return corrupt(format!("association key mismatch on {rid}/{subject}"));
                }
                if !member(assoc.associated_by) {
                    return corrupt(format!(
                        "member {} associating {rid}/{subject}",
                        assoc.associated_by
                    ));
                }
                if assoc.origin == Origin::Authored && assoc.associated_by != entry.author() {
                    return corrupt(format!("authored association {rid}/{subject} by non-author"));
                }
            }
            for reply in &entry.replies {
                if reply.discussion != rid || !member(reply.author) {
                    return corrupt(format!("reply {} on {rid}", reply.id));
                }
            }
        }

        for event in &self.usage {
            if !taxonomy.contains(event.subject) {
                return corrupt(format!("subject {} in usage log", event.subject));
            }
            if !member(event.member) {
                return corrupt(format!("member {} in usage log", event.member));
            }
        }
        Ok(())
    }
}
