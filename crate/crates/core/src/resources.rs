//! Discussions, documents and web links, their replies, and the subject
//! associations that index them.
//!
//! Associations made at creation are `authored` and must point at CoPs the
//! author belongs to. Any member who can see a resource may later `spread`
//! it to another CoP or to a whole category. Only the author may remove an
//! association, and a resource always keeps at least one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{MemberId, ReplyId, ResourceId, SubjectId};
use crate::profiles::{MemberProfile, Scope};
use crate::taxonomy::Taxonomy;

/// Content-addressed handle of a stored attachment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub sha256: String,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Content {
    Discussion { body: String },
    Document { attachment: BlobRef },
    Weblink { url: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Discussion,
    Document,
    Weblink,
}

impl Content {
    pub fn kind(&self) -> ResourceKind {
        match self {
            Content::Discussion { .. } => ResourceKind::Discussion,
            Content::Document { .. } => ResourceKind::Document,
            Content::Weblink { .. } => ResourceKind::Weblink,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub author: MemberId,
    pub title: String,
    #[serde(flatten)]
    pub content: Content,
    pub created_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_at: Option<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub id: ReplyId,
    pub discussion: ResourceId,
    pub author: MemberId,
    pub body: String,
    pub created_at: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Authored,
    Spread,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectAssociation {
    pub resource: ResourceId,
    pub subject: SubjectId,
    pub associated_by: MemberId,
    pub origin: Origin,
    pub associated_at: Timestamp,
}

/// A resource together with its thread and its index entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEntry {
    pub resource: Resource,
    pub replies: Vec<Reply>,
    pub associations: BTreeMap<SubjectId, SubjectAssociation>,
}

impl ResourceEntry {
    pub fn id(&self) -> ResourceId {
        self.resource.id
    }

    pub fn author(&self) -> MemberId {
        self.resource.author
    }

    pub fn tagged(&self) -> impl Iterator<Item = SubjectId> + '_ {
        self.associations.keys().copied()
    }

    /// max(created_at, latest reply, latest association); drives ranking.
    pub fn last_activity(&self) -> Timestamp {
        let replies = self.replies.iter().map(|r| r.created_at);
        let assocs = self.associations.values().map(|a| a.associated_at);
        replies
            .chain(assocs)
            .fold(self.resource.created_at, Timestamp::max)
    }
}

pub fn validate_url(url: &str) -> Result<String> {
    let trimmed = url.trim();
    match url::Url::parse(trimmed) {
        Ok(parsed) if matches!(parsed.scheme(), "http" | "https") && parsed.has_host() => {
            Ok(trimmed.to_string())
        }
        _ => Err(Error::InvalidUrl(trimmed.to_string())),
    }
}

/// Checks the creation rules: non-empty title, at least one subject, and
/// every subject an active CoP the author belongs to.
pub fn check_creation(
    taxonomy: &Taxonomy,
    author: &MemberProfile,
    title: &str,
    subjects: &BTreeSet<SubjectId>,
) -> Result<()> {
    if title.trim().is_empty() {
        return Err(Error::EmptyTitle);
    }
    if subjects.is_empty() {
        return Err(Error::EmptySubjects);
    }
    let memberships = author.memberships(taxonomy, Scope::All);
    for &subject in subjects {
        taxonomy.get_active(subject)?;
        if !taxonomy.is_cop(subject)? {
            return Err(Error::NotACoP(subject));
        }
        if !memberships.contains(&subject) {
            return Err(Error::NotYourCoP(subject));
        }
    }
    Ok(())
}

/// Checks the regulation rule for removing `subject` from `entry`.
pub fn check_removal(entry: &ResourceEntry, actor: MemberId, subject: SubjectId) -> Result<()> {
    if actor != entry.author() {
        return Err(Error::NotAuthor(entry.id()));
    }
    if !entry.associations.contains_key(&subject) {
        return Err(Error::AssociationNotFound {
            resource: entry.id(),
            subject,
        });
    }
    if entry.associations.len() == 1 {
        return Err(Error::LastAssociation(entry.id()));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    entries: BTreeMap<ResourceId, ResourceEntry>,
    next_resource: u64,
    next_reply: u64,
}

impl Resources {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResourceEntry> {
        self.entries.values()
    }

    pub fn get(&self, id: ResourceId) -> Result<&ResourceEntry> {
        self.entries.get(&id).ok_or(Error::ResourceNotFound(id))
    }

    pub fn next_resource_id(&self) -> ResourceId {
        ResourceId(self.next_resource.max(1))
    }

    pub fn next_reply_id(&self) -> ReplyId {
        ReplyId(self.next_reply.max(1))
    }

    /// Number of associations pointing at `subject`.
    pub fn association_count(&self, subject: SubjectId) -> usize {
        self.entries
            .values()
            .filter(|e| e.associations.contains_key(&subject))
            .count()
    }

    pub fn references(&self, subject: SubjectId) -> bool {
        self.entries
            .values()
            .any(|e| e.associations.contains_key(&subject))
    }

    pub(crate) fn insert(&mut self, resource: Resource, associations: &[SubjectAssociation]) {
        self.next_resource = self.next_resource.max(resource.id.0 + 1);
        let associations = associations
            .iter()
            .map(|a| (a.subject, a.clone()))
            .collect();
        self.entries.insert(
            resource.id,
            ResourceEntry {
                resource,
                replies: Vec::new(),
                associations,
            },
        );
    }

    pub(crate) fn add_reply(&mut self, reply: Reply) {
        self.next_reply = self.next_reply.max(reply.id.0 + 1);
        if let Some(entry) = self.entries.get_mut(&reply.discussion) {
            let at = entry
                .replies
                .partition_point(|r| (r.created_at, r.id) <= (reply.created_at, reply.id));
            entry.replies.insert(at, reply);
        }
    }

    pub(crate) fn associate(&mut self, association: SubjectAssociation) {
        if let Some(entry) = self.entries.get_mut(&association.resource) {
            entry.associations.insert(association.subject, association);
        }
    }

    pub(crate) fn dissociate(&mut self, resource: ResourceId, subject: SubjectId) {
        if let Some(entry) = self.entries.get_mut(&resource) {
            entry.associations.remove(&subject);
        }
    }

    pub(crate) fn edit_body(&mut self, resource: ResourceId, body: &str, at: Timestamp) {
        if let Some(entry) = self.entries.get_mut(&resource) {
            if let Content::Discussion { body: current } = &mut entry.resource.content {
                *current = body.to_string();
                entry.resource.edited_at = Some(at);
            }
        }
    }

    pub(crate) fn remove(&mut self, resource: ResourceId) {
        self.entries.remove(&resource);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, ManualClock};
    use chrono::Duration;

    fn entry(author: MemberId, tags: &[u64]) -> ResourceEntry {
        let now = ManualClock::at_epoch().now();
        let id = ResourceId(1);
        ResourceEntry {
            resource: Resource {
                id,
                author,
                title: "t".into(),
                content: Content::Discussion { body: "b".into() },
                created_at: now,
                edited_at: None,
            },
            replies: Vec::new(),
            associations: tags
                .iter()
                .map(|&s| {
                    (
                        SubjectId(s),
                        SubjectAssociation {
                            resource: id,
                            subject: SubjectId(s),
                            associated_by: author,
                            origin: Origin::Authored,
                            associated_at: now,
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn removal_rules() {
        let author = MemberId(1);
        let e = entry(author, &[5, 6]);
        assert_eq!(check_removal(&e, MemberId(2), SubjectId(5)), Err(Error::NotAuthor(e.id())));
        assert!(matches!(
            check_removal(&e, author, SubjectId(7)),
            Err(Error::AssociationNotFound { .. })
        ));
        assert_eq!(check_removal(&e, author, SubjectId(5)), Ok(()));
        let single = entry(author, &[5]);
        assert_eq!(
            check_removal(&single, author, SubjectId(5)),
            Err(Error::LastAssociation(single.id()))
        );
    }

    #[test]
    fn last_activity_is_max_of_events() {
        let mut e = entry(MemberId(1), &[5]);
        let created = e.resource.created_at;
        assert_eq!(e.last_activity(), created);
        e.replies.push(Reply {
            id: ReplyId(1),
            discussion: e.id(),
            author: MemberId(2),
            body: "r".into(),
            created_at: created + Duration::hours(3),
        });
        e.associations.get_mut(&SubjectId(5)).unwrap().associated_at = created + Duration::hours(1);
        assert_eq!(e.last_activity(), created + Duration::hours(3));
    }

    #[test]
    fn url_validation() {
        assert_eq!(validate_url(" https://www.palette.org/x ").unwrap(), "https://www.palette.org/x");
        for bad in ["ftp://x.org", "not a url", "http://", "mailto:a@b.c"] {
            assert!(validate_url(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn content_serializes_with_kind_tag() {
        let e = entry(MemberId(1), &[5]);
        let json = serde_json::to_value(&e.resource).unwrap();
        assert_eq!(json["kind"], "discussion");
        assert_eq!(json["body"], "b");
        let back: Resource = serde_json::from_value(json).unwrap();
        assert_eq!(back, e.resource);
    }
}
