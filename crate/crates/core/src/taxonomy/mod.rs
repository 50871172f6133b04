//! The hierarchical classification of practice subjects.
//!
//! Subjects form a forest rooted at level-1 categories. A subject with no
//! active children is a CoP; any other active subject is a category of CoPs.
//! Subjects are never removed by evolution, only deprecated; a separate
//! purge drops unreferenced deprecated subjects.

mod prune;
mod seed;
mod usage;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{MemberId, SubjectId};

pub use prune::{prune_candidates, PrunePolicy, UsageWindow};
pub use seed::{SeedDocument, SeedRecord, SEED_FORMAT};
pub use usage::{UsageCounts, UsageEvent, UsageKind};

/// Deepest level a subject may occupy.
pub const MAX_DEPTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectStatus {
    Active,
    Deprecated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Creator {
    Seed,
    Member(MemberId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subject {
    pub id: SubjectId,
    pub label: String,
    pub parent: Option<SubjectId>,
    pub level: u32,
    pub status: SubjectStatus,
    pub created_by: Creator,
    pub created_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deprecated_at: Option<Timestamp>,
}

impl Subject {
    pub fn is_active(&self) -> bool {
        self.status == SubjectStatus::Active
    }
}

/// Trims and collapses internal whitespace. Display form of a label.
pub fn clean_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Comparison key for sibling uniqueness and ordering.
pub fn label_key(label: &str) -> String {
    clean_label(label).to_lowercase()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TaxonomyRepr", into = "TaxonomyRepr")]
pub struct Taxonomy {
    subjects: BTreeMap<SubjectId, Subject>,
    // parent (None for roots) -> children of any status
    children: BTreeMap<Option<SubjectId>, BTreeSet<SubjectId>>,
    version: u64,
    next_id: u64,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyRepr {
    version: u64,
    next_id: u64,
    subjects: Vec<Subject>,
}

impl From<TaxonomyRepr> for Taxonomy {
    fn from(repr: TaxonomyRepr) -> Self {
        let mut taxonomy = Taxonomy {
            version: repr.version,
            next_id: repr.next_id,
            ..Taxonomy::default()
        };
        for subject in repr.subjects {
            taxonomy.link(subject);
        }
        taxonomy
    }
}

impl From<Taxonomy> for TaxonomyRepr {
    fn from(taxonomy: Taxonomy) -> Self {
        TaxonomyRepr {
            version: taxonomy.version,
            next_id: taxonomy.next_id,
            subjects: taxonomy.subjects.into_values().collect(),
        }
    }
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bumped on every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// All subjects, any status, in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Subject> {
        self.subjects.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &Subject> {
        self.subjects.values().filter(|s| s.is_active())
    }

    pub fn contains(&self, id: SubjectId) -> bool {
        self.subjects.contains_key(&id)
    }

    pub fn get(&self, id: SubjectId) -> Result<&Subject> {
        self.subjects.get(&id).ok_or(Error::SubjectNotFound(id))
    }

    /// Like [`get`](Self::get) but rejects deprecated subjects.
    pub fn get_active(&self, id: SubjectId) -> Result<&Subject> {
        let subject = self.get(id)?;
        if subject.is_active() {
            Ok(subject)
        } else {
            Err(Error::DeprecatedSubject(id))
        }
    }

    pub fn is_active(&self, id: SubjectId) -> bool {
        self.subjects.get(&id).is_some_and(Subject::is_active)
    }

    fn sorted_active(&self, ids: Option<&BTreeSet<SubjectId>>) -> Vec<&Subject> {
        let mut out: Vec<&Subject> = ids
            .into_iter()
            .flatten()
            .map(|id| &self.subjects[id])
            .filter(|s| s.is_active())
            .collect();
        out.sort_by_cached_key(|s| (label_key(&s.label), s.id));
        out
    }

    /// Active level-1 categories, ordered by label then id.
    pub fn roots(&self) -> Vec<&Subject> {
        self.sorted_active(self.children.get(&None))
    }

    /// Active children of `id`, ordered by label then id.
    pub fn children(&self, id: SubjectId) -> Result<Vec<&Subject>> {
        self.get(id)?;
        Ok(self.sorted_active(self.children.get(&Some(id))))
    }

    /// Children of any status, unordered.
    pub fn all_children(&self, id: SubjectId) -> impl Iterator<Item = SubjectId> + '_ {
        self.children.get(&Some(id)).into_iter().flatten().copied()
    }

    pub fn has_active_children(&self, id: SubjectId) -> bool {
        self.all_children(id).any(|c| self.is_active(c))
    }

    /// Root-to-`id` navigation path; its length equals the subject's level.
    pub fn path(&self, id: SubjectId) -> Result<Vec<&Subject>> {
        let mut path = vec![self.get(id)?];
        while let Some(parent) = path.last().and_then(|s| s.parent) {
            path.push(&self.subjects[&parent]);
        }
        path.reverse();
        Ok(path)
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestor_chain(&self, id: SubjectId) -> impl Iterator<Item = SubjectId> + '_ {
        let mut cursor = self.subjects.get(&id).and_then(|s| s.parent);
        std::iter::from_fn(move || {
            let current = cursor?;
            cursor = self.subjects.get(&current).and_then(|s| s.parent);
            Some(current)
        })
    }

    pub fn ancestors(&self, id: SubjectId) -> Result<BTreeSet<SubjectId>> {
        self.get(id)?;
        Ok(self.ancestor_chain(id).collect())
    }

    /// Active strict descendants of `id`.
    pub fn descendants(&self, id: SubjectId) -> Result<BTreeSet<SubjectId>> {
        self.get(id)?;
        let mut out = BTreeSet::new();
        self.collect_active_descendants(id, &mut out);
        Ok(out)
    }

    fn collect_active_descendants(&self, id: SubjectId, out: &mut BTreeSet<SubjectId>) {
        for child in self.all_children(id) {
            if self.is_active(child) && out.insert(child) {
                self.collect_active_descendants(child, out);
            }
        }
    }

    /// The level-1 category above (or equal to) `id`: the facet it belongs to.
    pub fn root_of(&self, id: SubjectId) -> Result<SubjectId> {
        self.get(id)?;
        Ok(self.ancestor_chain(id).last().unwrap_or(id))
    }

    /// True iff `id` is active and has no active children.
    pub fn is_cop(&self, id: SubjectId) -> Result<bool> {
        let subject = self.get(id)?;
        Ok(subject.is_active() && !self.has_active_children(id))
    }

    fn find_active_sibling(&self, parent: Option<SubjectId>, key: &str) -> Option<&Subject> {
        self.children
            .get(&parent)
            .into_iter()
            .flatten()
            .map(|id| &self.subjects[id])
            .find(|s| s.is_active() && label_key(&s.label) == key)
    }

    /// Active child of `parent` (or root) with this label, if any.
    pub fn find_child(&self, parent: Option<SubjectId>, label: &str) -> Option<&Subject> {
        self.find_active_sibling(parent, &label_key(label))
    }

    /// Validates a new subject and returns it without inserting it.
    pub fn plan_subject(
        &self,
        label: &str,
        parent: Option<SubjectId>,
        creator: Creator,
        now: Timestamp,
        allow_member_roots: bool,
    ) -> Result<Subject> {
        let label = clean_label(label);
        if label.is_empty() {
            return Err(Error::InvalidLabel);
        }
        let level = match parent {
            None => {
                if matches!(creator, Creator::Member(_)) && !allow_member_roots {
                    return Err(Error::MemberRootsDisallowed);
                }
                1
            }
            Some(pid) => {
                let parent = self.subjects.get(&pid).ok_or(Error::ParentNotFound(pid))?;
                if !parent.is_active() {
                    return Err(Error::ParentDeprecated(pid));
                }
                parent.level + 1
            }
        };
        if level > MAX_DEPTH {
            return Err(Error::DepthExceeded { label, level });
        }
        if self.find_active_sibling(parent, &label_key(&label)).is_some() {
            return Err(Error::DuplicateSibling { label });
        }
        Ok(Subject {
            id: SubjectId(self.next_id.max(1)),
            label,
            parent,
            level,
            status: SubjectStatus::Active,
            created_by: creator,
            created_at: now,
            deprecated_at: None,
        })
    }

    fn link(&mut self, subject: Subject) {
        self.next_id = self.next_id.max(subject.id.0 + 1);
        self.children
            .entry(subject.parent)
            .or_default()
            .insert(subject.id);
        self.subjects.insert(subject.id, subject);
    }

    pub(crate) fn insert(&mut self, subject: Subject) {
        self.link(subject);
        self.version += 1;
    }

    pub(crate) fn deprecate(&mut self, ids: &[SubjectId], at: Timestamp) {
        for id in ids {
            if let Some(subject) = self.subjects.get_mut(id) {
                subject.status = SubjectStatus::Deprecated;
                subject.deprecated_at = Some(at);
            }
        }
        self.version += 1;
    }

    pub(crate) fn purge(&mut self, id: SubjectId) {
        if let Some(subject) = self.subjects.remove(&id) {
            if let Some(siblings) = self.children.get_mut(&subject.parent) {
                siblings.remove(&id);
            }
            self.children.remove(&Some(id));
        }
        self.version += 1;
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<()> {
        let violation = |s: &Subject, reason: &str| Error::InvariantViolation {
            subject: format!("{} ({})", s.label, s.id),
            reason: reason.to_string(),
        };
        let mut keys: BTreeSet<(Option<SubjectId>, String)> = BTreeSet::new();
        for s in self.subjects.values() {
            if s.id.0 >= self.next_id {
                return Err(violation(s, "id not below the allocation counter"));
            }
            match s.parent {
                None if s.level != 1 => return Err(violation(s, "root not at level 1")),
                None => {}
                Some(pid) => {
                    let parent = self
                        .subjects
                        .get(&pid)
                        .ok_or_else(|| violation(s, "dangling parent"))?;
                    if s.level != parent.level + 1 {
                        return Err(violation(s, "level is not parent level + 1"));
                    }
                    if s.is_active() && !parent.is_active() {
                        return Err(violation(s, "active subject under a deprecated parent"));
                    }
                }
            }
            if s.level > MAX_DEPTH {
                return Err(violation(s, "deeper than 4 levels"));
            }
            if s.is_active() && !keys.insert((s.parent, label_key(&s.label))) {
                return Err(violation(s, "duplicate sibling label"));
            }
        }
        Ok(())
    }
}
