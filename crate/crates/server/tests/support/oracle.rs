//! Brute-force evaluators written straight from the definitions, sharing no
//! code with the engine beyond its plain data types.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use icp_core::taxonomy::Creator;
use icp_core::{
    CartEntry, MemberId, MemberProfile, ProfileHit, PrunePolicy, ResourceEntry, ResourceHit, Scope, SearchQuery,
    State, SubjectId, Target, Timestamp, UsageWindow,
};

pub struct Oracle<'a> {
    state: &'a State,
    parent: BTreeMap<SubjectId, Option<SubjectId>>,
    active: BTreeSet<SubjectId>,
}

impl<'a> Oracle<'a> {
    pub fn new(state: &'a State) -> Self {
        let mut parent = BTreeMap::new();
        let mut active = BTreeSet::new();
        for s in state.taxonomy().iter() {
            parent.insert(s.id, s.parent);
            if s.is_active() {
                active.insert(s.id);
            }
        }
        Oracle { state, parent, active }
    }

    /// Parent, grandparent, ... up to the root.
    pub fn ancestors(&self, s: SubjectId) -> Vec<SubjectId> {
        let mut out = Vec::new();
        let mut at = self.parent.get(&s).copied().flatten();
        while let Some(p) = at {
            out.push(p);
            at = self.parent.get(&p).copied().flatten();
        }
        out
    }

    pub fn root(&self, s: SubjectId) -> SubjectId {
        self.ancestors(s).last().copied().unwrap_or(s)
    }

    pub fn is_active(&self, s: SubjectId) -> bool {
        self.active.contains(&s)
    }

    /// An active subject with no active child.
    pub fn is_cop(&self, s: SubjectId) -> bool {
        self.is_active(s) && !self.active.iter().any(|t| self.parent[t] == Some(s))
    }

    pub fn cops(&self) -> Vec<SubjectId> {
        self.active.iter().copied().filter(|s| self.is_cop(*s)).collect()
    }

    pub fn active_subjects(&self) -> Vec<SubjectId> {
        self.active.iter().copied().collect()
    }

    fn declared(profile: &MemberProfile, scope: Scope) -> BTreeSet<SubjectId> {
        match scope {
            Scope::WorkingContext => profile.working_context.clone(),
            Scope::SecondaryInterests => profile.secondary_interests.clone(),
            Scope::All => profile
                .working_context
                .union(&profile.secondary_interests)
                .copied()
                .collect(),
        }
    }

    pub fn live_cops(&self, profile: &MemberProfile, scope: Scope) -> BTreeSet<SubjectId> {
        Self::declared(profile, scope)
            .into_iter()
            .filter(|s| self.is_cop(*s))
            .collect()
    }

    /// Live CoPs in scope and all their ancestors.
    pub fn view(&self, profile: &MemberProfile, scope: Scope) -> BTreeSet<SubjectId> {
        let mut out = BTreeSet::new();
        for cop in self.live_cops(profile, scope) {
            out.insert(cop);
            out.extend(self.ancestors(cop));
        }
        out
    }

    /// Every active subject equal to or below an active tag.
    pub fn effective(&self, entry: &ResourceEntry) -> BTreeSet<SubjectId> {
        let tags: BTreeSet<SubjectId> = entry
            .associations
            .keys()
            .copied()
            .filter(|t| self.is_active(*t))
            .collect();
        self.active
            .iter()
            .copied()
            .filter(|t| tags.contains(t) || self.ancestors(*t).iter().any(|a| tags.contains(a)))
            .collect()
    }

    pub fn visible(&self, profile: &MemberProfile, entry: &ResourceEntry) -> bool {
        if entry.resource.author == profile.id {
            return true;
        }
        let cops = self.live_cops(profile, Scope::All);
        self.effective(entry).iter().any(|s| cops.contains(s))
    }

    pub fn last_activity(entry: &ResourceEntry) -> Timestamp {
        let mut latest = entry.resource.created_at;
        for r in &entry.replies {
            latest = latest.max(r.created_at);
        }
        for a in entry.associations.values() {
            latest = latest.max(a.associated_at);
        }
        latest
    }

    fn profile(&self, member: MemberId) -> Option<&MemberProfile> {
        self.state.profiles().iter().find(|p| p.id == member)
    }

    /// Validates the cart and returns the active subjects grouped by facet.
    fn facets(
        &self,
        requester: &MemberProfile,
        query: &SearchQuery,
        target: Target,
    ) -> Result<Vec<Vec<SubjectId>>, &'static str> {
        if query.target != target {
            return Err("InvalidQuery");
        }
        let subjects: Vec<SubjectId> = query.cart.iter().map(|c| c.subject).collect();
        let distinct: BTreeSet<_> = subjects.iter().collect();
        if distinct.len() != subjects.len() {
            return Err("InvalidQuery");
        }
        if subjects.iter().any(|s| !self.parent.contains_key(s)) {
            return Err("SubjectNotFound");
        }
        let view = self.view(requester, query.scope);
        let active: Vec<SubjectId> = query
            .cart
            .iter()
            .filter(|c: &&CartEntry| c.active)
            .map(|c| c.subject)
            .collect();
        if active.iter().any(|s| !view.contains(s)) {
            return Err("SubjectOutOfScope");
        }
        let mut groups: BTreeMap<SubjectId, Vec<SubjectId>> = BTreeMap::new();
        for s in active {
            groups.entry(self.root(s)).or_default().push(s);
        }
        Ok(groups.into_values().collect())
    }

    /// Facet CNF: every group contributes at least one subject in `set`.
    fn cnf(facets: &[Vec<SubjectId>], set: &BTreeSet<SubjectId>) -> Option<BTreeSet<SubjectId>> {
        let mut matched = BTreeSet::new();
        for group in facets {
            let hit: Vec<_> = group.iter().filter(|s| set.contains(s)).collect();
            if hit.is_empty() {
                return None;
            }
            matched.extend(hit);
        }
        Some(matched)
    }

    pub fn resources(&self, member: MemberId, query: &SearchQuery) -> Result<Vec<ResourceHit>, &'static str> {
        let requester = self.profile(member).ok_or("MemberNotFound")?;
        let facets = self.facets(requester, query, Target::Resources)?;
        let mut hits = Vec::new();
        for entry in self.state.resources().iter() {
            if !self.visible(requester, entry) {
                continue;
            }
            if let Some(matched) = Self::cnf(&facets, &self.effective(entry)) {
                hits.push(ResourceHit {
                    resource: entry.resource.id,
                    title: entry.resource.title.clone(),
                    matched_subjects: matched,
                    last_activity: Self::last_activity(entry),
                });
            }
        }
        hits.sort_by_key(|h| (Reverse(h.last_activity), h.resource));
        Ok(hits)
    }

    pub fn profiles(&self, member: MemberId, query: &SearchQuery) -> Result<Vec<ProfileHit>, &'static str> {
        let requester = self.profile(member).ok_or("MemberNotFound")?;
        let facets = self.facets(requester, query, Target::Profiles)?;
        let mut hits = Vec::new();
        for profile in self.state.profiles().iter() {
            if profile.id == member {
                continue;
            }
            if let Some(matched) = Self::cnf(&facets, &self.view(profile, Scope::All)) {
                hits.push(ProfileHit {
                    member: profile.id,
                    display_name: profile.display_name.clone(),
                    matched_subjects: matched,
                });
            }
        }
        hits.sort_by(|a, b| {
            (Reverse(a.matched_subjects.len()), &a.display_name, a.member).cmp(&(
                Reverse(b.matched_subjects.len()),
                &b.display_name,
                b.member,
            ))
        });
        Ok(hits)
    }

    fn referenced(&self, s: SubjectId) -> bool {
        self.state
            .resources()
            .iter()
            .any(|e| e.associations.contains_key(&s))
            || self
                .state
                .profiles()
                .iter()
                .any(|p| p.working_context.contains(&s) || p.secondary_interests.contains(&s))
    }

    fn used(&self, s: SubjectId, now: Timestamp, window: UsageWindow) -> bool {
        self.state.usage().iter().any(|e| {
            e.subject == s
                && e.at <= now
                && match window {
                    UsageWindow::Lifetime => true,
                    UsageWindow::LastDays(d) => e.at >= now - Duration::days(d.into()),
                }
        })
    }

    /// Repeated scans of the six prune conditions until nothing changes.
    pub fn prune(&self, now: Timestamp, policy: &PrunePolicy) -> BTreeSet<SubjectId> {
        let min_age = Duration::days(policy.min_age_days.into());
        let mut pruned = BTreeSet::new();
        loop {
            let round: Vec<SubjectId> = self
                .state
                .taxonomy()
                .iter()
                .filter(|s| s.is_active() && !pruned.contains(&s.id))
                .filter(|s| matches!(s.created_by, Creator::Member(_)))
                .filter(|s| now - s.created_at > min_age)
                .filter(|s| !self.used(s.id, now, policy.usage_window))
                .filter(|s| !self.referenced(s.id))
                .filter(|s| {
                    !self
                        .active
                        .iter()
                        .any(|t| self.parent[t] == Some(s.id) && !pruned.contains(t))
                })
                .map(|s| s.id)
                .collect();
            if round.is_empty() {
                return pruned;
            }
            pruned.extend(round);
        }
    }
}
