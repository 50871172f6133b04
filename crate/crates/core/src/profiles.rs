//! Member identity and CoP memberships.
//!
//! A profile holds two disjoint sets of CoPs: the working context and the
//! secondary interests. A declared CoP that was later deprecated, or that
//! gained children and became a category, is *stale*: it stays in the raw
//! set (so pruning never removes it) but no longer counts as a membership.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{MemberId, SubjectId};
use crate::taxonomy::Taxonomy;

/// One of the two membership sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipScope {
    WorkingContext,
    SecondaryInterests,
}

impl MembershipScope {
    pub fn other(self) -> Self {
        match self {
            MembershipScope::WorkingContext => MembershipScope::SecondaryInterests,
            MembershipScope::SecondaryInterests => MembershipScope::WorkingContext,
        }
    }
}

/// Filter over a profile's memberships.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    WorkingContext,
    SecondaryInterests,
    #[default]
    All,
}

impl Scope {
    pub fn includes(self, set: MembershipScope) -> bool {
        match self {
            Scope::All => true,
            Scope::WorkingContext => set == MembershipScope::WorkingContext,
            Scope::SecondaryInterests => set == MembershipScope::SecondaryInterests,
        }
    }
}

impl From<MembershipScope> for Scope {
    fn from(scope: MembershipScope) -> Self {
        match scope {
            MembershipScope::WorkingContext => Scope::WorkingContext,
            MembershipScope::SecondaryInterests => Scope::SecondaryInterests,
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "working_context" | "working" => Ok(Scope::WorkingContext),
            "secondary_interests" | "secondary" => Ok(Scope::SecondaryInterests),
            "all" => Ok(Scope::All),
            other => Err(Error::InvalidQuery(format!("unknown scope `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberProfile {
    pub id: MemberId,
    pub display_name: String,
    pub email: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biography: Option<String>,
    pub working_context: BTreeSet<SubjectId>,
    pub secondary_interests: BTreeSet<SubjectId>,
    pub created_at: Timestamp,
}

impl MemberProfile {
    pub fn set(&self, scope: MembershipScope) -> &BTreeSet<SubjectId> {
        match scope {
            MembershipScope::WorkingContext => &self.working_context,
            MembershipScope::SecondaryInterests => &self.secondary_interests,
        }
    }

    fn set_mut(&mut self, scope: MembershipScope) -> &mut BTreeSet<SubjectId> {
        match scope {
            MembershipScope::WorkingContext => &mut self.working_context,
            MembershipScope::SecondaryInterests => &mut self.secondary_interests,
        }
    }

    /// Which set holds `subject`, if any.
    pub fn scope_of(&self, subject: SubjectId) -> Option<MembershipScope> {
        if self.working_context.contains(&subject) {
            Some(MembershipScope::WorkingContext)
        } else if self.secondary_interests.contains(&subject) {
            Some(MembershipScope::SecondaryInterests)
        } else {
            None
        }
    }

    /// Declared subjects in `scope`, stale ones included.
    pub fn declared(&self, scope: Scope) -> impl Iterator<Item = SubjectId> + '_ {
        let working = scope
            .includes(MembershipScope::WorkingContext)
            .then_some(&self.working_context);
        let secondary = scope
            .includes(MembershipScope::SecondaryInterests)
            .then_some(&self.secondary_interests);
        working.into_iter().chain(secondary).flatten().copied()
    }

    /// Live memberships in `scope`: declared subjects that are still CoPs.
    pub fn memberships(&self, taxonomy: &Taxonomy, scope: Scope) -> BTreeSet<SubjectId> {
        self.declared(scope)
            .filter(|s| taxonomy.is_cop(*s).unwrap_or(false))
            .collect()
    }

    /// Declared subjects that are no longer CoPs and await re-declaration.
    pub fn stale_memberships(&self, taxonomy: &Taxonomy) -> BTreeSet<SubjectId> {
        self.declared(Scope::All)
            .filter(|s| !taxonomy.is_cop(*s).unwrap_or(false))
            .collect()
    }

    /// The sub-forest of the classification spanning the live memberships in
    /// `scope`: each CoP together with all of its ancestors.
    pub fn visible_subjects(&self, taxonomy: &Taxonomy, scope: Scope) -> BTreeSet<SubjectId> {
        let mut out = BTreeSet::new();
        for cop in self.memberships(taxonomy, scope) {
            out.insert(cop);
            out.extend(taxonomy.ancestor_chain(cop));
        }
        out
    }
}

/// Identity fields a member may edit. `None` leaves a field unchanged; an
/// empty string clears an optional field.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityUpdate {
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub biography: Option<String>,
}

pub fn normalize_email(email: &str) -> String {
    email.trim().to_lowercase()
}

pub fn is_valid_email(email: &str) -> bool {
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && !email.chars().any(char::is_whitespace)
        && domain.contains('.')
        && domain.split('.').all(|part| !part.is_empty())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ProfilesRepr", into = "ProfilesRepr")]
pub struct Profiles {
    members: BTreeMap<MemberId, MemberProfile>,
    emails: BTreeMap<String, MemberId>,
    next_id: u64,
}

#[derive(Serialize, Deserialize)]
struct ProfilesRepr {
    next_id: u64,
    members: Vec<MemberProfile>,
}

impl From<ProfilesRepr> for Profiles {
    fn from(repr: ProfilesRepr) -> Self {
        let mut profiles = Profiles {
            next_id: repr.next_id,
            ..Profiles::default()
        };
        for member in repr.members {
            profiles.link(member);
        }
        profiles
    }
}

impl From<Profiles> for ProfilesRepr {
    fn from(profiles: Profiles) -> Self {
        ProfilesRepr {
            next_id: profiles.next_id,
            members: profiles.members.into_values().collect(),
        }
    }
}

impl Profiles {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MemberProfile> {
        self.members.values()
    }

    pub fn contains(&self, id: MemberId) -> bool {
        self.members.contains_key(&id)
    }

    pub fn get(&self, id: MemberId) -> Result<&MemberProfile> {
        self.members.get(&id).ok_or(Error::MemberNotFound(id))
    }

    pub fn by_email(&self, email: &str) -> Option<&MemberProfile> {
        self.emails
            .get(&normalize_email(email))
            .map(|id| &self.members[id])
    }

    /// True if any profile declares `subject`, stale or not.
    pub fn references(&self, subject: SubjectId) -> bool {
        self.members
            .values()
            .any(|p| p.scope_of(subject).is_some())
    }

    pub fn plan_register(
        &self,
        display_name: &str,
        email: &str,
        now: Timestamp,
    ) -> Result<MemberProfile> {
        let display_name = display_name.trim();
        if display_name.is_empty() {
            return Err(Error::EmptyDisplayName);
        }
        let email = normalize_email(email);
        if !is_valid_email(&email) {
            return Err(Error::InvalidEmail(email));
        }
        if self.emails.contains_key(&email) {
            return Err(Error::DuplicateEmail(email));
        }
        Ok(MemberProfile {
            id: MemberId(self.next_id.max(1)),
            display_name: display_name.to_string(),
            email,
            country: None,
            biography: None,
            working_context: BTreeSet::new(),
            secondary_interests: BTreeSet::new(),
            created_at: now,
        })
    }

    /// Validates a declaration. `Ok(false)` means it is already in place.
    pub fn check_declare(
        &self,
        taxonomy: &Taxonomy,
        member: MemberId,
        subject: SubjectId,
        scope: MembershipScope,
    ) -> Result<bool> {
        let profile = self.get(member)?;
        taxonomy.get_active(subject)?;
        if !taxonomy.is_cop(subject)? {
            return Err(Error::NotACoP(subject));
        }
        match profile.scope_of(subject) {
            Some(held) if held == scope => Ok(false),
            Some(_) => Err(Error::ScopeConflict(subject)),
            None => Ok(true),
        }
    }

    pub fn check_revoke(&self, member: MemberId, subject: SubjectId) -> Result<MembershipScope> {
        self.get(member)?
            .scope_of(subject)
            .ok_or(Error::NotAMember(subject))
    }

    fn link(&mut self, profile: MemberProfile) {
        self.next_id = self.next_id.max(profile.id.0 + 1);
        self.emails.insert(profile.email.clone(), profile.id);
        self.members.insert(profile.id, profile);
    }

    pub(crate) fn insert(&mut self, profile: MemberProfile) {
        self.link(profile);
    }

    pub(crate) fn declare(&mut self, member: MemberId, subject: SubjectId, scope: MembershipScope) {
        if let Some(profile) = self.members.get_mut(&member) {
            profile.set_mut(scope.other()).remove(&subject);
            profile.set_mut(scope).insert(subject);
        }
    }

    pub(crate) fn revoke(&mut self, member: MemberId, subject: SubjectId) {
        if let Some(profile) = self.members.get_mut(&member) {
            profile.working_context.remove(&subject);
            profile.secondary_interests.remove(&subject);
        }
    }

    pub(crate) fn update_identity(&mut self, member: MemberId, update: &IdentityUpdate) {
        let Some(profile) = self.members.get_mut(&member) else {
            return;
        };
        if let Some(name) = &update.display_name {
            profile.display_name = name.trim().to_string();
        }
        let optional = |value: &str| {
            let value = value.trim();
            (!value.is_empty()).then(|| value.to_string())
        };
        if let Some(country) = &update.country {
            profile.country = optional(country);
        }
        if let Some(bio) = &update.biography {
            profile.biography = optional(bio);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, ManualClock};
    use crate::taxonomy::{Creator, SeedDocument};

    fn now() -> Timestamp {
        ManualClock::at_epoch().now()
    }

    fn setup() -> (Taxonomy, Profiles) {
        let doc = SeedDocument::from_json(crate::TUTORING_SEED).unwrap();
        (Taxonomy::from_seed(&doc, now()).unwrap(), Profiles::default())
    }

    fn cop(t: &Taxonomy, parent: &str, label: &str) -> SubjectId {
        let p = t
            .iter()
            .find(|s| s.label == parent)
            .map(|s| s.id)
            .unwrap();
        t.find_child(Some(p), label).unwrap().id
    }

    fn register(p: &mut Profiles, name: &str, email: &str) -> Result<MemberProfile> {
        let profile = p.plan_register(name, email, now())?;
        p.insert(profile.clone());
        Ok(profile)
    }

    #[test]
    fn register_and_duplicates() {
        let (_, mut p) = setup();
        let t1 = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap();
        assert!(t1.working_context.is_empty() && t1.secondary_interests.is_empty());
        assert_eq!(
            register(&mut p, "Again", "T1@Univ-A.fr").unwrap_err(),
            Error::DuplicateEmail("t1@univ-a.fr".into())
        );
        assert!(matches!(
            register(&mut p, "x", "not-an-email"),
            Err(Error::InvalidEmail(_))
        ));
        assert_eq!(register(&mut p, " ", "a@b.c"), Err(Error::EmptyDisplayName));
        assert_eq!(p.by_email(" t1@UNIV-a.fr ").unwrap().id, t1.id);
    }

    #[test]
    fn forty_two_distinct_members() {
        let (_, mut p) = setup();
        let ids: BTreeSet<_> = (0..42)
            .map(|i| register(&mut p, &format!("Tutor {i}"), &format!("t{i}@x.org")).unwrap().id)
            .collect();
        assert_eq!(ids.len(), 42);
    }

    #[test]
    fn email_syntax() {
        for ok in ["a@b.c", "first.last@univ-a.fr"] {
            assert!(is_valid_email(ok), "{ok}");
        }
        for bad in ["", "a@", "@b.c", "a@b", "a@@b.c", "a b@c.d", "a@b..c"] {
            assert!(!is_valid_email(bad), "{bad}");
        }
    }

    #[test]
    fn declaration_rules() {
        let (t, mut p) = setup();
        let m = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap().id;
        let collective = cop(&t, "activity context", "collective activities");
        let discipline = t.find_child(None, "discipline").unwrap().id;
        assert_eq!(
            p.check_declare(&t, m, discipline, MembershipScope::WorkingContext),
            Err(Error::NotACoP(discipline))
        );
        assert_eq!(
            p.check_declare(&t, m, collective, MembershipScope::WorkingContext),
            Ok(true)
        );
        p.declare(m, collective, MembershipScope::WorkingContext);
        assert_eq!(
            p.check_declare(&t, m, collective, MembershipScope::WorkingContext),
            Ok(false)
        );
        assert_eq!(
            p.check_declare(&t, m, collective, MembershipScope::SecondaryInterests),
            Err(Error::ScopeConflict(collective))
        );
        assert_eq!(
            p.check_declare(&t, MemberId(99), collective, MembershipScope::WorkingContext),
            Err(Error::MemberNotFound(MemberId(99)))
        );
        assert_eq!(
            p.check_declare(&t, m, SubjectId(999), MembershipScope::WorkingContext),
            Err(Error::SubjectNotFound(SubjectId(999)))
        );
    }

    #[test]
    fn revoke_is_inverse_of_declare() {
        let (t, mut p) = setup();
        let m = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap().id;
        let before = p.get(m).unwrap().clone();
        let courses = cop(&t, "learning situation", "courses");
        assert_eq!(p.check_revoke(m, courses), Err(Error::NotAMember(courses)));
        p.declare(m, courses, MembershipScope::SecondaryInterests);
        assert_eq!(
            p.check_revoke(m, courses),
            Ok(MembershipScope::SecondaryInterests)
        );
        p.revoke(m, courses);
        assert_eq!(p.get(m).unwrap(), &before);
        assert!(t.is_active(courses));
    }

    #[test]
    fn visible_subjects_span_ancestors() {
        let (t, mut p) = setup();
        let m = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap().id;
        let ua = cop(&t, "universities", "University A");
        let ub = cop(&t, "universities", "University B");
        let courses = cop(&t, "learning situation", "courses");
        p.declare(m, ua, MembershipScope::WorkingContext);
        p.declare(m, courses, MembershipScope::SecondaryInterests);
        let profile = p.get(m).unwrap();
        let working = profile.visible_subjects(&t, Scope::WorkingContext);
        let universities = t.get(ua).unwrap().parent.unwrap();
        let institution = t.get(universities).unwrap().parent.unwrap();
        assert_eq!(working, BTreeSet::from([ua, universities, institution]));
        assert!(!working.contains(&ub));
        let all = profile.visible_subjects(&t, Scope::All);
        let secondary = profile.visible_subjects(&t, Scope::SecondaryInterests);
        assert_eq!(all, working.union(&secondary).copied().collect());
    }

    #[test]
    fn membership_goes_stale_when_leaf_becomes_category() {
        let (mut t, mut p) = setup();
        let m = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap().id;
        let ua = cop(&t, "universities", "University A");
        p.declare(m, ua, MembershipScope::WorkingContext);
        let child = t
            .plan_subject("industrial engineering department", Some(ua), Creator::Member(m), now(), false)
            .unwrap();
        t.insert(child);
        let profile = p.get(m).unwrap();
        assert!(profile.memberships(&t, Scope::All).is_empty());
        assert_eq!(profile.stale_memberships(&t), BTreeSet::from([ua]));
        assert!(profile.visible_subjects(&t, Scope::All).is_empty());
        assert!(p.references(ua));
    }

    #[test]
    fn identity_update() {
        let (_, mut p) = setup();
        let m = register(&mut p, "Tutor 1", "t1@univ-a.fr").unwrap().id;
        p.update_identity(
            m,
            &IdentityUpdate {
                country: Some("France".into()),
                ..Default::default()
            },
        );
        assert_eq!(p.get(m).unwrap().country.as_deref(), Some("France"));
        p.update_identity(
            m,
            &IdentityUpdate {
                country: Some("".into()),
                ..Default::default()
            },
        );
        assert_eq!(p.get(m).unwrap().country, None);
    }
}
