//! Contextualized search over resources and member profiles.
//!
//! A query is a cart of subjects, each switched on or off. Active subjects
//! are grouped by their level-1 category (the facet). A resource is a hit
//! when, for every facet, it matches at least one of that facet's subjects:
//! conjunction across facets, disjunction within one.
//!
//! Matching follows downward inheritance only. A resource tagged on a
//! category is inherited by every active descendant, so it matches a query
//! on any of them; a resource tagged on a CoP does not surface at the
//! category above it. Equivalently, a resource matches subject `s` iff it is
//! tagged with `s` or one of `s`'s ancestors, which is what the evaluator
//! computes (at most four lookups per cart subject).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{MemberId, ResourceId, SubjectId};
use crate::profiles::{MemberProfile, Scope};
use crate::resources::ResourceEntry;
use crate::state::State;
use crate::taxonomy::{Taxonomy, UsageEvent, UsageKind};

/// Below this many candidates `Execution::Auto` stays sequential.
pub const PARALLEL_THRESHOLD: usize = 256;

/// How candidate evaluation is scheduled. Without the `parallel` feature
/// every mode runs sequentially. Results are identical in every mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Execution {
    fn parallel_for(self, len: usize) -> bool {
        cfg!(feature = "parallel")
            && match self {
                Execution::Auto => len >= PARALLEL_THRESHOLD,
                Execution::Sequential => false,
                Execution::Parallel => true,
            }
    }
}

fn evaluate<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    if execution.parallel_for(items.len()) {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return items.par_iter().filter_map(f).collect();
        }
    }
    items.iter().filter_map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Resources,
    Profiles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartEntry {
    pub subject: SubjectId,
    #[serde(default = "active_default")]
    pub active: bool,
}

fn active_default() -> bool {
    true
}

impl CartEntry {
    pub fn on(subject: SubjectId) -> Self {
        CartEntry {
            subject,
            active: true,
        }
    }

    pub fn off(subject: SubjectId) -> Self {
        CartEntry {
            subject,
            active: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub target: Target,
    #[serde(default)]
    pub cart: Vec<CartEntry>,
    #[serde(default)]
    pub scope: Scope,
}

impl SearchQuery {
    pub fn resources(cart: Vec<CartEntry>, scope: Scope) -> Self {
        SearchQuery {
            target: Target::Resources,
            cart,
            scope,
        }
    }

    pub fn profiles(cart: Vec<CartEntry>, scope: Scope) -> Self {
        SearchQuery {
            target: Target::Profiles,
            cart,
            scope,
        }
    }

    pub fn active_subjects(&self) -> impl Iterator<Item = SubjectId> + '_ {
        self.cart.iter().filter(|c| c.active).map(|c| c.subject)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceHit {
    pub resource: ResourceId,
    pub title: String,
    pub matched_subjects: BTreeSet<SubjectId>,
    pub last_activity: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileHit {
    pub member: MemberId,
    pub display_name: String,
    pub matched_subjects: BTreeSet<SubjectId>,
}

/// Hits plus the query echo. `cart` keeps the caller's order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResults<H> {
    pub taxonomy_version: u64,
    pub scope: Scope,
    pub cart: Vec<CartEntry>,
    pub hits: Vec<H>,
}

/// `{a} ∪ descendants(a)` over every associated subject, deprecated ones
/// excluded.
pub fn effective_subjects(taxonomy: &Taxonomy, entry: &ResourceEntry) -> BTreeSet<SubjectId> {
    let mut out = BTreeSet::new();
    for tag in entry.tagged().filter(|t| taxonomy.is_active(*t)) {
        out.insert(tag);
        out.extend(taxonomy.descendants(tag).unwrap_or_default());
    }
    out
}

/// True iff `subject` is among the resource's effective subjects.
pub fn subject_matches(taxonomy: &Taxonomy, entry: &ResourceEntry, subject: SubjectId) -> bool {
    taxonomy.is_active(subject)
        && std::iter::once(subject)
            .chain(taxonomy.ancestor_chain(subject))
            .any(|s| entry.associations.contains_key(&s))
}

/// Authors always see their resources; anyone else sees a resource when one
/// of its effective subjects is a CoP they belong to.
///
/// `view` must be the reader's `visible_subjects(.., Scope::All)`: a CoP
/// `c` is effective for the resource iff the resource is tagged on `c` or an
/// ancestor of `c`, i.e. on a member of the view.
fn visible_with(entry: &ResourceEntry, member: MemberId, view: &BTreeSet<SubjectId>) -> bool {
    entry.author() == member || entry.tagged().any(|t| view.contains(&t))
}

pub fn visible_to(taxonomy: &Taxonomy, profile: &MemberProfile, entry: &ResourceEntry) -> bool {
    visible_with(entry, profile.id, &profile.visible_subjects(taxonomy, Scope::All))
}

/// One facet group: cart subjects sharing a level-1 category, each with its
/// self-and-ancestors match set.
type FacetGroup = Vec<(SubjectId, Vec<SubjectId>)>;

struct Prepared<'a> {
    profile: &'a MemberProfile,
    facets: Vec<FacetGroup>,
}

fn prepare<'a>(state: &'a State, member: MemberId, query: &SearchQuery, target: Target) -> Result<Prepared<'a>> {
    let taxonomy = state.taxonomy();
    let profile = state.profiles().get(member)?;
    if query.target != target {
        return Err(Error::InvalidQuery(format!(
            "query targets {:?}, expected {:?}",
            query.target, target
        )));
    }
    let mut seen = BTreeSet::new();
    for item in &query.cart {
        if !seen.insert(item.subject) {
            return Err(Error::InvalidQuery(format!(
                "subject {} appears twice in the cart",
                item.subject
            )));
        }
    }
    for item in &query.cart {
        taxonomy.get(item.subject)?;
    }
    let scoped = profile.visible_subjects(taxonomy, query.scope);
    let mut groups: BTreeMap<SubjectId, FacetGroup> = BTreeMap::new();
    for subject in query.active_subjects() {
        if !scoped.contains(&subject) {
            return Err(Error::SubjectOutOfScope(subject));
        }
        let root = taxonomy.root_of(subject)?;
        let matches = std::iter::once(subject)
            .chain(taxonomy.ancestor_chain(subject))
            .collect();
        groups.entry(root).or_default().push((subject, matches));
    }
    Ok(Prepared {
        profile,
        facets: groups.into_values().collect(),
    })
}

/// Evaluates the facet CNF for one candidate. `matches` decides a single
/// cart subject given its self-and-ancestors set. Returns the matched cart
/// subjects, or `None` if some facet is unmet.
fn match_facets(
    facets: &[FacetGroup],
    matches: impl Fn(SubjectId, &[SubjectId]) -> bool,
) -> Option<BTreeSet<SubjectId>> {
    let mut matched = BTreeSet::new();
    for group in facets {
        let mut any = false;
        for (subject, lineage) in group {
            if matches(*subject, lineage) {
                matched.insert(*subject);
                any = true;
            }
        }
        if !any {
            return None;
        }
    }
    Some(matched)
}

fn usage_for(query: &SearchQuery, member: MemberId, at: Timestamp) -> Vec<UsageEvent> {
    query
        .active_subjects()
        .map(|subject| UsageEvent {
            subject,
            member,
            kind: UsageKind::SearchSelect,
            at,
        })
        .collect()
}

/// Resource search. Returns the ordered hits and the `search_select` usage
/// events the caller should record.
pub fn search_resources(
    state: &State,
    member: MemberId,
    query: &SearchQuery,
    execution: Execution,
    now: Timestamp,
) -> Result<(SearchResults<ResourceHit>, Vec<UsageEvent>)> {
    let prepared = prepare(state, member, query, Target::Resources)?;
    let view = prepared.profile.visible_subjects(state.taxonomy(), Scope::All);
    let candidates: Vec<&ResourceEntry> = state.resources().iter().collect();
    let mut hits = evaluate(&candidates, execution, |entry| {
        if !visible_with(entry, member, &view) {
            return None;
        }
        let matched = match_facets(&prepared.facets, |_, lineage| {
            lineage.iter().any(|s| entry.associations.contains_key(s))
        })?;
        Some(ResourceHit {
            resource: entry.id(),
            title: entry.resource.title.clone(),
            matched_subjects: matched,
            last_activity: entry.last_activity(),
        })
    });
    hits.sort_by(|a, b| {
        b.last_activity
            .cmp(&a.last_activity)
            .then(a.resource.cmp(&b.resource))
    });
    Ok((
        SearchResults {
            taxonomy_version: state.taxonomy().version(),
            scope: query.scope,
            cart: query.cart.clone(),
            hits,
        },
        usage_for(query, member, now),
    ))
}

/// Profile search: a member is a hit when every facet holds a subject that
/// is one of their CoPs or an ancestor of one. The requester is excluded.
pub fn search_profiles(
    state: &State,
    member: MemberId,
    query: &SearchQuery,
    execution: Execution,
    now: Timestamp,
) -> Result<(SearchResults<ProfileHit>, Vec<UsageEvent>)> {
    let prepared = prepare(state, member, query, Target::Profiles)?;
    let taxonomy = state.taxonomy();
    let candidates: Vec<&MemberProfile> = state
        .profiles()
        .iter()
        .filter(|p| p.id != member)
        .collect();
    let mut hits = evaluate(&candidates, execution, |profile| {
        let reach = profile.visible_subjects(taxonomy, Scope::All);
        let matched = match_facets(&prepared.facets, |subject, _| reach.contains(&subject))?;
        Some(ProfileHit {
            member: profile.id,
            display_name: profile.display_name.clone(),
            matched_subjects: matched,
        })
    });
    hits.sort_by(|a, b| {
        b.matched_subjects
            .len()
            .cmp(&a.matched_subjects.len())
            .then_with(|| a.display_name.cmp(&b.display_name))
            .then(a.member.cmp(&b.member))
    });
    Ok((
        SearchResults {
            taxonomy_version: taxonomy.version(),
            scope: query.scope,
            cart: query.cart.clone(),
            hits,
        },
        usage_for(query, member, now),
    ))
}
