//! Random but reproducible states and operation sequences.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::Duration;
use icp_core::taxonomy::SeedRecord;
use icp_core::{
    CartEntry, Engine, EngineConfig, Execution, IdentityUpdate, ManualClock, MemberId, MembershipScope,
    PrunePolicy, ResourceId, Scope, SearchQuery, SeedDocument, State, SubjectId, Target, UsageEvent, UsageKind,
    UsageWindow,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::Oracle;

pub const MAX_SUBJECTS: usize = 30;
pub const MAX_MEMBERS: usize = 10;
pub const MAX_RESOURCES: usize = 50;
pub const MAX_ASSOCIATIONS: usize = 120;

const WORDS: &[&str] = &[
    "courses", "projects", "labs", "mechanics", "networks", "islands", "review", "mentoring", "uplands",
    "archives", "seminars", "energy",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let w = WORDS.choose(rng).unwrap();
    match rng.random_range(0..3) {
        0 => w.to_string(),
        1 => w.to_uppercase(),
        _ => format!("{w} {}", rng.random_range(0..4)),
    }
}

/// A random forest of `n` subjects at most four levels deep.
pub fn random_seed(rng: &mut ChaCha8Rng, n: usize) -> SeedDocument {
    struct Node {
        label: String,
        parent: Option<usize>,
        level: u32,
    }
    let mut nodes: Vec<Node> = Vec::new();
    for i in 0..n.max(1) {
        let roots = nodes.iter().filter(|x| x.parent.is_none()).count();
        let open: Vec<usize> = (0..nodes.len()).filter(|&j| nodes[j].level < 4).collect();
        let parent = if i == 0 || (roots < 5 && rng.random_bool(0.2)) || open.is_empty() {
            None
        } else {
            Some(*open.choose(rng).unwrap())
        };
        let taken: BTreeSet<String> = nodes
            .iter()
            .filter(|x| x.parent == parent)
            .map(|x| x.label.trim().to_lowercase())
            .collect();
        let mut label = word(rng);
        while taken.contains(&label.trim().to_lowercase()) {
            label = format!("{label} {i}");
        }
        let level = parent.map_or(1, |p| nodes[p].level + 1);
        nodes.push(Node { label, parent, level });
    }
    fn build(nodes: &[Node], parent: Option<usize>) -> Vec<SeedRecord> {
        (0..nodes.len())
            .filter(|&j| nodes[j].parent == parent)
            .map(|j| SeedRecord {
                id: None,
                label: nodes[j].label.clone(),
                parent_label_path: Vec::new(),
                children: build(nodes, Some(j)),
            })
            .collect()
    }
    SeedDocument {
        format: None,
        subjects: build(&nodes, None),
    }
}

/// One externally triggered mutation or read, chosen against a state.
#[derive(Clone, Debug)]
pub enum Op {
    Register { name: String, email: String },
    AddSubject { member: MemberId, parent: Option<SubjectId>, label: String },
    Declare { member: MemberId, subject: SubjectId, scope: MembershipScope },
    Revoke { member: MemberId, subject: SubjectId },
    Identity { member: MemberId, name: String },
    Discussion { author: MemberId, title: String, subjects: BTreeSet<SubjectId> },
    Weblink { author: MemberId, url: String, subjects: BTreeSet<SubjectId> },
    Document { author: MemberId, bytes: Vec<u8>, subjects: BTreeSet<SubjectId> },
    Reply { author: MemberId, resource: ResourceId, body: String },
    Edit { actor: MemberId, resource: ResourceId, body: String },
    Spread { member: MemberId, resource: ResourceId, subject: SubjectId },
    Remove { actor: MemberId, resource: ResourceId, subject: SubjectId },
    Consult { member: MemberId, resource: ResourceId },
    Search { member: MemberId, query: SearchQuery },
    Usage { event: UsageEvent },
    Prune { ahead_days: i64, policy: PrunePolicy },
    Delete { resource: ResourceId },
    Advance { minutes: i64 },
}

pub fn random_scope(rng: &mut ChaCha8Rng) -> Scope {
    *[Scope::WorkingContext, Scope::SecondaryInterests, Scope::All]
        .choose(rng)
        .unwrap()
}

/// A cart mostly drawn from `view`, with the odd foreign subject.
pub fn random_cart(
    rng: &mut ChaCha8Rng,
    view: &BTreeSet<SubjectId>,
    all: &[SubjectId],
    max: usize,
    stray: f64,
) -> Vec<CartEntry> {
    let view: Vec<SubjectId> = view.iter().copied().collect();
    let k = rng.random_range(0..=max);
    let mut cart: Vec<CartEntry> = Vec::new();
    for _ in 0..k {
        let pool = if rng.random_bool(stray) { all } else { &view };
        let Some(&s) = pool.choose(rng) else { continue };
        if cart.iter().any(|c| c.subject == s) {
            continue;
        }
        cart.push(CartEntry {
            subject: s,
            active: rng.random_bool(0.75),
        });
    }
    cart
}

/// Picks a plausible operation for `state`, respecting the size limits.
pub fn choose(rng: &mut ChaCha8Rng, state: &State, counter: &mut u64) -> Op {
    *counter += 1;
    let n = *counter;
    let o = Oracle::new(state);
    let members: Vec<MemberId> = state.profiles().iter().map(|p| p.id).collect();
    let all: Vec<SubjectId> = state.taxonomy().iter().map(|s| s.id).collect();
    let active = o.active_subjects();
    let cops = o.cops();
    let resources: Vec<ResourceId> = state.resources().iter().map(|e| e.resource.id).collect();
    let associations: usize = state.resources().iter().map(|e| e.associations.len()).sum();
    let roomy = associations + 4 <= MAX_ASSOCIATIONS && resources.len() < MAX_RESOURCES;

    if members.is_empty() || (members.len() < MAX_MEMBERS && rng.random_bool(0.04)) {
        return Op::Register {
            name: format!("{} {}", ["Ana", "Bo", "Chen", "Dee"].choose(rng).unwrap(), n % 3),
            email: format!("m{n}@example.org"),
        };
    }
    let member = *members.choose(rng).unwrap();
    let profile = state.profiles().get(member).unwrap();
    let live: Vec<SubjectId> = o.live_cops(profile, Scope::All).into_iter().collect();
    let pick_tags = |rng: &mut ChaCha8Rng| -> BTreeSet<SubjectId> {
        let k = rng.random_range(1..=3.min(live.len().max(1)));
        let mut tags: Vec<SubjectId> = live.clone();
        tags.shuffle(rng);
        let mut out: BTreeSet<SubjectId> = tags.into_iter().take(k).collect();
        if rng.random_bool(0.05) {
            if let Some(&s) = all.choose(rng) {
                out.insert(s);
            }
        }
        out
    };
    let pick_resource = |rng: &mut ChaCha8Rng| -> Option<ResourceId> {
        let visible: Vec<ResourceId> = state
            .resources()
            .iter()
            .filter(|e| o.visible(profile, e))
            .map(|e| e.resource.id)
            .collect();
        if !visible.is_empty() && rng.random_bool(0.85) {
            visible.choose(rng).copied()
        } else {
            resources.choose(rng).copied()
        }
    };

    loop {
        match rng.random_range(0..100) {
            0..=9 if all.len() < MAX_SUBJECTS => {
                let parents: Vec<SubjectId> = active
                    .iter()
                    .copied()
                    .filter(|s| state.taxonomy().get(*s).unwrap().level < 4 || rng.random_bool(0.1))
                    .collect();
                let parent = if rng.random_bool(0.03) { None } else { parents.choose(rng).copied() };
                return Op::AddSubject {
                    member,
                    parent,
                    label: word(rng),
                };
            }
            10..=29 => {
                let pool = if rng.random_bool(0.85) && !cops.is_empty() { &cops } else { &all };
                let Some(&subject) = pool.choose(rng) else { continue };
                let scope = if rng.random_bool(0.6) {
                    MembershipScope::WorkingContext
                } else {
                    MembershipScope::SecondaryInterests
                };
                return Op::Declare { member, subject, scope };
            }
            30..=33 => {
                let declared: Vec<SubjectId> = profile.declared(Scope::All).collect();
                let Some(&subject) = declared.choose(rng) else { continue };
                return Op::Revoke { member, subject };
            }
            34 => {
                return Op::Identity {
                    member,
                    name: format!("{} {}", ["Eve", "Fa", "Gus"].choose(rng).unwrap(), n % 2),
                }
            }
            35..=50 if roomy && !live.is_empty() => {
                return Op::Discussion {
                    author: member,
                    title: format!("thread {n}"),
                    subjects: pick_tags(rng),
                }
            }
            51..=52 if roomy && !live.is_empty() => {
                return Op::Weblink {
                    author: member,
                    url: format!("https://example.org/{n}"),
                    subjects: pick_tags(rng),
                }
            }
            53 if roomy && !live.is_empty() => {
                return Op::Document {
                    author: member,
                    bytes: format!("doc {}", n % 5).into_bytes(),
                    subjects: pick_tags(rng),
                }
            }
            54..=62 => {
                let Some(resource) = pick_resource(rng) else { continue };
                return Op::Reply {
                    author: member,
                    resource,
                    body: format!("reply {n}"),
                };
            }
            63..=64 => {
                let Some(resource) = pick_resource(rng) else { continue };
                return Op::Edit {
                    actor: member,
                    resource,
                    body: format!("edited {n}"),
                };
            }
            65..=75 if associations < MAX_ASSOCIATIONS => {
                let Some(resource) = pick_resource(rng) else { continue };
                let view: Vec<SubjectId> = o.view(profile, Scope::All).into_iter().collect();
                let pool = if view.is_empty() || rng.random_bool(0.1) { &all } else { &view };
                let Some(&subject) = pool.choose(rng) else { continue };
                return Op::Spread { member, resource, subject };
            }
            76..=81 => {
                let Some(&resource) = resources.choose(rng) else { continue };
                let entry = state.resources().get(resource).unwrap();
                let tags: Vec<SubjectId> = entry.associations.keys().copied().collect();
                let Some(&subject) = tags.choose(rng) else { continue };
                let actor = if rng.random_bool(0.5) { entry.resource.author } else { member };
                return Op::Remove { actor, resource, subject };
            }
            82..=85 => {
                let Some(resource) = pick_resource(rng) else { continue };
                return Op::Consult { member, resource };
            }
            86..=89 => {
                let scope = random_scope(rng);
                let cart = random_cart(rng, &o.view(profile, scope), &all, 4, 0.0);
                let query = if rng.random_bool(0.7) {
                    SearchQuery::resources(cart, scope)
                } else {
                    SearchQuery::profiles(cart, scope)
                };
                return Op::Search { member, query };
            }
            90..=91 => {
                let Some(&subject) = all.choose(rng) else { continue };
                let at = state_now(state) - Duration::days(rng.random_range(0..90));
                return Op::Usage {
                    event: UsageEvent {
                        subject,
                        member,
                        kind: *UsageKind::ALL.choose(rng).unwrap(),
                        at,
                    },
                };
            }
            92 => {
                return Op::Prune {
                    ahead_days: rng.random_range(0..200),
                    policy: random_policy(rng),
                }
            }
            93 if rng.random_bool(0.3) => {
                let Some(&resource) = resources.choose(rng) else { continue };
                return Op::Delete { resource };
            }
            94..=99 => {
                let minutes = match rng.random_range(0..4) {
                    0 => 0,
                    1 => rng.random_range(1..5),
                    2 => rng.random_range(60..600),
                    _ => rng.random_range(1..40) * 24 * 60,
                };
                return Op::Advance { minutes };
            }
            _ => continue,
        }
    }
}

/// Latest timestamp recorded anywhere in `state`, as a stand-in for "now"
/// when choosing usage event times.
fn state_now(state: &State) -> icp_core::Timestamp {
    let mut now = chrono::DateTime::UNIX_EPOCH;
    for s in state.taxonomy().iter() {
        now = now.max(s.created_at);
    }
    for e in state.resources().iter() {
        now = now.max(e.last_activity());
    }
    now
}

pub fn random_policy(rng: &mut ChaCha8Rng) -> PrunePolicy {
    PrunePolicy {
        min_age_days: *[0, 1, 7, 30, 90].choose(rng).unwrap(),
        usage_window: if rng.random_bool(0.5) {
            UsageWindow::Lifetime
        } else {
            UsageWindow::LastDays(rng.random_range(1..60))
        },
    }
}

/// Applies `op` to `engine`; the clock is advanced by the caller.
pub fn apply(engine: &Engine, op: &Op) -> icp_core::Result<()> {
    match op {
        Op::Register { name, email } => engine.register(name, email).map(drop),
        Op::AddSubject { member, parent, label } => engine.add_subject(label, *parent, *member).map(drop),
        Op::Declare { member, subject, scope } => engine.declare_membership(*member, *subject, *scope).map(drop),
        Op::Revoke { member, subject } => engine.revoke_membership(*member, *subject).map(drop),
        Op::Identity { member, name } => engine
            .update_identity(*member, IdentityUpdate {
                display_name: Some(name.clone()),
                ..Default::default()
            })
            .map(drop),
        Op::Discussion { author, title, subjects } => {
            engine.create_discussion(*author, title, "opening post", subjects).map(drop)
        }
        Op::Weblink { author, url, subjects } => engine.create_weblink(*author, "link", url, subjects).map(drop),
        Op::Document { author, bytes, subjects } => engine
            .create_document(*author, "notes", bytes, Some("notes.txt".into()), subjects)
            .map(drop),
        Op::Reply { author, resource, body } => engine.reply(*author, *resource, body).map(drop),
        Op::Edit { actor, resource, body } => engine.edit_body(*actor, *resource, body).map(drop),
        Op::Spread { member, resource, subject } => engine.spread(*member, *resource, *subject).map(drop),
        Op::Remove { actor, resource, subject } => engine.remove_association(*actor, *resource, *subject),
        Op::Consult { member, resource } => engine.consult(*member, *resource).map(drop),
        Op::Search { member, query } => match query.target {
            Target::Resources => engine.search_resources(*member, query).map(drop),
            Target::Profiles => engine.search_profiles(*member, query).map(drop),
        },
        Op::Usage { event } => engine.record_usage(event.clone()),
        Op::Prune { ahead_days, policy } => engine
            .prune_unused(engine.now() + Duration::days(*ahead_days), policy)
            .map(drop),
        Op::Delete { resource } => engine.delete_resource(*resource),
        Op::Advance { .. } => Ok(()),
    }
}

/// Drives `engine` through `steps` random operations, advancing `clock`.
pub fn drive(engine: &Engine, clock: &ManualClock, rng: &mut ChaCha8Rng, steps: usize, counter: &mut u64) {
    for _ in 0..steps {
        let op = choose(rng, &engine.snapshot(), counter);
        if let Op::Advance { minutes } = op {
            clock.advance(Duration::minutes(minutes));
        }
        let _ = apply(engine, &op);
    }
}

/// An in-memory engine on a manual clock.
pub fn blank(execution: Execution) -> (Engine, ManualClock) {
    let clock = ManualClock::at_epoch();
    let config = EngineConfig {
        execution,
        ..EngineConfig::default()
    };
    (Engine::in_memory(config, Arc::new(clock.clone())), clock)
}

/// A random state within the search size limits: a seeded classification,
/// up to ten members and a random history of memberships, resources,
/// spreads, removals, prunes and time steps.
pub fn random_world(seed: u64, execution: Execution) -> (Engine, ManualClock) {
    let mut rng = rng(seed);
    let (engine, clock) = blank(execution);
    let n = rng.random_range(3..=24);
    engine.load_seed(&random_seed(&mut rng, n)).unwrap();
    let mut counter = 0;
    for i in 0..rng.random_range(2..=MAX_MEMBERS) {
        // shared display names exercise the tie-break on id
        engine
            .register(&format!("Member {}", i % 4), &format!("seed{i}@example.org"))
            .unwrap();
    }
    let steps = rng.random_range(30..160);
    drive(&engine, &clock, &mut rng, steps, &mut counter);
    (engine, clock)
}
