//! Ready-made populations: the three-tutor demo and seeded synthetic states.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clock::ManualClock;
use crate::engine::Engine;
use crate::error::Result;
use crate::ids::{MemberId, ResourceId, SubjectId};
use crate::profiles::{MembershipScope, Scope};
use crate::taxonomy::{SeedDocument, SeedRecord};

/// Ids created by [`fig3`].
#[derive(Clone, Debug, Serialize)]
pub struct Fig3 {
    pub tutor1: MemberId,
    pub tutor2: MemberId,
    pub tutor3: MemberId,
    /// Every subject by label (labels are unique in the tutoring seed).
    pub subjects: BTreeMap<String, SubjectId>,
    pub discussions: Vec<ResourceId>,
}

impl Fig3 {
    pub fn subject(&self, label: &str) -> SubjectId {
        self.subjects[label]
    }
}

fn step(clock: Option<&ManualClock>) {
    if let Some(clock) = clock {
        clock.advance(Duration::minutes(1));
    }
}

/// Loads the tutoring seed and populates it with three tutors.
///
/// Tutor 1 adds "maintenance" under "discipline" and belongs to five CoPs.
/// Tutor 2 works at University B, Tutor 3 at University A. Tutor 3 shares
/// University A and industrial engineering with Tutor 1, and "courses" with
/// Tutor 2. One discussion is spread to the whole "universities" category.
///
/// With a manual clock each step advances it by a minute, so the result is
/// fully deterministic.
pub fn fig3(engine: &Engine, clock: Option<&ManualClock>) -> Result<Fig3> {
    engine.load_seed(&SeedDocument::from_json(crate::TUTORING_SEED)?)?;
    let labels = |engine: &Engine| -> BTreeMap<String, SubjectId> {
        engine
            .snapshot()
            .taxonomy()
            .active()
            .map(|s| (s.label.clone(), s.id))
            .collect()
    };

    let tutor1 = engine.register("Tutor 1", "tutor1@univ-a.example")?.id;
    step(clock);
    let tutor2 = engine.register("Tutor 2", "tutor2@univ-b.example")?.id;
    step(clock);
    let tutor3 = engine.register("Tutor 3", "tutor3@univ-a.example")?.id;
    step(clock);

    let discipline = labels(engine)["discipline"];
    engine.add_subject("maintenance", Some(discipline), tutor1)?;
    step(clock);
    let s = labels(engine);

    let working = MembershipScope::WorkingContext;
    let declarations: [(MemberId, &str, MembershipScope); 12] = [
        (tutor1, "collective activities", working),
        (tutor1, "maintenance", working),
        (tutor1, "educational projects", working),
        (tutor1, "industrial engineering", working),
        (tutor1, "University A", working),
        (tutor2, "University B", working),
        (tutor2, "collective activities", working),
        (tutor2, "courses", working),
        (tutor3, "University A", working),
        (tutor3, "industrial engineering", working),
        (tutor3, "courses", working),
        (tutor3, "collective activities", MembershipScope::SecondaryInterests),
    ];
    for (member, label, scope) in declarations {
        engine.declare_membership(member, s[label], scope)?;
        step(clock);
    }

    let set = |labels: &[&str]| labels.iter().map(|l| s[*l]).collect::<BTreeSet<_>>();
    let mut discussions = Vec::new();
    let d1 = engine.create_discussion(
        tutor1,
        "Assessing collective maintenance projects",
        "How do you grade group work on the maintenance project?",
        &set(&["collective activities", "educational projects", "maintenance"]),
    )?;
    discussions.push(d1.id);
    step(clock);
    let d2 = engine.create_discussion(
        tutor2,
        "Keeping remote learners engaged during courses",
        "Weekly check-ins helped my group at University B.",
        &set(&["courses"]),
    )?;
    discussions.push(d2.id);
    step(clock);
    let d3 = engine.create_discussion(
        tutor3,
        "Industrial engineering tutoring at University A",
        "Schedule for the spring term.",
        &set(&["University A", "industrial engineering"]),
    )?;
    discussions.push(d3.id);
    step(clock);
    let d4 = engine.create_discussion(
        tutor1,
        "Internship agreements",
        "Template agreed with the partner companies.",
        &set(&["University A"]),
    )?;
    discussions.push(d4.id);
    step(clock);

    engine.spread(tutor1, d4.id, s["universities"])?;
    step(clock);
    engine.reply(tutor2, d1.id, "We use peer assessment for part of the grade.")?;
    step(clock);
    engine.reply(tutor3, d2.id, "Same at University A.")?;
    step(clock);

    Ok(Fig3 {
        tutor1,
        tutor2,
        tutor3,
        subjects: labels(engine),
        discussions,
    })
}

/// Sizes of a synthetic population.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub roots: usize,
    pub fanout: usize,
    pub members: usize,
    pub memberships: usize,
    pub resources: usize,
    pub spreads: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            roots: 5,
            fanout: 4,
            members: 200,
            memberships: 4,
            resources: 2000,
            spreads: 500,
        }
    }
}

fn synthetic_tree(rng: &mut ChaCha8Rng, prefix: &str, level: u32, fanout: usize) -> Vec<SeedRecord> {
    if level > crate::taxonomy::MAX_DEPTH {
        return Vec::new();
    }
    let count = if level == 1 { fanout } else { rng.random_range(1..=fanout) };
    (0..count)
        .map(|i| {
            let label = format!("{prefix}{}", i + 1);
            let leaf = level > 1 && rng.random_bool(0.3);
            let children = if leaf {
                Vec::new()
            } else {
                synthetic_tree(rng, &format!("{label}."), level + 1, fanout)
            };
            SeedRecord {
                id: None,
                label,
                parent_label_path: Vec::new(),
                children,
            }
        })
        .collect()
}

/// Builds a reproducible random population on an empty engine.
pub fn synthetic(engine: &Engine, spec: &SyntheticSpec, seed: u64) -> Result<Vec<MemberId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = (0..spec.roots)
        .map(|r| SeedRecord {
            id: None,
            label: format!("facet {}", r + 1),
            parent_label_path: Vec::new(),
            children: synthetic_tree(&mut rng, &format!("f{}.", r + 1), 2, spec.fanout),
        })
        .collect();
    engine.load_seed(&SeedDocument {
        format: None,
        subjects,
    })?;

    let state = engine.snapshot();
    let taxonomy = state.taxonomy();
    let cops: Vec<SubjectId> = taxonomy
        .active()
        .filter(|s| taxonomy.is_cop(s.id).unwrap_or(false))
        .map(|s| s.id)
        .collect();

    let mut members = Vec::with_capacity(spec.members);
    for i in 0..spec.members {
        let member = engine.register(&format!("Member {i}"), &format!("m{i}@icp.example"))?.id;
        for cop in cops.choose_multiple(&mut rng, spec.memberships) {
            let scope = if rng.random_bool(0.75) {
                MembershipScope::WorkingContext
            } else {
                MembershipScope::SecondaryInterests
            };
            engine.declare_membership(member, *cop, scope)?;
        }
        members.push(member);
    }

    let mut resources = Vec::with_capacity(spec.resources);
    for i in 0..spec.resources {
        let author = *members.choose(&mut rng).expect("at least one member");
        let own = engine.memberships(author, Scope::All)?;
        let count = rng.random_range(1..=own.len().clamp(1, 3));
        let tags: BTreeSet<SubjectId> = own.iter().copied().choose_multiple(&mut rng, count).into_iter().collect();
        if tags.is_empty() {
            continue;
        }
        let resource = engine.create_discussion(author, &format!("Discussion {i}"), "body", &tags)?;
        resources.push(resource.id);
    }

    for _ in 0..spec.spreads {
        let (Some(&member), Some(&resource)) = (members.choose(&mut rng), resources.choose(&mut rng)) else {
            break;
        };
        let view: Vec<SubjectId> = engine.visible_subjects(member, Scope::All)?.into_iter().collect();
        let Some(&subject) = view.choose(&mut rng) else {
            continue;
        };
        // refusals (not visible, already associated) are part of the mix
        let _ = engine.spread(member, resource, subject);
    }
    Ok(members)
}
