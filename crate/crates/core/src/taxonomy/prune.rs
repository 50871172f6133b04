use std::collections::BTreeSet;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::{Creator, Taxonomy, UsageEvent};
use crate::clock::Timestamp;
use crate::ids::SubjectId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageWindow {
    /// Every event since the subject was created.
    Lifetime,
    /// Only events in the last `n` days.
    LastDays(u32),
}

/// When an unused member-created subject may be deprecated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunePolicy {
    pub min_age_days: u32,
    pub usage_window: UsageWindow,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        PrunePolicy {
            min_age_days: 90,
            usage_window: UsageWindow::Lifetime,
        }
    }
}

impl PrunePolicy {
    pub fn with_min_age_days(min_age_days: u32) -> Self {
        PrunePolicy {
            min_age_days,
            ..Self::default()
        }
    }
}

/// Subjects `prune_unused` would deprecate, in id order.
///
/// A subject qualifies when it is active, member-created, older than the
/// minimum age, has no usage in the window, is not `referenced` (by an
/// association or a profile), and every active child also qualifies.
/// Evaluating deepest levels first makes this a fixpoint, so a second run
/// after deprecation finds nothing.
pub fn prune_candidates(
    taxonomy: &Taxonomy,
    usage: &[UsageEvent],
    now: Timestamp,
    policy: &PrunePolicy,
    referenced: impl Fn(SubjectId) -> bool,
) -> Vec<SubjectId> {
    let window_start = match policy.usage_window {
        UsageWindow::Lifetime => None,
        UsageWindow::LastDays(days) => Some(now - Duration::days(days.into())),
    };
    let used: BTreeSet<SubjectId> = usage
        .iter()
        .filter(|e| e.at <= now && window_start.is_none_or(|start| e.at >= start))
        .map(|e| e.subject)
        .collect();
    let min_age = Duration::days(policy.min_age_days.into());

    let mut by_depth: Vec<_> = taxonomy.active().collect();
    by_depth.sort_by_key(|s| (std::cmp::Reverse(s.level), s.id));

    let mut pruned = BTreeSet::new();
    for subject in by_depth {
        let eligible = matches!(subject.created_by, Creator::Member(_))
            && now - subject.created_at > min_age
            && !used.contains(&subject.id)
            && !referenced(subject.id)
            && taxonomy
                .all_children(subject.id)
                .all(|c| !taxonomy.is_active(c) || pruned.contains(&c));
        if eligible {
            pruned.insert(subject.id);
        }
    }
    pruned.into_iter().collect()
}
