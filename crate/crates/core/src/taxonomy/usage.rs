use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::ids::{MemberId, SubjectId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageKind {
    ProfileFill,
    Index,
    SearchSelect,
    Spread,
    Consult,
}

impl UsageKind {
    pub const ALL: [UsageKind; 5] = [
        UsageKind::ProfileFill,
        UsageKind::Index,
        UsageKind::SearchSelect,
        UsageKind::Spread,
        UsageKind::Consult,
    ];
}

/// One recorded use of a subject by a member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub subject: SubjectId,
    pub member: MemberId,
    pub kind: UsageKind,
    pub at: Timestamp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounts {
    pub profile_fill: u64,
    pub index: u64,
    pub search_select: u64,
    pub spread: u64,
    pub consult: u64,
}

impl UsageCounts {
    pub fn add(&mut self, kind: UsageKind) {
        let slot = match kind {
            UsageKind::ProfileFill => &mut self.profile_fill,
            UsageKind::Index => &mut self.index,
            UsageKind::SearchSelect => &mut self.search_select,
            UsageKind::Spread => &mut self.spread,
            UsageKind::Consult => &mut self.consult,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        self.profile_fill + self.index + self.search_select + self.spread + self.consult
    }

    /// Tallies a log per subject.
    pub fn tally<'a>(events: impl IntoIterator<Item = &'a UsageEvent>) -> BTreeMap<SubjectId, UsageCounts> {
        let mut out: BTreeMap<SubjectId, UsageCounts> = BTreeMap::new();
        for event in events {
            out.entry(event.subject).or_default().add(event.kind);
        }
        out
    }
}
