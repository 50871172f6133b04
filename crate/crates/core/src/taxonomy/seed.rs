//! Seed import and export of the classification.
//!
//! The document is a JSON object holding a list of nested records:
//!
//! ```json
//! { "format": "icp-taxonomy/1",
//!   "subjects": [
//!     { "label": "discipline", "children": [ { "label": "maintenance" } ] },
//!     { "label": "mathematics", "parent_label_path": ["discipline"] }
//!   ] }
//! ```
//!
//! `id` is optional on every record and auto-assigned when absent. A
//! top-level record may carry `parent_label_path` to attach under a subject
//! declared earlier in the document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{clean_label, label_key, Creator, Subject, SubjectStatus, Taxonomy, MAX_DEPTH};
use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::SubjectId;

pub const SEED_FORMAT: &str = "icp-taxonomy/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default)]
    pub subjects: Vec<SeedRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parent_label_path: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SeedRecord>,
}

impl SeedDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SeedDocument =
            serde_json::from_str(text).map_err(|e| Error::MalformedSeed(e.to_string()))?;
        match doc.format.as_deref() {
            None | Some(SEED_FORMAT) => Ok(doc),
            Some(other) => Err(Error::MalformedSeed(format!(
                "unsupported format `{other}`, expected `{SEED_FORMAT}`"
            ))),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("seed documents always serialize")
    }
}

fn visit<'a>(records: &'a [SeedRecord], out: &mut Vec<&'a SeedRecord>) {
    for record in records {
        out.push(record);
        visit(&record.children, out);
    }
}

struct Loader {
    taxonomy: Taxonomy,
    explicit: BTreeSet<u64>,
    next_auto: u64,
    now: Timestamp,
}

impl Loader {
    fn violation(path: &[String], label: &str, reason: impl Into<String>) -> Error {
        let mut full = path.to_vec();
        full.push(label.to_string());
        Error::InvariantViolation {
            subject: full.join(" / "),
            reason: reason.into(),
        }
    }

    fn allocate(&mut self, wanted: Option<u64>) -> SubjectId {
        match wanted {
            Some(id) => SubjectId(id),
            None => {
                while self.explicit.contains(&self.next_auto) {
                    self.next_auto += 1;
                }
                let id = self.next_auto;
                self.next_auto += 1;
                SubjectId(id)
            }
        }
    }

    fn load(
        &mut self,
        record: &SeedRecord,
        parent: Option<&Subject>,
        path: &[String],
    ) -> Result<()> {
        let label = clean_label(&record.label);
        if label.is_empty() {
            return Err(Self::violation(path, &record.label, "empty label"));
        }
        let level = parent.map_or(1, |p| p.level + 1);
        if level > MAX_DEPTH {
            return Err(Self::violation(
                path,
                &label,
                format!("level {level} exceeds the 4-level limit"),
            ));
        }
        let parent_id = parent.map(|p| p.id);
        if self.taxonomy.find_active_sibling(parent_id, &label_key(&label)).is_some() {
            return Err(Self::violation(path, &label, "duplicate sibling label"));
        }
        let subject = Subject {
            id: self.allocate(record.id),
            label: label.clone(),
            parent: parent_id,
            level,
            status: SubjectStatus::Active,
            created_by: Creator::Seed,
            created_at: self.now,
            deprecated_at: None,
        };
        self.taxonomy.link(subject.clone());
        let mut child_path = path.to_vec();
        child_path.push(label);
        for child in &record.children {
            if !child.parent_label_path.is_empty() {
                return Err(Self::violation(
                    &child_path,
                    &child.label,
                    "parent_label_path is only allowed on top-level records",
                ));
            }
            self.load(child, Some(&subject), &child_path)?;
        }
        Ok(())
    }

    fn resolve(&self, record: &SeedRecord) -> Result<Option<Subject>> {
        let mut parent: Option<SubjectId> = None;
        for (depth, label) in record.parent_label_path.iter().enumerate() {
            match self.taxonomy.find_child(parent, label) {
                Some(s) => parent = Some(s.id),
                None => {
                    return Err(Self::violation(
                        &record.parent_label_path[..depth],
                        label,
                        format!("dangling parent of `{}`", record.label),
                    ))
                }
            }
        }
        Ok(parent.map(|id| self.taxonomy.subjects[&id].clone()))
    }
}

impl Taxonomy {
    /// Builds a classification from a seed document. All subjects are active
    /// and created by `SEED`; the resulting version is 1.
    pub fn from_seed(doc: &SeedDocument, now: Timestamp) -> Result<Taxonomy> {
        let mut all = Vec::new();
        visit(&doc.subjects, &mut all);
        let mut explicit = BTreeSet::new();
        for record in &all {
            if let Some(id) = record.id {
                if id == 0 || !explicit.insert(id) {
                    return Err(Loader::violation(&[], &record.label, format!("invalid or duplicate id {id}")));
                }
            }
        }
        let mut loader = Loader {
            taxonomy: Taxonomy::new(),
            explicit,
            next_auto: 1,
            now,
        };
        for record in &doc.subjects {
            let parent = loader.resolve(record)?;
            let path: Vec<String> = record.parent_label_path.iter().map(|l| clean_label(l)).collect();
            loader.load(record, parent.as_ref(), &path)?;
        }
        let mut taxonomy = loader.taxonomy;
        taxonomy.version = 1;
        Ok(taxonomy)
    }

    /// Exports the active classification as a nested seed document with ids.
    pub fn to_seed(&self) -> SeedDocument {
        fn record(t: &Taxonomy, s: &Subject) -> SeedRecord {
            SeedRecord {
                id: Some(s.id.0),
                label: s.label.clone(),
                parent_label_path: Vec::new(),
                children: t
                    .children(s.id)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|c| record(t, c))
                    .collect(),
            }
        }
        SeedDocument {
            format: Some(SEED_FORMAT.to_string()),
            subjects: self.roots().into_iter().map(|s| record(self, s)).collect(),
        }
    }

    /// Every active subject as its label path; equal sets mean equal structure.
    pub fn label_paths(&self) -> BTreeSet<Vec<String>> {
        self.active()
            .map(|s| {
                self.path(s.id)
                    .expect("active subjects resolve")
                    .iter()
                    .map(|p| p.label.clone())
                    .collect()
            })
            .collect()
    }
}
