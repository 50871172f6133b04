//! Core of an interconnection of communities of practice (CoPs).
//!
//! Members declare the CoPs they belong to in a shared classification of at
//! most four levels, index discussions, documents and links on those CoPs,
//! and search across the whole classification by combining subjects.
//!
//! The [`Engine`] is the entry point. It owns a [`State`], persists every
//! mutation through a [`Store`] when opened on a data directory, and serves
//! searches from immutable snapshots.

pub mod clock;
pub mod engine;
pub mod error;
pub mod fixture;
pub mod ids;
pub mod profiles;
pub mod resources;
pub mod search;
pub mod state;
pub mod store;
pub mod taxonomy;

pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use engine::{Engine, EngineConfig, ResourceView, SubjectStats, ThreadExport};
pub use error::{Error, Result};
pub use ids::{MemberId, ReplyId, ResourceId, SubjectId};
pub use profiles::{IdentityUpdate, MemberProfile, MembershipScope, Scope};
pub use resources::{Content, Origin, Reply, Resource, ResourceEntry, SubjectAssociation};
pub use search::{CartEntry, Execution, ProfileHit, ResourceHit, SearchQuery, SearchResults, Target};
pub use state::{Change, State};
pub use store::Store;
pub use taxonomy::{PrunePolicy, SeedDocument, Subject, Taxonomy, UsageEvent, UsageKind, UsageWindow};

/// The tutoring classification used by the examples and the demo fixture.
pub const TUTORING_SEED: &str = include_str!("../seeds/tutoring.json");
