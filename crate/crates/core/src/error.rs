use thiserror::Error;

use crate::ids::{MemberId, ResourceId, SubjectId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. [`Error::code`] returns the variant
/// name, which is also the machine-readable code on the wire.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    // taxonomy
    #[error("malformed seed document: {0}")]
    MalformedSeed(String),
    #[error("seed violates a classification invariant at `{subject}`: {reason}")]
    InvariantViolation { subject: String, reason: String },
    #[error("subject `{label}` would sit at level {level}; the classification has at most 4 levels")]
    DepthExceeded { label: String, level: u32 },
    #[error("a sibling labelled `{label}` already exists")]
    DuplicateSibling { label: String },
    #[error("parent subject {0} does not exist")]
    ParentNotFound(SubjectId),
    #[error("parent subject {0} is deprecated")]
    ParentDeprecated(SubjectId),
    #[error("subject {0} does not exist")]
    SubjectNotFound(SubjectId),
    #[error("subject {0} is deprecated")]
    DeprecatedSubject(SubjectId),
    #[error("subject labels must not be empty")]
    InvalidLabel,
    #[error("members may not create level-1 categories")]
    MemberRootsDisallowed,
    #[error("taxonomy already holds subjects; seed import needs an empty classification")]
    TaxonomyNotEmpty,
    #[error("subject {0} is still referenced and cannot be purged")]
    SubjectInUse(SubjectId),

    // profiles
    #[error("member {0} does not exist")]
    MemberNotFound(MemberId),
    #[error("email `{0}` is already registered")]
    DuplicateEmail(String),
    #[error("email `{0}` is not a valid address")]
    InvalidEmail(String),
    #[error("display name must not be empty")]
    EmptyDisplayName,
    #[error("subject {0} is a category of CoPs, not a CoP")]
    NotACoP(SubjectId),
    #[error("subject {0} is already declared in the other profile scope")]
    ScopeConflict(SubjectId),
    #[error("member does not belong to CoP {0}")]
    NotAMember(SubjectId),
    #[error("members may only edit their own profile")]
    NotProfileOwner,

    // resources
    #[error("a resource needs at least one subject")]
    EmptySubjects,
    #[error("author is not a member of CoP {0}")]
    NotYourCoP(SubjectId),
    #[error("{0}")]
    NotVisible(String),
    #[error("resource {0} does not exist")]
    ResourceNotFound(ResourceId),
    #[error("resource {0} is not a discussion")]
    NotADiscussion(ResourceId),
    #[error("body must not be empty")]
    EmptyBody,
    #[error("title must not be empty")]
    EmptyTitle,
    #[error("`{0}` is not an absolute http(s) URL")]
    InvalidUrl(String),
    #[error("resource {resource} is already associated with subject {subject}")]
    AlreadyAssociated {
        resource: ResourceId,
        subject: SubjectId,
    },
    #[error("only the author of resource {0} may do this")]
    NotAuthor(ResourceId),
    #[error("resource {0} must keep at least one subject")]
    LastAssociation(ResourceId),
    #[error("resource {resource} is not associated with subject {subject}")]
    AssociationNotFound {
        resource: ResourceId,
        subject: SubjectId,
    },

    // search
    #[error("subject {0} is outside the member's classification view for this scope")]
    SubjectOutOfScope(SubjectId),
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    // store
    #[error("store is corrupt: dangling or invalid reference {0}")]
    CorruptStore(String),
    #[error("store format version {found} is not supported (expected {supported})")]
    FormatVersionUnsupported { found: u32, supported: u32 },
    #[error("data directory is locked by another process")]
    DataDirLocked,
    #[error("blob {0} not found")]
    BlobNotFound(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// The stable, machine-readable name of this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedSeed(_) => "MalformedSeed",
            Error::InvariantViolation { .. } => "InvariantViolation",
            Error::DepthExceeded { .. } => "DepthExceeded",
            Error::DuplicateSibling { .. } => "DuplicateSibling",
            Error::ParentNotFound(_) => "ParentNotFound",
            Error::ParentDeprecated(_) => "ParentDeprecated",
            Error::SubjectNotFound(_) => "SubjectNotFound",
            Error::DeprecatedSubject(_) => "DeprecatedSubject",
            Error::InvalidLabel => "InvalidLabel",
            Error::MemberRootsDisallowed => "MemberRootsDisallowed",
            Error::TaxonomyNotEmpty => "TaxonomyNotEmpty",
            Error::SubjectInUse(_) => "SubjectInUse",
            Error::MemberNotFound(_) => "MemberNotFound",
            Error::DuplicateEmail(_) => "DuplicateEmail",
            Error::InvalidEmail(_) => "InvalidEmail",
            Error::EmptyDisplayName => "EmptyDisplayName",
            Error::NotACoP(_) => "NotACoP",
            Error::ScopeConflict(_) => "ScopeConflict",
            Error::NotAMember(_) => "NotAMember",
            Error::NotProfileOwner => "NotProfileOwner",
            Error::EmptySubjects => "EmptySubjects",
            Error::NotYourCoP(_) => "NotYourCoP",
            Error::NotVisible(_) => "NotVisible",
            Error::ResourceNotFound(_) => "ResourceNotFound",
            Error::NotADiscussion(_) => "NotADiscussion",
            Error::EmptyBody => "EmptyBody",
            Error::EmptyTitle => "EmptyTitle",
            Error::InvalidUrl(_) => "InvalidUrl",
            Error::AlreadyAssociated { .. } => "AlreadyAssociated",
            Error::NotAuthor(_) => "NotAuthor",
            Error::LastAssociation(_) => "LastAssociation",
            Error::AssociationNotFound { .. } => "AssociationNotFound",
            Error::SubjectOutOfScope(_) => "SubjectOutOfScope",
            Error::InvalidQuery(_) => "InvalidQuery",
            Error::CorruptStore(_) => "CorruptStore",
            Error::FormatVersionUnsupported { .. } => "FormatVersionUnsupported",
            Error::DataDirLocked => "DataDirLocked",
            Error::BlobNotFound(_) => "BlobNotFound",
            Error::Io(_) => "Io",
        }
    }
}

impl Error {
    /// One instance of every variant, for documentation and contract tests.
    pub fn catalog() -> Vec<Error> {
        let s = SubjectId(1);
        let r = ResourceId(1);
        let text = || "example".to_string();
        vec![
            Error::MalformedSeed(text()),
            Error::InvariantViolation {
                subject: text(),
                reason: text(),
            },
            Error::DepthExceeded {
                label: text(),
                level: 5,
            },
            Error::DuplicateSibling { label: text() },
            Error::ParentNotFound(s),
            Error::ParentDeprecated(s),
            Error::SubjectNotFound(s),
            Error::DeprecatedSubject(s),
            Error::InvalidLabel,
            Error::MemberRootsDisallowed,
            Error::TaxonomyNotEmpty,
            Error::SubjectInUse(s),
            Error::MemberNotFound(MemberId(1)),
            Error::DuplicateEmail(text()),
            Error::InvalidEmail(text()),
            Error::EmptyDisplayName,
            Error::NotACoP(s),
            Error::ScopeConflict(s),
            Error::NotAMember(s),
            Error::NotProfileOwner,
            Error::EmptySubjects,
            Error::NotYourCoP(s),
            Error::NotVisible(text()),
            Error::ResourceNotFound(r),
            Error::NotADiscussion(r),
            Error::EmptyBody,
            Error::EmptyTitle,
            Error::InvalidUrl(text()),
            Error::AlreadyAssociated {
                resource: r,
                subject: s,
            },
            Error::NotAuthor(r),
            Error::LastAssociation(r),
            Error::AssociationNotFound {
                resource: r,
                subject: s,
            },
            Error::SubjectOutOfScope(s),
            Error::InvalidQuery(text()),
            Error::CorruptStore(text()),
            Error::FormatVersionUnsupported {
                found: 2,
                supported: 1,
            },
            Error::DataDirLocked,
            Error::BlobNotFound(text()),
            Error::Io(text()),
        ]
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
