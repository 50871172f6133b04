use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use icp_core::Error;
use serde::{Deserialize, Serialize};

/// The HTTP status an engine error maps to.
pub fn status_of(err: &Error) -> StatusCode {
    use Error::*;
    match err {
        NotAuthor(_) | NotYourCoP(_) | NotProfileOwner | NotVisible(_) => StatusCode::FORBIDDEN,
        SubjectNotFound(_) | ParentNotFound(_) | MemberNotFound(_) | ResourceNotFound(_)
        | AssociationNotFound { .. } | BlobNotFound(_) => StatusCode::NOT_FOUND,
        DuplicateSibling { .. } | DuplicateEmail(_) | AlreadyAssociated { .. } | ScopeConflict(_)
        | TaxonomyNotEmpty | SubjectInUse(_) => StatusCode::CONFLICT,
        CorruptStore(_) | FormatVersionUnsupported { .. } | DataDirLocked | Io(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

/// An error response: an engine error, or one of the service's own
/// (`Unauthorized`, `SessionExpired`, `AdminOnly`, `BadRequest`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthorized", message)
    }

    pub fn expired() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "SessionExpired", "session token has expired")
    }

    pub fn admin_only() -> Self {
        Self::new(StatusCode::FORBIDDEN, "AdminOnly", "this endpoint needs the admin token")
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        ApiError {
            status: status_of(&err),
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorEnvelope {
            error: ErrorBody {
                code: self.code,
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

/// Reasons `serve` can fail before the service is up.
#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortInUse(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::PortInUse(_) => "PortInUse",
            ServeError::BadConfig(_) => "BadConfig",
            ServeError::Engine(err) => err.code(),
            ServeError::Io(_) => "Io",
        }
    }
}
