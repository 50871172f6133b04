use std::collections::HashMap;
use std::sync::Arc;

use chrono::Duration;
use icp_core::{Clock, MemberId, Timestamp};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub member: MemberId,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
}

/// Bearer tokens issued at login. Held in memory only: a restart logs
/// everyone out.
pub struct Sessions {
    clock: Arc<dyn Clock>,
    ttl: Duration,
    live: Mutex<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(clock: Arc<dyn Clock>, ttl: Duration) -> Self {
        Sessions {
            clock,
            ttl,
            live: Mutex::new(HashMap::new()),
        }
    }

    pub fn issue(&self, member: MemberId) -> Session {
        let issued_at = self.clock.now();
        let session = Session {
            token: uuid::Uuid::new_v4().simple().to_string(),
            member,
            issued_at,
            expires_at: issued_at + self.ttl,
        };
        let mut live = self.live.lock();
        live.retain(|_, s| s.expires_at > issued_at);
        live.insert(session.token.clone(), session.clone());
        session
    }

    pub fn resolve(&self, token: &str) -> Result<Session, ApiError> {
        let session = self
            .live
            .lock()
            .get(token)
            .cloned()
            .ok_or_else(|| ApiError::unauthorized("unknown session token"))?;
        if self.clock.now() >= session.expires_at {
            return Err(ApiError::expired());
        }
        Ok(session)
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.live.lock().remove(token).is_some()
    }
}
