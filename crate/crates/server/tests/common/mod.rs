#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use icp_core::{Engine, EngineConfig, ManualClock, MemberId, SeedDocument};
use icp_server::App;
use serde_json::Value;
use tower::ServiceExt;

pub const ADMIN: &str = "admin-secret";

/// An in-process service over an in-memory engine and a manual clock.
pub struct Api {
    pub router: Router,
    pub app: Arc<App>,
    pub clock: ManualClock,
}

impl Api {
    pub fn empty() -> Api {
        let clock = ManualClock::at_epoch();
        let engine = Arc::new(Engine::in_memory(EngineConfig::default(), Arc::new(clock.clone())));
        let app = Arc::new(App::new(
            engine,
            Arc::new(clock.clone()),
            Some(ADMIN.to_string()),
            chrono::Duration::hours(12),
        ));
        let router = icp_server::router(app.clone(), None).unwrap();
        Api { router, app, clock }
    }

    pub fn seeded() -> Api {
        let api = Api::empty();
        api.engine()
            .load_seed(&SeedDocument::from_json(icp_core::TUTORING_SEED).unwrap())
            .unwrap();
        api
    }

    pub fn engine(&self) -> &Engine {
        &self.app.engine
    }

    pub async fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut request = Request::builder().method(method).uri(path);
        if let Some(token) = token {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let body = match body {
            Some(v) => {
                request = request.header("content-type", "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            None => Body::empty(),
        };
        let response = self
            .router
            .clone()
            .oneshot(request.body(body).unwrap())
            .await
            .unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        let json = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, json)
    }

    /// Registers a member and logs them in.
    pub async fn join(&self, name: &str, email: &str) -> (MemberId, String) {
        let (status, body) = self
            .call(
                "POST",
                "/api/members",
                None,
                Some(serde_json::json!({"display_name": name, "email": email})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let member = MemberId(body["data"]["id"].as_u64().unwrap());
        let (status, body) = self
            .call("POST", "/api/sessions", None, Some(serde_json::json!({ "email": email })))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        (member, body["data"]["token"].as_str().unwrap().to_string())
    }
}

pub fn code(body: &Value) -> &str {
    body["error"]["code"].as_str().unwrap_or("<no error code>")
}
