//! HTTP facade over the [`icp_core::Engine`].
//!
//! Requests are JSON documents; responses are wrapped in
//! `{taxonomy_version, data}` on success and `{error: {code, message}}` on
//! failure, where `code` is the engine error name. Members authenticate with
//! a bearer token from `POST /api/sessions`; admin endpoints take the
//! configured admin token instead.

pub mod api_spec;
mod error;
pub mod handlers;
mod session;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::routing::{delete, get, post};
use axum::Router;
use icp_core::{Clock, Engine, EngineConfig, PrunePolicy, SeedDocument, SystemClock};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::{status_of, ApiError, ErrorBody, ErrorEnvelope, ServeError};
pub use handlers::Envelope;
pub use session::{Session, Sessions};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// Persistent data directory; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Seed loaded when the classification is empty.
    pub seed_path: Option<PathBuf>,
    pub prune_policy: PrunePolicy,
    pub allow_member_roots: bool,
    pub admin_token: Option<String>,
    pub session_ttl: chrono::Duration,
    /// Origin allowed by CORS; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: None,
            seed_path: None,
            prune_policy: PrunePolicy::default(),
            allow_member_roots: false,
            admin_token: None,
            session_ttl: chrono::Duration::hours(12),
            cors_origin: None,
        }
    }
}

/// Shared request state.
pub struct App {
    pub engine: Arc<Engine>,
    pub sessions: Sessions,
    pub admin_token: Option<String>,
}

impl App {
    pub fn new(engine: Arc<Engine>, clock: Arc<dyn Clock>, admin_token: Option<String>, ttl: chrono::Duration) -> Self {
        App {
            engine,
            sessions: Sessions::new(clock, ttl),
            admin_token,
        }
    }
}

pub fn router(app: Arc<App>, cors_origin: Option<&str>) -> Result<Router, ServeError> {
    use handlers::*;
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
        .allow_headers(Any);
    let cors = match cors_origin {
        None => cors.allow_origin(Any),
        Some(origin) => {
            let origin = HeaderValue::from_str(origin)
                .map_err(|_| ServeError::BadConfig(format!("cors origin `{origin}` is not a valid header value")))?;
            cors.allow_origin(AllowOrigin::exact(origin))
        }
    };
    Ok(Router::new()
        .route("/api/spec", get(api_spec))
        .route("/api/members", post(register))
        .route("/api/sessions", post(login).delete(logout))
        .route("/api/members/{id}/profile", get(get_profile).put(put_profile))
        .route(
            "/api/members/{id}/memberships",
            post(declare_membership).delete(revoke_membership),
        )
        .route("/api/taxonomy/roots", get(roots))
        .route("/api/taxonomy/export", get(export_seed))
        .route("/api/taxonomy/view", get(view))
        .route("/api/taxonomy/subjects", post(add_subject))
        .route("/api/taxonomy/{id}", get(subject))
        .route("/api/taxonomy/{id}/children", get(children))
        .route("/api/taxonomy/{id}/path", get(path))
        .route("/api/discussions", post(create_discussion))
        .route("/api/weblinks", post(create_weblink))
        .route("/api/documents", post(create_document))
        .route("/api/resources/{id}", get(consult))
        .route("/api/resources/{id}/export", get(export_thread))
        .route("/api/resources/{id}/attachment", get(attachment))
        .route("/api/resources/{id}/body", axum::routing::put(edit_body))
        .route("/api/resources/{id}/replies", post(add_reply))
        .route("/api/resources/{id}/subjects", post(spread))
        .route("/api/resources/{id}/subjects/{sid}", delete(remove_association))
        .route("/api/search/resources", post(search_resources))
        .route("/api/search/profiles", post(search_profiles))
        .route("/api/admin/usage", get(usage))
        .route("/api/admin/stats", get(stats))
        .route("/api/admin/prune", post(prune))
        .route("/api/admin/subjects/{id}/purge", post(purge_subject))
        .route("/api/admin/resources/{id}", delete(delete_resource))
        .fallback(not_found)
        .layer(cors)
        .with_state(app))
}

fn read_seed(path: &std::path::Path) -> Result<SeedDocument, ServeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServeError::BadConfig(format!("seed path {}: {e}", path.display())))?;
    SeedDocument::from_json(&text)
        .map_err(|e| ServeError::BadConfig(format!("seed path {}: {e}", path.display())))
}

/// Opens the engine described by `config` and applies the seed if the
/// classification is empty.
pub fn open_engine(config: &ServerConfig, clock: Arc<dyn Clock>) -> Result<Engine, ServeError> {
    if config.session_ttl <= chrono::Duration::zero() {
        return Err(ServeError::BadConfig("session ttl must be positive".into()));
    }
    if config.admin_token.as_deref().is_some_and(|t| t.trim().is_empty()) {
        return Err(ServeError::BadConfig("admin token must not be empty".into()));
    }
    let seed = config.seed_path.as_deref().map(read_seed).transpose()?;
    let engine_config = EngineConfig {
        allow_member_roots: config.allow_member_roots,
        prune_policy: config.prune_policy,
        ..EngineConfig::default()
    };
    let engine = match &config.data_dir {
        Some(dir) => {
            if dir.exists() && !dir.is_dir() {
                return Err(ServeError::BadConfig(format!(
                    "data dir {} is not a directory",
                    dir.display()
                )));
            }
            Engine::open(dir, engine_config, clock)?
        }
        None => Engine::in_memory(engine_config, clock),
    };
    if let Some(seed) = seed {
        if engine.snapshot().taxonomy().is_empty() {
            engine.load_seed(&seed)?;
        }
    }
    Ok(engine)
}

/// A bound, not yet running service.
pub struct Server {
    listener: tokio::net::TcpListener,
    router: Router,
    app: Arc<App>,
}

impl Server {
    pub async fn bind(config: &ServerConfig) -> Result<Server, ServeError> {
        Self::bind_with_clock(config, Arc::new(SystemClock)).await
    }

    pub async fn bind_with_clock(config: &ServerConfig, clock: Arc<dyn Clock>) -> Result<Server, ServeError> {
        if let Some(path) = &config.seed_path {
            read_seed(path)?;
        }
        let listener = tokio::net::TcpListener::bind(config.bind).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                ServeError::PortInUse(config.bind.to_string())
            } else {
                ServeError::Io(e)
            }
        })?;
        let engine = Arc::new(open_engine(config, clock.clone())?);
        let app = Arc::new(App::new(engine, clock, config.admin_token.clone(), config.session_ttl));
        let router = router(app.clone(), config.cors_origin.as_deref())?;
        Ok(Server { listener, router, app })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn app(&self) -> Arc<App> {
        self.app.clone()
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await?;
        // persist queued usage before the lock is released
        self.app.engine.save()?;
        Ok(())
    }
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let server = Server::bind(&config).await?;
    tracing::info!("listening on {}", server.local_addr()?);
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
