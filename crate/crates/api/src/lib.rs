//! HTTP API under `/api/v1`: ingest for gateways, live and historical sensor
//! queries, building summaries for the lab kit, and the challenge endpoints.
//! Every error body is `{"error":{"code","message"}}`.

pub mod config;
pub mod error;
pub mod platform;
pub mod routes;
pub mod summary;

use std::future::Future;
use std::sync::Arc;

use axum::Router;
use gaia_challenge::Engine;
use gaia_store::Store;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use config::{ApiConfig, Dials};
pub use error::ApiError;
pub use platform::{open_platform, OpenError, Platform};
pub use summary::{BuildingSummary, RoomStatus};

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub engine: Arc<Engine>,
    pub config: Arc<ApiConfig>,
    pub clock: Clock,
}

impl AppState {
    pub fn new(platform: Platform, config: ApiConfig) -> Self {
        AppState {
            store: platform.store,
            engine: platform.engine,
            config: Arc::new(config),
            clock: Arc::new(unix_now),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

pub fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

pub fn router(state: AppState) -> Router {
    let mut app = Router::new().nest("/api/v1", routes::api_routes());
    if let Some(dir) = &state.config.static_dir {
        app = app.nest_service(
            "/app",
            ServeDir::new(dir).append_index_html_on_directories(true),
        );
    }
    app.fallback(|| async { ApiError::not_found("no such route") })
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
