//! JSON-over-HTTP session service: level editing, playability checks,
//! gameplay predictions, suggestions and interaction logging.

mod error;
mod handlers;
pub mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::routing::{get, post};
use axum::Router;
use log::{info, warn};
use parking_lot::RwLock;
use uuid::Uuid;

use susketch_core::surrogate::ModelSet;

pub use error::ApiError;
pub use handlers::{
    AreaEdit, ClassesBody, CreateSession, LevelPayload, LevelSuggestionPayload, LogBody, PowerupEdit, SuggestionRef,
    TileEdit,
};
pub use session::{summarize, EventKind, LogEvent, Session, Snapshot, SCHEMA_VERSION};

#[derive(Debug, Default)]
pub struct ServiceConfig {
    /// Directory for session snapshots; `None` keeps sessions in memory only.
    pub snapshot_dir: Option<PathBuf>,
}

pub struct AppState {
    pub models: Arc<ModelSet>,
    sessions: RwLock<HashMap<Uuid, Arc<Session>>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(models: ModelSet, config: ServiceConfig) -> Arc<Self> {
        let state = Arc::new(Self {
            models: Arc::new(models),
            sessions: RwLock::new(HashMap::new()),
            config,
        });
        if let Some(dir) = &state.config.snapshot_dir {
            state.restore(dir);
        }
        state
    }

    pub fn session(&self, id: Uuid) -> Result<Arc<Session>, ApiError> {
        self.sessions.read().get(&id).cloned().ok_or(ApiError::UnknownSession)
    }

    fn insert(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        self.sessions.write().insert(session.id, session.clone());
        session
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    /// Writes every session to the snapshot directory, if one is configured.
    pub fn snapshot_all(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.config.snapshot_dir else {
            return Ok(0);
        };
        std::fs::create_dir_all(dir)?;
        let sessions: Vec<Arc<Session>> = self.sessions.read().values().cloned().collect();
        for s in &sessions {
            let text = serde_json::to_string(&Snapshot::of(s)).map_err(std::io::Error::other)?;
            let tmp = dir.join(format!("{}.json.tmp", s.id));
            std::fs::write(&tmp, text)?;
            std::fs::rename(&tmp, dir.join(format!("{}.json", s.id)))?;
        }
        Ok(sessions.len())
    }

    fn restore(&self, dir: &Path) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "json") {
                let restored = std::fs::read_to_string(&path)
                    .ok()
                    .and_then(|t| serde_json::from_str::<Snapshot>(&t).ok())
                    .and_then(Snapshot::restore);
                match restored {
                    Some(s) => {
                        self.insert(s);
                    }
                    None => warn!("skipping unreadable snapshot {}", path.display()),
                }
            }
        }
        info!("restored {} sessions", self.session_count());
    }
}

/// Periodically snapshots sessions until the runtime shuts down.
pub fn spawn_snapshotter(state: Arc<AppState>, every: Duration) {
    if state.config.snapshot_dir.is_none() {
        return;
    }
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let s = state.clone();
            if let Ok(Err(e)) = tokio::task::spawn_blocking(move || s.snapshot_all()).await {
                warn!("snapshot failed: {e}");
            }
        }
    });
}

pub fn router(state: Arc<AppState>) -> Router {
    use handlers::*;
    Router::new()
        .route("/maps", get(list_maps))
        .route("/classes", get(list_classes))
        .route("/session", post(create_session))
        .route("/session/{id}/level", get(get_level).put(put_level))
        .route("/session/{id}/classes", get(get_classes).put(put_classes))
        .route("/session/{id}/tile", post(post_tile))
        .route("/session/{id}/powerup", post(post_powerup))
        .route("/session/{id}/area", post(post_area))
        .route("/session/{id}/validate", get(validate))
        .route("/session/{id}/metrics", get(metrics))
        .route("/session/{id}/predict", get(predict))
        .route("/session/{id}/suggest/classes", get(suggest_classes))
        .route("/session/{id}/suggest/powerups", get(suggest_powerups))
        .route("/session/{id}/apply-suggestion", post(apply_suggestion))
        .route("/session/{id}/load-predefined", post(load_predefined))
        .route("/session/{id}/save", post(save))
        .route("/session/{id}/log", get(export_log).post(post_log))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    serve_on(state, tokio::net::TcpListener::bind(addr).await?).await
}

pub async fn serve_on(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
