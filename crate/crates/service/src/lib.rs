//! The game service: level catalog, sessions, a per-(session, level) queue in
//! front of the analysis engine, scoring and an append-only event log.

pub mod api;
pub mod app;
pub mod config;
pub mod score;
pub mod store;

use std::sync::Arc;

use loopinv_core::level::Level;
use tokio::net::TcpListener;

pub use api::router;
pub use app::{App, AppError};
pub use config::ServiceConfig;

/// Loads levels and the event log named by `cfg` and replays the log.
/// Blocks while replaying; call it before serving.
pub fn load_app(cfg: ServiceConfig) -> Result<Arc<App>, String> {
    let levels = Level::load_dir(&cfg.levels_dir).map_err(|e| e.to_string())?;
    if levels.is_empty() {
        return Err(format!("no levels in {}", cfg.levels_dir.display()));
    }
    let (log, records) = match &cfg.data_dir {
        Some(dir) => store::EventLog::open(dir)
            .map_err(|e| format!("event log in {}: {e}", dir.display()))?,
        None => (store::EventLog::in_memory(), Vec::new()),
    };
    tracing::info!(
        levels = levels.len(),
        records = records.len(),
        "replaying event log"
    );
    App::new(cfg, levels, log, records).map_err(|e| e.to_string())
}

pub async fn serve(listener: TcpListener, app: Arc<App>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}
