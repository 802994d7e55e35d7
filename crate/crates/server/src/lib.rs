//! HTTP service and command-line driver for the ewcell simulator.

pub mod api;
pub mod cli;
pub mod session;

use std::path::Path;
use std::sync::Arc;

use ewcell::persist::{load_cell, CellFile};

pub use api::router;
pub use session::{default_cell, Shared};

/// Session over a cell file, or over the demo cell when no path is given.
pub fn open_session(path: Option<&Path>) -> Result<Arc<Shared>, session::SessionError> {
    let file = match path {
        Some(p) => load_cell(p)?,
        None => CellFile::from_cell(&default_cell()),
    };
    Shared::new(file)
}

/// Binds `host:port` and serves until interrupted.
pub async fn serve(shared: Arc<Shared>, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(shared))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
