//! HTTP+JSON service over [`arac_core::Platform`], plus the pieces the
//! `arac` binary is built from.

pub mod api;
pub mod config;
pub mod endpoints;
pub mod error;

use std::net::SocketAddr;
use std::sync::Arc;

use arac_core::Platform;
use tokio::net::TcpListener;

pub use api::router;
pub use config::Config;
pub use endpoints::{Access, Endpoint, ENDPOINTS};
pub use error::{ApiError, ErrorBody};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Platform(#[from] arac_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opens storage and creates the bootstrap admin if configured.
pub fn open_platform(config: &Config) -> Result<Arc<Platform>, ServerError> {
    let platform = Platform::open(&config.storage, config.platform())?;
    if let Some(admin) = &config.bootstrap {
        if let Some(user) = platform.bootstrap_admin(&admin.login, &admin.password)? {
            tracing::info!(login = %user.login, "created bootstrap admin");
        }
    }
    Ok(Arc::new(platform))
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServerError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::BindFailure { addr, source })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    platform: Arc<Platform>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let app = router(platform);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
