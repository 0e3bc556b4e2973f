//! Interactive embedding sessions: steer a running minimization and watch it live.

mod app;
pub mod protocol;
pub mod session;

pub use app::{router, serve, AppState, ServerConfig};
pub use session::{Frame, SessionEngine};
