//! Live control service for the gesture-to-gait engine: the JSON message
//! protocol, a transport-free session, and the WebSocket server.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{Envelope, ErrorCode, Hello, Role, SessionMsg, TelemetryMsg};
pub use server::{router, serve, ServeError, WS_PATH};
pub use session::ControlSession;
