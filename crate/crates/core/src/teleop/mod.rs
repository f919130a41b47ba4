//! Real-time operator sessions over a WebSocket.

mod log;
mod protocol;
mod server;
mod session;

pub use log::{parse_log, replay, LogEntry, LogHeader, ReplayReport, LOG_VERSION};
pub use protocol::{parse_command, Command, CommandError, CommandKind, Snapshot};
pub use server::{serve, start_server, ServerHandle, ServerOptions};
pub use session::{
    Session, SessionConfig, DEFAULT_SCENE, DEFAULT_SNAPSHOT_RATE, DEFAULT_SUBSTEPS, DEFAULT_TICK_RATE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TeleopError {
    #[error("malformed command: {0}")]
    MalformedCommand(String),
    #[error("session terminated")]
    SessionTerminated,
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error("replay failed at line {line}: {message}")]
    Replay { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Locomotion(#[from] crate::locomotion::LocomotionError),
    #[error(transparent)]
    Thermics(#[from] crate::thermics::ThermicsError),
}
