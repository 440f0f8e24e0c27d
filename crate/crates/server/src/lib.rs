//! Live sessions over WebSocket: a client subscribes to world snapshots and
//! may drive the robot of a social-navigation episode.
//!
//! Every episode played through a session is recorded in the same JSONL
//! format as headless runs, so it can be scored and replayed offline.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ControlMsg, Envelope, ProtocolError, ServerMsg, Snapshot, PROTOCOL_VERSION};
pub use server::{serve, ServeError, ServeOptions, ServerHandle};
pub use session::{ClientId, Session};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sessions.md")]
mod book_sessions {}
