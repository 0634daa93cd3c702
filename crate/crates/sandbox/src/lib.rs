//! Real-time bridge between `sew-core` and the browser sandbox.
//!
//! A client streams keypoint `update`s and `config` changes over a
//! WebSocket; each connection owns a [`session::Session`] whose replies are
//! `state` or `error` messages.

pub mod protocol;
pub mod server;
pub mod session;

pub use session::Session;
