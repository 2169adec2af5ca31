//! Live unknown-word detection over TCP and WebSocket, and the `lexgaze`
//! command line that produces its inputs.

pub mod cli;
pub mod config;
pub mod dictionary;
pub mod protocol;
pub mod server;
pub mod store;
