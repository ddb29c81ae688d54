//! Command-line front end and WebSocket bridge for faime devices.
//!
//! Exit codes: 0 ok, 1 validation failure, 2 I/O or parse failure,
//! 3 socket bind failure.

pub mod bridge;
pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_BIND: i32 = 3;
