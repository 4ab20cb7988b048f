//! Command-line entry points and the HTTP service for `terracover`.

pub mod commands;
pub mod server;
