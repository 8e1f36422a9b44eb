//! Library side of the `frameguard` command-line tool.

pub mod backend;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;
pub mod plot;
