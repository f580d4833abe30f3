//! Command-line front end of `alignflow`: config parsing, the commands and
//! their artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
