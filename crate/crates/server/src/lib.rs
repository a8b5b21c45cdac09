//! HTTP API and command-line front end over `jcalens-core`.

pub mod api;
pub mod cli;
