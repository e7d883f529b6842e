//! Library half of the `lexdyn` command: config loading, CSV logs and the
//! shipped scenarios.

pub mod config;
pub mod csvlog;
pub mod dump;
pub mod scenarios;
