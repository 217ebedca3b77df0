//! Scenario registry, configuration, and output plumbing behind the `gael`
//! binary; exposed as a library so integration tests can drive the same
//! builders the CLI uses.

pub mod config;
pub mod output;
pub mod scenarios;
