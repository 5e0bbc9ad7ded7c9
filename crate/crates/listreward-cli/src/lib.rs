//! Command implementations behind the `listreward` binary, exposed as a
//! library so integration tests can drive them in-process.

pub mod convert;
pub mod eval;
pub mod manifest;
pub mod report;
pub mod responses;
pub mod reval;
pub mod score;
pub mod service;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes shared by all subcommands.
pub mod exit {
    pub const SCHEMA: i32 = 2;
    pub const JUDGE_UNAVAILABLE: i32 = 3;
}
