//! Command-line workflows: property suites, training runs and bound reports.

pub mod commands;
pub mod config;
pub mod data;
pub mod report;
pub mod suites;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical { .. } | Error::RankDeficient { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}
