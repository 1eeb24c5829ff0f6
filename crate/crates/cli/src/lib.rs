//! Orchestration behind the `leakage-audit` binary: experiment configs,
//! the train/audit/intervene pipeline, canned reproductions and run
//! manifests.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod reproduce;

pub use leakage_core::{Error, Result};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// Process exit code for an error: 2 configuration, 3 data or alignment,
/// 4 numerical degeneracy.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Alignment { .. }
        | Error::Format(_)
        | Error::Shape(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::MissingField(_)
        | Error::MissingDependency(_) => EXIT_DATA,
        Error::Numerical(_)
        | Error::DegenerateVariable(_)
        | Error::DegenerateLabel(_)
        | Error::InsufficientSamples { .. }
        | Error::Domain(_) => EXIT_NUMERICAL,
    }
}
