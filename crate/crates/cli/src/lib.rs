//! Command-line front end: configuration, kernel cache, reports, subcommands
//! and the acceptance suite behind `verify`.

pub mod cache;
pub mod commands;
pub mod config;
pub mod report;
pub mod suite;

use config::ConfigError;

/// Exit status of a failed run: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some()
            || matches!(
                cause.downcast_ref::<negcurv::Error>(),
                Some(negcurv::Error::Config(_))
            )
        {
            return 2;
        }
    }
    1
}
