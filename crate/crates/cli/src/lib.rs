//! Command-line front end for the `nskernel` library: synthetic data,
//! training, indexing, prediction, evaluation and hashing diagnostics.

pub mod args;
pub mod artifact;
pub mod commands;
pub mod error;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};

/// Sizes the global thread pool; later calls are ignored.
pub fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers.filter(|&n| n > 0) {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already initialized");
        }
    }
}
