//! Command-line front end for the `lvpat_core` pipeline.
//!
//! Each subcommand is a plain function here so that tests and the acceptance
//! harness can drive the pipeline without spawning processes.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_evaluate, cmd_experiment, cmd_extend, cmd_reconstruct, cmd_simulate, cmd_train,
    ExperimentSummary, Timing,
};
pub use config::{load_phantom, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lvpat_core::Error),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use lvpat_core::Error as E;
        match self {
            CliError::Core(E::Singular { .. } | E::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    Ok(pool.install(f))
}
