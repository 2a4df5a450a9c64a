//! Library side of the experiment runner, kept separate from `main` so the
//! orchestration is testable.

pub mod plan;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or plan contents; exits with code 2.
    #[error("{0}")]
    Usage(String),
    /// Filesystem or serialization trouble; exits with code 1.
    #[error("{0}")]
    Io(String),
}

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "NISNEAK_CACHE_DIR";

/// Default cache file under `$NISNEAK_CACHE_DIR`, when the variable is set
/// and no explicit path was given.
pub fn env_cache_path() -> Option<std::path::PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).map(|dir| std::path::Path::new(&dir).join("evals.tsv"))
}
