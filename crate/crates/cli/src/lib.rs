//! Runner, benchmark harness and snapshot recorder behind the `swarmstep` binary.

pub mod bench;
pub mod record;
pub mod runtime;
pub mod stats;

use std::path::{Path, PathBuf};

use swarmstep_core::sim::{SimConfig, SimError};

/// Caps the worker pool used by parallel groups.
pub const THREADS_ENV: &str = "SWARMSTEP_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config not found: {}", .0.display())]
    ConfigNotFound(PathBuf),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("could not open endpoints: {0}")]
    Endpoints(std::io::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] swarmstep_wire::WireError),
    #[error(transparent)]
    Client(#[from] swarmstep_wire::ClientError),
    #[error("invalid benchmark: {0}")]
    Bench(String),
    #[error("{name}={value:?} is not a positive integer")]
    Env { name: &'static str, value: String },
}

/// Loads and validates a run configuration.
pub fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    if !path.is_file() {
        return Err(CliError::ConfigNotFound(path.to_path_buf()));
    }
    Ok(SimConfig::load(path)?)
}

/// Reads the thread cap from the environment. `None` if unset.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Env { name: THREADS_ENV, value: v }),
        },
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`]. Call once, before any
/// parallel work.
pub fn init_threads() -> Result<Option<usize>, CliError> {
    let cap = thread_cap()?;
    if let Some(n) = cap {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool already initialized; {THREADS_ENV} ignored: {e}");
        }
    }
    Ok(cap)
}
