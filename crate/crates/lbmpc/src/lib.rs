//! Closed-loop simulation, configuration, IO and the experiment harness
//! around `lbmpc-core`.

pub mod closed_loop;
pub mod config;
pub mod harness;
pub mod io;
pub mod timing;

pub use config::RunConfig;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lbmpc_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("solver diverged at control tick {0}")]
    Diverged(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
}
