use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quality ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid channel model: {0}")]
    InvalidChannel(String),

    #[error("invalid profit parameters: {0}")]
    InvalidParams(String),

    #[error("invalid session configuration: {0}")]
    InvalidSession(String),

    #[error("state space of {size} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u64 },

    #[error(
        "no feasible action: {num_users} users at the lowest rate need {min_total_kbps} Kbps \
         but the service rate constraint is {r_th_kbps} Kbps"
    )]
    NoFeasibleAction {
        num_users: usize,
        min_total_kbps: f64,
        r_th_kbps: f64,
    },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("malformed configuration {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("malformed policy table: {0}")]
    PolicyTable(String),

    #[error("policy table does not match the scenario: {0}")]
    PolicyMismatch(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for an infeasible model, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoFeasibleAction { .. } => 2,
            _ => 1,
        }
    }
}
