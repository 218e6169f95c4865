use std::path::PathBuf;

use gridmpc_milp::{MilpError, SolveStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("scenario has {found} hours, at least {required} required")]
    TooShort { found: usize, required: usize },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid battery parameters: {0}")]
    Battery(String),

    #[error("invalid lifecycle curve: {0}")]
    Curve(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("forecast needs two known hours, history has {0}")]
    InsufficientHistory(usize),

    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    Empty,

    #[error("charge and discharge power are both nonzero ({p_ch}, {p_dis})")]
    SimultaneousPower { p_ch: f64, p_dis: f64 },

    #[error("total weighted load is zero")]
    ZeroLoad,

    #[error(transparent)]
    Milp(#[from] MilpError),

    #[error("solver returned {status:?} at hour {hour}{detail}")]
    Solver {
        hour: usize,
        status: SolveStatus,
        detail: String,
    },
}

impl Error {
    /// True for failures inside the optimizer rather than in user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Solver { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
