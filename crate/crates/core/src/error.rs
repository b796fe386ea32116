use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("spot data row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("spot data: duplicate hour {hour} (row {row})")]
    DuplicateHour { hour: usize, row: usize },
    #[error("spot data: no observations")]
    NoObservations,
    #[error("spot data: {0}")]
    InvalidSpot(String),
    #[error("unknown case name `{0}` (expected BM, A, B, Flexibility)")]
    UnknownCase(String),
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("invalid scenario set: {0}")]
    InvalidScenarios(String),
    #[error("scenario generation: {0}")]
    Generation(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("infeasible decision: {0}")]
    Infeasible(String),
    #[error("instance too large for {what}: {detail}")]
    TooLarge { what: &'static str, detail: String },
    #[error("solver: {0}")]
    Solver(String),
    #[error("equilibrium: {0}")]
    Equilibrium(#[from] crate::equilibrium::EquilibriumError),
    #[error("config: {0}")]
    Config(String),
}
