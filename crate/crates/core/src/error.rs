use std::path::PathBuf;

use crate::solver::IterationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("species index {0} is not in 1..=4")]
    InvalidSpecies(usize),

    #[error("degenerate state: total density is zero, velocity undefined")]
    DegenerateState,

    #[error("invalid space-time box: {0}")]
    InvalidBox(String),

    #[error("invalid data field: {0}")]
    InvalidField(String),

    #[error("data field needs at least 3 samples per axis for derivative norms (has {0}x{1})")]
    TooFewSamples(usize, usize),

    #[error("characteristic foot ({alpha}, {beta}) lies outside the {field} domain")]
    FootOutOfDomain { field: &'static str, alpha: f64, beta: f64 },

    #[error("point ({0}, {1}, {2}) lies outside the transformed domain")]
    OutsideDomain(f64, f64, f64),

    #[error("quadrature step must be positive (got {0})")]
    InvalidQuadrature(f64),

    #[error("sigma = {sigma} is below the positivity threshold 2cS = {min}")]
    SigmaTooSmall { sigma: f64, min: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("existence gate violated: pq = {pq} > 1/4")]
    GateViolation { pq: f64 },

    #[error("Picard iteration diverged after {} steps", .0.records.len())]
    Diverged(Box<IterationTrace>),

    #[error("contraction factor {0} is not below 1")]
    NotContractive(f64),

    #[error("CFL number {0} exceeds 1")]
    CflViolation(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{}{}: {msg}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        path: PathBuf,
        line: Option<usize>,
        msg: String,
    },

    #[error("csv error in {}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
