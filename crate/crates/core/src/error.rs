use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("position {x} lies outside the slab [0, {length}]")]
    Domain { x: f64, length: f64 },

    #[error("region interface at x = {x} is not an edge of the coarsest grid (I0 = {cells})")]
    UnresolvedInterface { x: f64, cells: usize },

    #[error("singular low-order system on level {level} (pivot {pivot} at row {row})")]
    Singular { level: usize, row: usize, pivot: f64 },

    #[error("low-order solve on level {level} left relative residual {residual:e}")]
    Residual { level: usize, residual: f64 },

    #[error("particle history exceeded {cap} events (seed stream {stream:?})")]
    EventCap { cap: u64, stream: (u64, usize, u64, u64) },

    #[error("source iteration did not converge in {iterations} sweeps (spectral radius ~ {spectral_radius:.4})")]
    NoConvergence { iterations: usize, spectral_radius: f64 },

    #[error("negative angular flux {value:e} in discrete ordinates sweep (direction {direction}, cell {cell})")]
    NegativeFlux { direction: usize, cell: usize, value: f64 },

    #[error("sample budget exceeded: {requested} realizations requested, cap is {cap}")]
    Budget { requested: usize, cap: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Self::Internal(msg.into())
    }
}
