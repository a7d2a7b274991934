use std::path::PathBuf;

use crate::dynamics::TrajectoryRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid size: {0}")]
    GridSize(String),

    #[error("Gauss-Legendre node {index} of {nlat} did not converge")]
    NodeSolve { index: usize, nlat: usize },

    #[error("truncation {trunc} exceeds grid capability (nlat={nlat}, nlon={nlon})")]
    Truncation { trunc: usize, nlat: usize, nlon: usize },

    #[error("grid (nlat={nlat}, nlon={nlon}) cannot dealias quadratic products at truncation {trunc}")]
    Resolution { trunc: usize, nlat: usize, nlon: usize },

    #[error("field has nonzero mean {0:e}")]
    NonZeroMean(f64),

    #[error("field is identically zero")]
    ZeroField,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient has energy {energy:e} outside degree {degree}")]
    OffDegree { degree: usize, energy: f64 },

    #[error("numerical blow-up at t={time}")]
    BlowUp {
        time: f64,
        records: Vec<TrajectoryRecord>,
    },

    #[error("supremum not attained inside the search interval at s={0}; extend the nonlinearity first")]
    UnboundedSupremum(f64),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parse error in {path:?} line {line}: {msg}")]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NodeSolve { .. }
                | Error::ZeroField
                | Error::OffDegree { .. }
                | Error::BlowUp { .. }
                | Error::UnboundedSupremum(_)
                | Error::NotConverged { .. }
        )
    }
}
