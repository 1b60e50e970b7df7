//! Forward wave solver, Cauchy-data algebra and the outside-measurement firewall.

pub mod cauchy;
pub mod outside;
pub mod solver;

use thiserror::Error;

pub use cauchy::CauchyPair;
pub use outside::{observe, observe_series, OutsideView};
pub use solver::{WaveSolver, CFL_1D, CFL_2D};

use crate::medium_geometry::GeometryError;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("duration {s} is not a whole number of steps of {dt}")]
    StepMismatch { s: f64, dt: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("data is nonzero at {nodes} nodes inside the hidden region")]
    SupportViolation { nodes: usize },
    #[error("access violation: node {node} at {point:?} lies inside the hidden region")]
    AccessViolation { node: usize, point: [f64; 2] },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
