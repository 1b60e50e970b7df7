//! Ω ⊂ Θ ⊂ Υ, the piecewise-smooth speed, and travel-time depth.

pub mod chain;
pub mod depth;
pub mod model;
pub mod shape;

use thiserror::Error;

pub use chain::{bump_radius, bump_shape, shrink_sequence, DomainChain, BUMP_ASPECT};
pub use depth::{fast_march, solve_depth, DepthField};
pub use model::{
    build_speed_model, Bounds, Interface, ModelConfig, RegionConfig, SpeedFn, SpeedModel,
};
pub use shape::Shape;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("model config: {0}")]
    Config(String),
    #[error("regions '{a}' and '{b}' overlap at {x:?}")]
    OverlappingRegions { a: String, b: String, x: [f64; 2] },
    #[error("speed {c} at {x:?} outside [{c_min}, {c_max}]")]
    SpeedOutOfBounds {
        x: [f64; 2],
        c: f64,
        c_min: f64,
        c_max: f64,
    },
    #[error("malformed interface: {0}")]
    MalformedInterface(String),
    #[error("point {0:?} outside the model domain")]
    OutOfDomain([f64; 2]),
    #[error("unresolved boundary: {0}")]
    UnresolvedBoundary(String),
    #[error("domain containment: {0}")]
    Containment(String),
    #[error("travel time from the box wall to Θ is {margin}, need more than {need}")]
    UpsilonTooSmall { margin: f64, need: f64 },
    #[error("point {0:?} is not on ∂Ω")]
    PNotOnBoundary([f64; 2]),
    #[error("bump radius {eps} too small for grid spacing {h}")]
    GridTooCoarse { eps: f64, h: f64 },
}
