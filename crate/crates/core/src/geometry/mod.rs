//! Shape statistics and rim geometry extracted from disc/cup masks.

mod components;
mod features;
mod rim;
mod shape;

pub use components::largest_component;
pub use features::{compute_features, FeatureVector, FEATURE_NAMES};
pub use rim::{boundary_distance_at_angle, quadrant_means, rim_profile, QuadrantMeans, RimProfile};
pub use shape::{shape_stats, ShapeStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mask has no true pixels")]
    EmptyMask,
    #[error("ray center ({x}, {y}) lies outside the {w}x{h} image")]
    CenterOutsideImage { x: f64, y: f64, w: usize, h: usize },
    #[error("disc major axis is zero; rim profile undefined")]
    ZeroMajorAxis,
}
