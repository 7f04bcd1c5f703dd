//! The eight-element classifier feature vector.

use super::components::largest_component;
use super::rim::{quadrant_means, rim_profile};
use super::shape::shape_stats;
use super::GeometryError;
use crate::imaging::BinaryMask;

/// Classifier inputs, in the order they are serialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    /// Cup area / disc area.
    pub acdr: f64,
    /// Cup major axis / disc major axis.
    pub dcdr: f64,
    pub cup_diameter: f64,
    pub disc_diameter: f64,
    pub cup_area: f64,
    pub disc_area: f64,
    /// Mean normalized rim thickness over the superior quadrant.
    pub s_distance: f64,
    /// Mean normalized rim thickness over the inferior quadrant.
    pub i_distance: f64,
}

pub const FEATURE_NAMES: [&str; 8] = [
    "acdr",
    "dcdr",
    "cup_diameter",
    "disc_diameter",
    "cup_area",
    "disc_area",
    "s_distance",
    "i_distance",
];

impl FeatureVector {
    pub fn to_array(self) -> [f64; 8] {
        [
            self.acdr,
            self.dcdr,
            self.cup_diameter,
            self.disc_diameter,
            self.cup_area,
            self.disc_area,
            self.s_distance,
            self.i_distance,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            acdr: a[0],
            dcdr: a[1],
            cup_diameter: a[2],
            disc_diameter: a[3],
            cup_area: a[4],
            disc_area: a[5],
            s_distance: a[6],
            i_distance: a[7],
        }
    }
}

/// Extracts the feature vector from a disc/cup mask pair.
///
/// Both masks are reduced to their largest 4-connected component first. The
/// disc must be non-empty; an empty cup yields zero CDRs and cup stats, with
/// the rim profile computed against a cup distance of 0 everywhere.
pub fn compute_features(
    disc: &BinaryMask,
    cup: &BinaryMask,
) -> Result<FeatureVector, GeometryError> {
    let disc = largest_component(disc);
    let cup = largest_component(cup);
    let disc_stats = shape_stats(&disc)?; // EmptyMask if the disc vanished
    let profile = rim_profile(&disc, &cup)?;
    let quadrants = quadrant_means(&profile);

    let (cup_area, cup_diameter) = match shape_stats(&cup) {
        Ok(s) => (s.area, s.major_axis_len),
        Err(GeometryError::EmptyMask) => (0.0, 0.0),
        Err(e) => return Err(e),
    };

    Ok(FeatureVector {
        acdr: cup_area / disc_stats.area,
        dcdr: if disc_stats.major_axis_len > 0.0 {
            cup_diameter / disc_stats.major_axis_len
        } else {
            0.0
        },
        cup_diameter,
        disc_diameter: disc_stats.major_axis_len,
        cup_area,
        disc_area: disc_stats.area,
        s_distance: quadrants.superior,
        i_distance: quadrants.inferior,
    })
}
