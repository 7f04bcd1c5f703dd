//! Rim-thickness profile and ISNT quadrant means.
//!
//! Angle convention: θ = 0° points to the top of the image (decreasing row)
//! and grows clockwise, so the inferior range [136°, 225°] covers the bottom.

use super::shape::shape_stats;
use super::GeometryError;
use crate::imaging::BinaryMask;

/// Ray sampling step in pixels.
const RAY_STEP: f64 = 0.25;

/// The four ISNT angle sets on the integer degree grid; together they
/// partition 0..360.
pub const SUPERIOR_ANGLES: (
    std::ops::RangeInclusive<usize>,
    std::ops::RangeInclusive<usize>,
) = (0..=45, 316..=359);
pub const TEMPORAL_ANGLES: std::ops::RangeInclusive<usize> = 46..=135;
pub const INFERIOR_ANGLES: std::ops::RangeInclusive<usize> = 136..=225;
pub const NASAL_ANGLES: std::ops::RangeInclusive<usize> = 226..=315;

/// Distance from `center` to the farthest true pixel along the ray at `theta`
/// degrees, or `None` if the ray never crosses the mask.
///
/// The ray is sampled every 0.25 px out to the image border; each sample is
/// rounded to its nearest pixel and the reported distance is the ray length
/// at the farthest sample landing on a true pixel.
pub fn boundary_distance_at_angle(
    mask: &BinaryMask,
    center: (f64, f64),
    theta_deg: f64,
) -> Result<Option<f64>, GeometryError> {
    let (cx, cy) = center;
    let (w, h) = (mask.width(), mask.height());
    if cx < 0.0 || cy < 0.0 || cx > (w - 1) as f64 || cy > (h - 1) as f64 {
        return Err(GeometryError::CenterOutsideImage { x: cx, y: cy, w, h });
    }
    let rad = theta_deg.to_radians();
    // 0° is up (decreasing row), clockwise
    let dx = rad.sin();
    let dy = -rad.cos();
    let max_t = ((w * w + h * h) as f64).sqrt();
    let mut best: Option<f64> = None;
    let mut t = 0.0;
    while t <= max_t {
        let px = cx + t * dx;
        let py = cy + t * dy;
        let ix = px.round() as isize;
        let iy = py.round() as isize;
        if ix < 0 || iy < 0 || ix >= w as isize || iy >= h as isize {
            break;
        }
        if mask.contains(ix, iy) {
            best = Some(t);
        }
        t += RAY_STEP;
    }
    Ok(best)
}

/// 360-sample rim-thickness profile.
#[derive(Clone, Debug)]
pub struct RimProfile {
    /// Rim thickness per integer degree: disc distance minus cup distance,
    /// both measured from the disc center.
    pub t: Vec<f64>,
    /// Normalized thickness: t / k.
    pub x: Vec<f64>,
    /// Disc major axis used for normalization.
    pub k: f64,
    /// Angles where the cup ray found no boundary (cup distance taken as 0).
    pub fallback_count: usize,
}

/// Computes the rim profile of a disc/cup mask pair.
///
/// The center is the disc centroid and both boundary distances are measured
/// from it. A ray that misses the cup contributes a cup distance of 0 and is
/// counted in `fallback_count`, which keeps the profile defined for
/// degenerate predictions.
pub fn rim_profile(disc: &BinaryMask, cup: &BinaryMask) -> Result<RimProfile, GeometryError> {
    let stats = shape_stats(disc)?;
    let k = stats.major_axis_len;
    if k <= 0.0 {
        return Err(GeometryError::ZeroMajorAxis);
    }
    let center = stats.centroid;
    let mut t = Vec::with_capacity(360);
    let mut fallback = 0usize;
    for deg in 0..360 {
        let d_disc = boundary_distance_at_angle(disc, center, deg as f64)?.unwrap_or(0.0);
        let d_cup = match boundary_distance_at_angle(cup, center, deg as f64)? {
            Some(d) => d,
            None => {
                fallback += 1;
                0.0
            }
        };
        t.push(d_disc - d_cup);
    }
    let x = t.iter().map(|&v| v / k).collect();
    Ok(RimProfile {
        t,
        x,
        k,
        fallback_count: fallback,
    })
}

/// Mean normalized rim thickness per ISNT quadrant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrantMeans {
    pub inferior: f64,
    pub superior: f64,
    pub nasal: f64,
    pub temporal: f64,
}

pub fn quadrant_means(profile: &RimProfile) -> QuadrantMeans {
    let mean = |angles: &mut dyn Iterator<Item = usize>| {
        let mut sum = 0.0;
        let mut n = 0usize;
        for a in angles {
            sum += profile.x[a];
            n += 1;
        }
        sum / n as f64
    };
    QuadrantMeans {
        inferior: mean(&mut INFERIOR_ANGLES.clone()),
        superior: mean(&mut SUPERIOR_ANGLES.0.clone().chain(SUPERIOR_ANGLES.1.clone())),
        nasal: mean(&mut NASAL_ANGLES.clone()),
        temporal: mean(&mut TEMPORAL_ANGLES.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::ellipse_mask;

    fn circle(r: f64) -> BinaryMask {
        ellipse_mask(200, 200, 100.0, 100.0, r, r, 0.0)
    }

    #[test]
    fn circle_distance_is_radius_at_every_angle() {
        // rasterization can push the last on-ray pixel center up to half a
        // pixel diagonal off the geometric boundary, hence the 0.75 band
        let m = circle(64.0);
        for deg in 0..360 {
            let d = boundary_distance_at_angle(&m, (100.0, 100.0), deg as f64)
                .unwrap()
                .expect("ray must hit the circle");
            assert!((d - 64.0).abs() <= 0.75, "deg {deg}: d = {d}");
        }
    }

    #[test]
    fn ray_missing_the_mask_returns_none() {
        let mut m = BinaryMask::empty(50, 50);
        m.set(40, 25, true); // due east of center
        let d = boundary_distance_at_angle(&m, (25.0, 25.0), 270.0).unwrap();
        assert!(d.is_none(), "westward ray must miss the single pixel");
    }

    #[test]
    fn annulus_reports_the_farthest_intersection() {
        let outer = circle(64.0);
        let inner = circle(32.0);
        let data = outer
            .data()
            .iter()
            .zip(inner.data())
            .map(|(&o, &i)| o && !i)
            .collect();
        let ring = BinaryMask::new(200, 200, data).unwrap();
        for deg in (0..360).step_by(15) {
            let d = boundary_distance_at_angle(&ring, (100.0, 100.0), deg as f64)
                .unwrap()
                .expect("ray crosses the ring");
            assert!((d - 64.0).abs() <= 0.75, "deg {deg}: d = {d}");
        }
    }

    #[test]
    fn center_outside_image_is_an_error() {
        let m = circle(10.0);
        assert!(matches!(
            boundary_distance_at_angle(&m, (500.0, 10.0), 0.0),
            Err(GeometryError::CenterOutsideImage { .. })
        ));
    }

    #[test]
    fn angle_zero_points_up_and_grows_clockwise() {
        let mut m = BinaryMask::empty(21, 21);
        m.set(10, 2, true); // above center
        let up = boundary_distance_at_angle(&m, (10.0, 10.0), 0.0).unwrap();
        assert!(up.is_some());
        let mut e = BinaryMask::empty(21, 21);
        e.set(18, 10, true); // right of center
        let east = boundary_distance_at_angle(&e, (10.0, 10.0), 90.0).unwrap();
        assert!(east.is_some());
        assert!(boundary_distance_at_angle(&e, (10.0, 10.0), 270.0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn concentric_profile_is_flat() {
        let disc = circle(64.0);
        let cup = circle(32.0);
        let p = rim_profile(&disc, &cup).unwrap();
        assert_eq!(p.fallback_count, 0);
        for (deg, &t) in p.t.iter().enumerate() {
            assert!((t - 32.0).abs() <= 1.0, "deg {deg}: t = {t}");
        }
        for &x in &p.x {
            assert!((x - 0.25).abs() <= 0.01, "x = {x}");
        }
    }

    #[test]
    fn cup_equal_to_disc_gives_near_zero_profile() {
        let disc = circle(48.0);
        let p = rim_profile(&disc, &disc).unwrap();
        for &t in &p.t {
            assert!(t.abs() <= 1.0, "t = {t}");
        }
    }

    #[test]
    fn empty_disc_is_an_error() {
        let empty = BinaryMask::empty(10, 10);
        let cup = circle(5.0);
        assert!(matches!(
            rim_profile(&empty, &cup),
            Err(GeometryError::EmptyMask)
        ));
    }

    #[test]
    fn single_pixel_disc_has_zero_axis() {
        let mut disc = BinaryMask::empty(10, 10);
        disc.set(5, 5, true);
        assert!(matches!(
            rim_profile(&disc, &disc),
            Err(GeometryError::ZeroMajorAxis)
        ));
    }

    #[test]
    fn shifted_cup_thins_the_inferior_rim() {
        // cup shifted 16 px toward the image bottom: the minimum rim
        // thickness must land in the inferior quadrant [136, 225]
        let disc = circle(64.0);
        let cup = ellipse_mask(200, 200, 100.0, 116.0, 32.0, 32.0, 0.0);
        let p = rim_profile(&disc, &cup).unwrap();
        let (argmin, _) =
            p.t.iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
        assert!(
            INFERIOR_ANGLES.contains(&argmin),
            "min rim thickness at {argmin}°"
        );
    }

    #[test]
    fn quadrants_partition_the_circle() {
        let mut seen = vec![0u8; 360];
        for a in SUPERIOR_ANGLES.0.clone().chain(SUPERIOR_ANGLES.1.clone()) {
            seen[a] += 1;
        }
        for a in TEMPORAL_ANGLES {
            seen[a] += 1;
        }
        for a in INFERIOR_ANGLES {
            seen[a] += 1;
        }
        for a in NASAL_ANGLES {
            seen[a] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn quadrant_means_of_flat_profile() {
        let p = RimProfile {
            t: vec![32.0; 360],
            x: vec![0.25; 360],
            k: 128.0,
            fallback_count: 0,
        };
        let q = quadrant_means(&p);
        assert_eq!(q.inferior, 0.25);
        assert_eq!(q.superior, 0.25);
        assert_eq!(q.nasal, 0.25);
        assert_eq!(q.temporal, 0.25);
    }

    #[test]
    fn quadrant_means_pick_up_an_indicator_profile() {
        let mut x = vec![0.3; 360];
        for a in INFERIOR_ANGLES {
            x[a] = 0.0;
        }
        let p = RimProfile {
            t: x.iter().map(|v| v * 128.0).collect(),
            x,
            k: 128.0,
            fallback_count: 0,
        };
        let q = quadrant_means(&p);
        assert_eq!(q.inferior, 0.0);
        assert!((q.superior - 0.3).abs() < 1e-12);
    }
}
