//! Source placement on a surrounding sphere and per-source detector ray
//! bundles.
//!
//! Sources sit on a Fibonacci spherical lattice (deterministic, quasi-uniform
//! coverage of the full sphere). Each source looks at a flat square
//! single-pixel detector perpendicular to the source-to-center axis; the
//! detector is sampled on an m×m cell-centered grid, one ray per sample.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::math;
use crate::vec3::{add, cross, normalize, scale, sub, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Source sphere radius must exceed the object support radius 1.
    SourceInsideObject { radius: f64 },
    /// At least one source position is required.
    EmptySourceSet,
    /// Detector parameters must be positive.
    InvalidDetector,
    /// The cone from the source through the detector corners misses part of
    /// the unit ball.
    ConeTooNarrow,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::SourceInsideObject { radius } => {
                write!(f, "source radius {radius} must be > 1 (outside the object support)")
            }
            GeometryError::EmptySourceSet => write!(f, "source count must be >= 1"),
            GeometryError::InvalidDetector => {
                write!(f, "detector distance, side and rays_per_axis must be positive")
            }
            GeometryError::ConeTooNarrow => {
                write!(f, "detector cone does not contain the unit ball")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

/// Source positions on a sphere of radius > 1 around the object.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    positions: Vec<Vec3>,
    radius: f64,
}

impl SourceSet {
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Places `count` sources on a Fibonacci spherical lattice scaled to
/// `radius`. Fully deterministic: equal arguments give identical bits.
pub fn generate_sources(count: usize, radius: f64) -> Result<SourceSet, GeometryError> {
    if count == 0 {
        return Err(GeometryError::EmptySourceSet);
    }
    if !(radius > 1.0) || !radius.is_finite() {
        return Err(GeometryError::SourceInsideObject { radius });
    }
    let golden_angle = PI * (3.0 - math::sqrt(5.0));
    let positions = (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r_xy = math::sqrt((1.0 - z * z).max(0.0));
            let phi = golden_angle * i as f64;
            scale([r_xy * math::cos(phi), r_xy * math::sin(phi), z], radius)
        })
        .collect();
    Ok(SourceSet { positions, radius })
}

/// A flat square single-pixel detector.
///
/// The detector plane is perpendicular to the source-to-center axis at
/// `distance` beyond the source and is sampled as a `rays_per_axis` ×
/// `rays_per_axis` cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub distance: f64,
    pub side: f64,
    pub rays_per_axis: usize,
}

impl DetectorSpec {
    pub fn new(distance: f64, side: f64, rays_per_axis: usize) -> Result<Self, GeometryError> {
        if !(distance > 0.0) || !(side > 0.0) || rays_per_axis == 0 {
            return Err(GeometryError::InvalidDetector);
        }
        Ok(Self { distance, side, rays_per_axis })
    }

    /// Number of rays in a bundle.
    pub fn ray_count(&self) -> usize {
        self.rays_per_axis * self.rays_per_axis
    }

    /// Checks that the cone from a source at `source_norm` through the
    /// detector corners contains the unit ball: the corner half-angle
    /// `atan(side·√2/2 / distance)` must reach the ball's angular radius
    /// `asin(1/source_norm)`, i.e. `side·√2/2 · √(source_norm²-1) ≥ distance`.
    pub fn check_cone_containment(&self, source_norm: f64) -> Result<(), GeometryError> {
        if !(source_norm > 1.0) {
            return Err(GeometryError::SourceInsideObject { radius: source_norm });
        }
        let half_diag = self.side * math::sqrt(2.0) / 2.0;
        if half_diag * math::sqrt(source_norm * source_norm - 1.0) >= self.distance {
            Ok(())
        } else {
            Err(GeometryError::ConeTooNarrow)
        }
    }
}

/// One source position together with the unit directions toward every
/// detector sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBundle {
    pub origin: Vec3,
    pub directions: Vec<Vec3>,
}

impl RayBundle {
    pub fn ray_count(&self) -> usize {
        self.directions.len()
    }
}

/// Deterministic orthonormal frame `(u, v)` spanning the plane perpendicular
/// to `axis`: the reference is the coordinate axis least aligned with `axis`
/// (first on ties).
fn plane_frame(axis: Vec3) -> (Vec3, Vec3) {
    let abs = [math::abs(axis[0]), math::abs(axis[1]), math::abs(axis[2])];
    let mut least = 0;
    if abs[1] < abs[least] {
        least = 1;
    }
    if abs[2] < abs[least] {
        least = 2;
    }
    let mut e = [0.0; 3];
    e[least] = 1.0;
    let u = normalize(cross(e, axis));
    let v = cross(axis, u);
    (u, v)
}

/// Builds the ray bundle from `source` through the detector's sample grid.
///
/// The detector center sits at `source + distance·axis` where `axis` points
/// from the source to the grid center; samples are cell centers of an m×m
/// grid over the square, so for odd m the central ray is exactly the
/// source-to-center axis.
pub fn generate_rays(source: Vec3, detector: &DetectorSpec) -> Result<RayBundle, GeometryError> {
    let source_norm = crate::vec3::norm(source);
    detector.check_cone_containment(source_norm)?;

    let axis = normalize(scale(source, -1.0));
    let (u, v) = plane_frame(axis);
    let center = add(source, scale(axis, detector.distance));
    let m = detector.rays_per_axis;

    let mut directions = Vec::with_capacity(m * m);
    for q in 0..m {
        let ov = ((q as f64 + 0.5) / m as f64 - 0.5) * detector.side;
        for p in 0..m {
            let ou = ((p as f64 + 0.5) / m as f64 - 0.5) * detector.side;
            let sample = add(center, add(scale(u, ou), scale(v, ov)));
            directions.push(normalize(sub(sample, source)));
        }
    }
    Ok(RayBundle { origin: source, directions })
}

/// Fraction of the full sphere subtended by the detector square at the
/// source: the exact rectangular-pyramid solid angle
/// `Ω = 4·asin(sin²α)` with `α = atan((side/2)/distance)`, divided by `4π`.
pub fn solid_angle_fraction(detector: &DetectorSpec) -> f64 {
    let h = detector.side / 2.0;
    let sin_alpha_sq = (h * h) / (h * h + detector.distance * detector.distance);
    math::asin(sin_alpha_sq) / PI
}
