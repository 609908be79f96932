//! The discrete single-pixel X-ray transform and its gradient.
//!
//! For each source the detector's ray bundle is traced once through the voxel
//! grid with a Siddon-style traversal that yields exact per-voxel
//! intersection lengths. Because the unknown is constant on each radial
//! class, lengths are accumulated per class at trace time; the resulting
//! [`PathMatrix`] is a pure geometry object reused by every transform
//! evaluation.
//!
//! With `L_r` the per-ray vector of class path lengths, the transform value
//! for one source is the mean transmitted fraction over its bundle,
//!
//! ```text
//! K(f) = (1/m²) Σ_rays exp(-⟨L_r, f⟩)   ∈ [0, 1],
//! ```
//!
//! and its gradient in class `c` is `-(1/m²) Σ_rays exp(-⟨L_r, f⟩)·L_{r,c}`.
//! Rays that miss the grid contribute `exp(0) = 1`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{generate_rays, DetectorSpec, GeometryError, RayBundle, SourceSet};
use crate::math;
use crate::phantom::{
    build_radial_map, reduce_to_profile, voxelize, PhantomError, RadialMap, RadialProfile,
    ShellPhantom,
};
use crate::vec3::{norm, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardError {
    /// Ray directions must be unit vectors (zero vectors are never valid).
    InvalidDirection,
    /// A sparse row referenced a class index outside the profile.
    ClassIndexOutOfRange { index: usize, len: usize },
    /// Profile length does not match the radial map.
    ProfileLengthMismatch { expected: usize, got: usize },
    Geometry(GeometryError),
    Phantom(PhantomError),
}

impl fmt::Display for ForwardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForwardError::InvalidDirection => {
                write!(f, "ray direction must be a unit vector")
            }
            ForwardError::ClassIndexOutOfRange { index, len } => {
                write!(f, "class index {index} out of range for profile of length {len}")
            }
            ForwardError::ProfileLengthMismatch { expected, got } => {
                write!(f, "profile length {got} does not match radial map ({expected} classes)")
            }
            ForwardError::Geometry(e) => write!(f, "{e}"),
            ForwardError::Phantom(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ForwardError {}

impl From<GeometryError> for ForwardError {
    fn from(e: GeometryError) -> Self {
        ForwardError::Geometry(e)
    }
}

impl From<PhantomError> for ForwardError {
    fn from(e: PhantomError) -> Self {
        ForwardError::Phantom(e)
    }
}

/// Per-class intersection lengths of one ray: `(class index, length)` pairs
/// with strictly increasing class indices.
pub type SparseRow = Vec<(u32, f64)>;

/// Traces a ray through the `[-1,1]^3` grid and accumulates exact
/// intersection lengths per radial class. Returns an empty row if the line
/// misses the cube. The line is traversed over its full extent, matching the
/// X-ray transform's line integral.
pub fn trace_ray(origin: Vec3, direction: Vec3, map: &RadialMap) -> Result<SparseRow, ForwardError> {
    if math::abs(norm(direction) - 1.0) > 1e-9 {
        return Err(ForwardError::InvalidDirection);
    }
    let n = map.n();
    let h = 2.0 / n as f64;

    // Clip the line against the cube with the slab method.
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for axis in 0..3 {
        if direction[axis] != 0.0 {
            let inv = 1.0 / direction[axis];
            let t1 = (-1.0 - origin[axis]) * inv;
            let t2 = (1.0 - origin[axis]) * inv;
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            if lo > t_min {
                t_min = lo;
            }
            if hi < t_max {
                t_max = hi;
            }
        } else if origin[axis] <= -1.0 || origin[axis] >= 1.0 {
            return Ok(Vec::new());
        }
    }
    if t_max <= t_min {
        return Ok(Vec::new());
    }

    // Entry voxel and per-axis traversal state.
    let mut voxel = [0isize; 3];
    let mut step = [0isize; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        let p = origin[axis] + t_min * direction[axis];
        let mut v = math::floor((p + 1.0) / h) as isize;
        if v < 0 {
            v = 0;
        }
        if v >= n as isize {
            v = n as isize - 1;
        }
        voxel[axis] = v;
        if direction[axis] > 0.0 {
            step[axis] = 1;
            let boundary = -1.0 + (v + 1) as f64 * h;
            t_next[axis] = (boundary - origin[axis]) / direction[axis];
            t_delta[axis] = h / direction[axis];
        } else if direction[axis] < 0.0 {
            step[axis] = -1;
            let boundary = -1.0 + v as f64 * h;
            t_next[axis] = (boundary - origin[axis]) / direction[axis];
            t_delta[axis] = -h / direction[axis];
        }
    }

    let classes = map.class_of_voxel();
    let ni = n as isize;
    let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(3 * n);
    let mut t_here = t_min;
    loop {
        let mut axis = 0;
        if t_next[1] < t_next[axis] {
            axis = 1;
        }
        if t_next[2] < t_next[axis] {
            axis = 2;
        }
        let t_exit = if t_next[axis] < t_max { t_next[axis] } else { t_max };
        let len = t_exit - t_here;
        if len > 0.0 {
            let idx =
                voxel[0] as usize + n * (voxel[1] as usize + n * (voxel[2] as usize));
            pairs.push((classes[idx], len));
        }
        if t_next[axis] >= t_max {
            break;
        }
        t_here = t_exit;
        voxel[axis] += step[axis];
        if voxel[axis] < 0 || voxel[axis] >= ni {
            break;
        }
        t_next[axis] += t_delta[axis];
    }

    // Merge duplicate classes (a line can revisit a class on the far side).
    pairs.sort_unstable_by_key(|&(c, _)| c);
    let mut row: SparseRow = Vec::with_capacity(pairs.len());
    for (c, len) in pairs {
        match row.last_mut() {
            Some((lc, ll)) if *lc == c => *ll += len,
            _ => row.push((c, len)),
        }
    }
    Ok(row)
}

/// Discrete line integral `Σ length · profile[class]` over one sparse row.
pub fn line_integral(profile: &RadialProfile, row: &[(u32, f64)]) -> Result<f64, ForwardError> {
    let values = profile.values();
    let mut acc = 0.0;
    for &(c, len) in row {
        let v = values
            .get(c as usize)
            .ok_or(ForwardError::ClassIndexOutOfRange { index: c as usize, len: values.len() })?;
        acc += len * v;
    }
    Ok(acc)
}

/// Sparse per-class path lengths of one source's full ray bundle, stored in
/// compressed row form (one row per ray, empty rows kept for missing rays).
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    source_id: usize,
    ray_count: usize,
    row_offsets: Vec<usize>,
    classes: Vec<u32>,
    lengths: Vec<f64>,
}

impl PathMatrix {
    /// Traces every ray of `bundle` through the grid described by `map`.
    pub fn build(source_id: usize, bundle: &RayBundle, map: &RadialMap) -> Result<Self, ForwardError> {
        let mut row_offsets = Vec::with_capacity(bundle.ray_count() + 1);
        let mut classes = Vec::new();
        let mut lengths = Vec::new();
        row_offsets.push(0);
        for dir in &bundle.directions {
            let row = trace_ray(bundle.origin, *dir, map)?;
            for (c, len) in row {
                classes.push(c);
                lengths.push(len);
            }
            row_offsets.push(classes.len());
        }
        Ok(Self {
            source_id,
            ray_count: bundle.ray_count(),
            row_offsets,
            classes,
            lengths,
        })
    }

    /// Convenience: generate the bundle for `source` and trace it.
    pub fn for_source(
        source_id: usize,
        source: Vec3,
        detector: &DetectorSpec,
        map: &RadialMap,
    ) -> Result<Self, ForwardError> {
        let bundle = generate_rays(source, detector)?;
        Self::build(source_id, &bundle, map)
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }

    pub fn ray_count(&self) -> usize {
        self.ray_count
    }

    /// Iterates rows as `(classes, lengths)` slice pairs.
    pub fn rows(&self) -> impl Iterator<Item = (&[u32], &[f64])> {
        self.row_offsets.windows(2).map(move |w| {
            (&self.classes[w[0]..w[1]], &self.lengths[w[0]..w[1]])
        })
    }

    /// Largest class index referenced, if any row is non-empty.
    pub fn max_class(&self) -> Option<u32> {
        self.classes.iter().copied().max()
    }
}

#[inline]
fn row_integral(values: &[f64], classes: &[u32], lengths: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (c, len) in classes.iter().zip(lengths) {
        acc += len * values[*c as usize];
    }
    acc
}

fn check_profile(profile: &RadialProfile, paths: &PathMatrix) -> Result<(), ForwardError> {
    if let Some(max) = paths.max_class() {
        if max as usize >= profile.len() {
            return Err(ForwardError::ClassIndexOutOfRange {
                index: max as usize,
                len: profile.len(),
            });
        }
    }
    Ok(())
}

/// The discrete single-pixel transform for one source: mean of
/// `exp(-line integral)` over the ray bundle. Always lies in `[0, 1]` for
/// non-negative profiles.
pub fn k_transform(profile: &RadialProfile, paths: &PathMatrix) -> Result<f64, ForwardError> {
    check_profile(profile, paths)?;
    Ok(k_transform_unchecked(profile.values(), paths))
}

/// Gradient of [`k_transform`] with respect to the profile.
pub fn k_gradient(profile: &RadialProfile, paths: &PathMatrix) -> Result<Vec<f64>, ForwardError> {
    check_profile(profile, paths)?;
    let mut grad = vec![0.0; profile.len()];
    k_gradient_scaled_into_unchecked(profile.values(), paths, 1.0, &mut grad);
    Ok(grad)
}

/// Transform value on raw class values; callers must have validated that
/// every class index referenced by `paths` is in range.
pub(crate) fn k_transform_unchecked(values: &[f64], paths: &PathMatrix) -> f64 {
    let mut acc = 0.0;
    for (classes, lengths) in paths.rows() {
        acc += math::exp(-row_integral(values, classes, lengths));
    }
    acc / paths.ray_count as f64
}

/// Accumulates `scale · ∇K(values)` into `acc` and returns the transform
/// value; shares one attenuation pass between value and gradient.
pub(crate) fn k_gradient_scaled_into_unchecked(
    values: &[f64],
    paths: &PathMatrix,
    scale: f64,
    acc: &mut [f64],
) -> f64 {
    let inv_rays = 1.0 / paths.ray_count as f64;
    let mut k_acc = 0.0;
    for (classes, lengths) in paths.rows() {
        let attenuation = math::exp(-row_integral(values, classes, lengths));
        k_acc += attenuation;
        let w = scale * attenuation * inv_rays;
        for (c, len) in classes.iter().zip(lengths) {
            acc[*c as usize] -= w * len;
        }
    }
    k_acc * inv_rays
}

/// Measurements of one object: source positions with clean and
/// noise-perturbed transform values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub positions: Vec<Vec3>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Applies relative Gaussian noise in source order:
/// `noisy_i = clean_i · (1 + level · z_i)` with `z_i` standard normal from a
/// ChaCha8 generator seeded with `seed`.
pub fn apply_noise(clean: &[f64], level: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clean
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            c * (1.0 + level * z)
        })
        .collect()
}

/// Synthesizes a measurement set for `phantom`: voxelize on an `n`-per-axis
/// grid, reduce to the radial profile, evaluate the transform per source, and
/// perturb with relative Gaussian noise. Passing the reconstruction grid size
/// keeps the data in inverse-crime mode; a larger `n` probes discretization
/// error.
pub fn simulate(
    phantom: &ShellPhantom,
    sources: &SourceSet,
    detector: &DetectorSpec,
    n: usize,
    noise_level: f64,
    seed: u64,
) -> Result<MeasurementSet, ForwardError> {
    let map = build_radial_map(n)?;
    let grid = voxelize(phantom, n)?;
    let profile = reduce_to_profile(&grid, &map)?;
    let mut clean = Vec::with_capacity(sources.len());
    for (id, &pos) in sources.positions().iter().enumerate() {
        let paths = PathMatrix::for_source(id, pos, detector, &map)?;
        clean.push(k_transform(&profile, &paths)?);
    }
    let noisy = if noise_level == 0.0 { clean.clone() } else { apply_noise(&clean, noise_level, seed) };
    Ok(MeasurementSet {
        positions: sources.positions().to_vec(),
        clean,
        noisy,
        noise_level,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_sources;

    #[test]
    fn axis_aligned_chord() {
        let map = build_radial_map(20).unwrap();
        let row = trace_ray([-2.0, 0.05, 0.05], [1.0, 0.0, 0.0], &map).unwrap();
        let total: f64 = row.iter().map(|&(_, l)| l).sum();
        assert!((total - 2.0).abs() < 1e-12);
        // 20 voxels of length 0.1 each, accumulated per class
        let count: usize = 20;
        let per_class_total: f64 = row.iter().map(|&(_, l)| l).sum();
        assert!((per_class_total / count as f64 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn missing_ray_empty_row() {
        let map = build_radial_map(8).unwrap();
        let row = trace_ray([-2.0, 5.0, 0.0], [1.0, 0.0, 0.0], &map).unwrap();
        assert!(row.is_empty());
    }

    #[test]
    fn non_unit_direction_rejected() {
        let map = build_radial_map(4).unwrap();
        assert!(matches!(
            trace_ray([0.0, 0.0, -3.0], [0.0, 0.0, 0.0], &map),
            Err(ForwardError::InvalidDirection)
        ));
        assert!(matches!(
            trace_ray([0.0, 0.0, -3.0], [0.0, 0.0, 2.0], &map),
            Err(ForwardError::InvalidDirection)
        ));
    }

    #[test]
    fn line_integral_zero_profile() {
        let map = build_radial_map(10).unwrap();
        let profile = RadialProfile::zeros(map.class_count());
        let row = trace_ray([-2.0, 0.11, -0.07], [1.0, 0.0, 0.0], &map).unwrap();
        assert_eq!(line_integral(&profile, &row).unwrap(), 0.0);
    }

    #[test]
    fn line_integral_index_out_of_range() {
        let profile = RadialProfile::zeros(2);
        let row = vec![(5u32, 0.3)];
        assert!(matches!(
            line_integral(&profile, &row),
            Err(ForwardError::ClassIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn k_transform_zero_profile_is_one() {
        let map = build_radial_map(10).unwrap();
        let det = DetectorSpec::new(6.0, 4.0, 4).unwrap();
        let paths = PathMatrix::for_source(0, [3.0, 0.0, 0.0], &det, &map).unwrap();
        let profile = RadialProfile::zeros(map.class_count());
        assert_eq!(k_transform(&profile, &paths).unwrap(), 1.0);
    }

    #[test]
    fn gradient_at_zero_profile_is_negative_mean_length() {
        // single axis-aligned central ray: at f = 0 the attenuation factor is
        // one, so each gradient entry is -(length in that class)
        let map = build_radial_map(20).unwrap();
        let row = trace_ray([-3.0, 0.0, 0.0], [1.0, 0.0, 0.0], &map).unwrap();
        let det = DetectorSpec::new(6.0, 4.0, 1).unwrap();
        let paths = PathMatrix::for_source(0, [3.0, 0.0, 0.0], &det, &map).unwrap();
        let profile = RadialProfile::zeros(map.class_count());
        let grad = k_gradient(&profile, &paths).unwrap();
        for &(c, len) in &row {
            assert!((grad[c as usize] + len).abs() < 1e-12);
        }
        let nnz = grad.iter().filter(|&&g| g != 0.0).count();
        assert_eq!(nnz, row.len());
    }

    #[test]
    fn simulate_zero_noise_bitwise() {
        let phantom = ShellPhantom::two_shell();
        let sources = generate_sources(7, 3.0).unwrap();
        let det = DetectorSpec::new(6.0, 4.0, 3).unwrap();
        let m = simulate(&phantom, &sources, &det, 8, 0.0, 99).unwrap();
        assert_eq!(m.clean, m.noisy);
        assert!(m.clean.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn noise_statistics() {
        let clean = vec![0.5; 100_000];
        let noisy = apply_noise(&clean, 0.01, 1234);
        let rel: Vec<f64> = clean
            .iter()
            .zip(&noisy)
            .map(|(c, n)| (n - c) / c)
            .collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let var = rel.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rel.len() as f64;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.01 * 0.02, "std = {std}");
        assert!(mean.abs() < 1e-4);
    }
}
