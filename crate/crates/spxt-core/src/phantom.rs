//! Shell phantoms, voxelization, and the radial-class reduction.
//!
//! Objects are rotationally symmetric densities supported in the unit ball,
//! described as nested constant-density shells. On a cubic grid over
//! `[-1,1]^3` every voxel whose center lies at the same distance from the
//! origin must carry the same value, so the 3D unknown collapses to one value
//! per *radial class*. Class membership is decided on the exact integer key
//! `(2i+1-n)^2 + (2j+1-n)^2 + (2k+1-n)^2`, never on floating-point distances.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::vec3::{norm_sq, Vec3};

/// Upper bound used for profile values; matches the solver's box constraint.
pub const DEFAULT_F_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomError {
    /// Shell radii must be strictly increasing and the last one at most 1.
    InvalidRadii,
    /// Shell densities must be non-negative and finite.
    InvalidDensity,
    /// Grid size must be at least 1.
    InvalidGridSize,
    /// Grid values must be finite and non-negative.
    InvalidGridValue,
    /// Operands were built for different grid sizes.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for PhantomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhantomError::InvalidRadii => {
                write!(f, "shell radii must be strictly increasing and end at most at 1.0")
            }
            PhantomError::InvalidDensity => write!(f, "shell densities must be finite and >= 0"),
            PhantomError::InvalidGridSize => write!(f, "grid size must be >= 1"),
            PhantomError::InvalidGridValue => write!(f, "grid values must be finite and >= 0"),
            PhantomError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for PhantomError {}

/// One constant-density shell: all points with radius in the interval
/// `(previous outer radius, outer_radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub outer_radius: f64,
    pub density: f64,
}

/// A rotationally symmetric object given as nested constant-density shells,
/// supported in the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellPhantom {
    shells: Vec<Shell>,
}

impl ShellPhantom {
    /// Builds a phantom from `(outer_radius, density)` pairs ordered inside
    /// out. Radii must be strictly increasing with the last at most 1;
    /// densities must be finite and non-negative.
    pub fn new(shells: &[(f64, f64)]) -> Result<Self, PhantomError> {
        let mut prev = 0.0;
        for &(r, rho) in shells {
            if !(r > prev) || r > 1.0 || !r.is_finite() {
                return Err(PhantomError::InvalidRadii);
            }
            if !rho.is_finite() || rho < 0.0 {
                return Err(PhantomError::InvalidDensity);
            }
            prev = r;
        }
        Ok(Self {
            shells: shells
                .iter()
                .map(|&(outer_radius, density)| Shell { outer_radius, density })
                .collect(),
        })
    }

    /// Homogeneous ball, radius 0.8, density 0.8.
    pub fn sphere() -> Self {
        Self::new(&[(0.8, 0.8)]).expect("valid preset")
    }

    /// Two shells: radii 0.4, 0.8 with densities 0.8, 0.4.
    pub fn two_shell() -> Self {
        Self::new(&[(0.4, 0.8), (0.8, 0.4)]).expect("valid preset")
    }

    /// Three shells: radii 0.4, 0.6, 0.8 with densities 0.8, 0.4, 0.2.
    pub fn three_shell() -> Self {
        Self::new(&[(0.4, 0.8), (0.6, 0.4), (0.8, 0.2)]).expect("valid preset")
    }

    /// Looks up a named preset ("sphere", "two-shell", "three-shell").
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sphere" => Some(Self::sphere()),
            "two-shell" => Some(Self::two_shell()),
            "three-shell" => Some(Self::three_shell()),
            _ => None,
        }
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    /// Density at squared radius `r_sq`. A point exactly on a shell boundary
    /// belongs to the inner shell; outside the outermost shell the density
    /// is 0. Comparing squared radii keeps voxelization exactly radially
    /// symmetric when `r_sq` comes from the integer class key.
    pub fn density_at_radius_sq(&self, r_sq: f64) -> f64 {
        for shell in &self.shells {
            if r_sq <= shell.outer_radius * shell.outer_radius {
                return shell.density;
            }
        }
        0.0
    }

    /// Density at a point; points outside the outermost shell map to 0.
    pub fn eval_density(&self, point: Vec3) -> f64 {
        self.density_at_radius_sq(norm_sq(point))
    }
}

/// A cubic scalar grid over `[-1,1]^3`, `n` voxels per axis, isotropic
/// spacing `2/n`. Values are stored i-fastest: index `i + n*(j + n*k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    n: usize,
    values: Vec<f64>,
}

impl VoxelGrid {
    /// Wraps raw values, checking the length and that every value is finite
    /// and non-negative.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self, PhantomError> {
        if n == 0 {
            return Err(PhantomError::InvalidGridSize);
        }
        if values.len() != n * n * n {
            return Err(PhantomError::DimensionMismatch {
                expected: n * n * n,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(PhantomError::InvalidGridValue);
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Physical half-extent of the grid; the object is centered in `[-1,1]^3`.
    pub fn half_width(&self) -> f64 {
        1.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn value_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.linear_index(i, j, k)]
    }
}

/// Samples the phantom at every voxel center of an `n`-per-axis grid.
///
/// The voxel `(i,j,k)` center sits at `((2i+1-n), (2j+1-n), (2k+1-n)) / n`;
/// its squared radius is computed from the exact integer key so that voxels
/// in the same radial class receive bit-identical values.
pub fn voxelize(phantom: &ShellPhantom, n: usize) -> Result<VoxelGrid, PhantomError> {
    if n == 0 {
        return Err(PhantomError::InvalidGridSize);
    }
    let inv_n_sq = 1.0 / ((n * n) as f64);
    let mut values = Vec::with_capacity(n * n * n);
    for k in 0..n {
        let w = center_offset(k, n);
        for j in 0..n {
            let v = center_offset(j, n);
            for i in 0..n {
                let u = center_offset(i, n);
                let key = (u * u + v * v + w * w) as f64;
                values.push(phantom.density_at_radius_sq(key * inv_n_sq));
            }
        }
    }
    Ok(VoxelGrid { n, values })
}

#[inline]
fn center_offset(i: usize, n: usize) -> i64 {
    2 * i as i64 + 1 - n as i64
}

/// Equal-distance voxel classes for an `n`-per-axis grid.
///
/// Two voxels share a class iff their centers have exactly the same distance
/// to the grid center. Classes are ordered by increasing distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMap {
    n: usize,
    class_of_voxel: Vec<u32>,
    class_key: Vec<u64>,
    class_count: Vec<usize>,
}

/// Builds the radial class map for an `n`-per-axis grid.
pub fn build_radial_map(n: usize) -> Result<RadialMap, PhantomError> {
    if n == 0 {
        return Err(PhantomError::InvalidGridSize);
    }
    // Distinct squared offsets per axis: (2i+1-n)^2 for i in 0..n.
    let axis_sq: Vec<u64> = (0..n)
        .map(|i| {
            let u = center_offset(i, n);
            (u * u) as u64
        })
        .collect();

    let mut keys: Vec<u64> = Vec::new();
    for &a in &axis_sq {
        for &b in &axis_sq {
            for &c in &axis_sq {
                keys.push(a + b + c);
            }
        }
    }
    keys.sort_unstable();
    keys.dedup();

    let mut class_of_voxel = Vec::with_capacity(n * n * n);
    let mut class_count = vec![0usize; keys.len()];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let key = axis_sq[i] + axis_sq[j] + axis_sq[k];
                let class = keys.binary_search(&key).expect("key enumerated above") as u32;
                class_of_voxel.push(class);
                class_count[class as usize] += 1;
            }
        }
    }

    Ok(RadialMap {
        n,
        class_of_voxel,
        class_key: keys,
        class_count,
    })
}

impl RadialMap {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of radial classes (the length of a [`RadialProfile`]).
    pub fn class_count(&self) -> usize {
        self.class_key.len()
    }

    /// Class index per voxel, i-fastest layout.
    pub fn class_of_voxel(&self) -> &[u32] {
        &self.class_of_voxel
    }

    /// Integer squared-distance key of each class, increasing.
    pub fn class_keys(&self) -> &[u64] {
        &self.class_key
    }

    /// Voxels per class.
    pub fn class_sizes(&self) -> &[usize] {
        &self.class_count
    }

    /// Center distance of class `c` to the grid center.
    pub fn class_radius(&self, c: usize) -> f64 {
        math::sqrt(self.class_key[c] as f64) / self.n as f64
    }
}

/// One scalar per radial class, ordered by increasing distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Projects a grid onto the rotationally symmetric subspace: each class takes
/// the mean of its voxel values. A class whose voxels already agree bitwise
/// keeps that exact value, so the projection is the identity on radially
/// symmetric grids.
pub fn reduce_to_profile(grid: &VoxelGrid, map: &RadialMap) -> Result<RadialProfile, PhantomError> {
    if grid.n != map.n {
        return Err(PhantomError::DimensionMismatch { expected: map.n, got: grid.n });
    }
    let classes = map.class_count();
    let mut sums = vec![0.0f64; classes];
    let mut first = vec![f64::NAN; classes];
    let mut constant = vec![true; classes];
    for (value, &class) in grid.values.iter().zip(&map.class_of_voxel) {
        let c = class as usize;
        sums[c] += value;
        if first[c].is_nan() {
            first[c] = *value;
        } else if first[c] != *value {
            constant[c] = false;
        }
    }
    let values = (0..classes)
        .map(|c| if constant[c] { first[c] } else { sums[c] / map.class_count[c] as f64 })
        .collect();
    Ok(RadialProfile::new(values))
}

/// Expands a radial profile back to a full grid: every voxel receives its
/// class value. Inverse of [`reduce_to_profile`] on radially symmetric grids.
pub fn embed_profile(profile: &RadialProfile, map: &RadialMap) -> Result<VoxelGrid, PhantomError> {
    if profile.len() != map.class_count() {
        return Err(PhantomError::DimensionMismatch {
            expected: map.class_count(),
            got: profile.len(),
        });
    }
    let values = map
        .class_of_voxel
        .iter()
        .map(|&c| profile.values[c as usize])
        .collect();
    Ok(VoxelGrid { n: map.n, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_density_examples() {
        let three = ShellPhantom::three_shell();
        assert_eq!(three.eval_density([0.1, 0.0, 0.0]), 0.8);

        let p = ShellPhantom::new(&[(0.8, 0.5)]).unwrap();
        assert_eq!(p.eval_density([0.95, 0.0, 0.0]), 0.0);

        // A point exactly on a shell boundary belongs to the inner shell.
        let two = ShellPhantom::two_shell();
        assert_eq!(two.eval_density([0.0, 0.4, 0.0]), 0.8);
        assert_eq!(two.eval_density([0.0, 0.0, 0.8]), 0.4);
    }

    #[test]
    fn invalid_shells_rejected() {
        assert_eq!(
            ShellPhantom::new(&[(0.8, 0.1), (0.4, 0.2)]).unwrap_err(),
            PhantomError::InvalidRadii
        );
        assert_eq!(
            ShellPhantom::new(&[(0.4, 0.1), (0.4, 0.2)]).unwrap_err(),
            PhantomError::InvalidRadii
        );
        assert_eq!(ShellPhantom::new(&[(1.2, 0.1)]).unwrap_err(), PhantomError::InvalidRadii);
        assert_eq!(ShellPhantom::new(&[(0.4, -0.1)]).unwrap_err(), PhantomError::InvalidDensity);
    }

    #[test]
    fn voxelize_single_voxel() {
        let p = ShellPhantom::sphere();
        let g = voxelize(&p, 1).unwrap();
        assert_eq!(g.values(), &[0.8]);
    }

    #[test]
    fn voxelize_corner_outside_support() {
        let p = ShellPhantom::sphere();
        let g = voxelize(&p, 4).unwrap();
        // corner voxel center (±0.75, ±0.75, ±0.75), radius ≈ 1.3
        assert_eq!(g.value_at(0, 0, 0), 0.0);
        assert_eq!(g.value_at(3, 3, 3), 0.0);
        // central voxels at (±0.25, ±0.25, ±0.25), radius ≈ 0.43
        assert_eq!(g.value_at(1, 1, 1), 0.8);
    }

    #[test]
    fn radial_map_n2_single_class() {
        let map = build_radial_map(2).unwrap();
        assert_eq!(map.class_count(), 1);
        assert_eq!(map.class_sizes(), &[8]);
        assert_eq!(map.class_keys(), &[3]);
    }

    #[test]
    fn radial_map_n3_classes() {
        let map = build_radial_map(3).unwrap();
        assert_eq!(map.class_keys(), &[0, 4, 8, 12]);
        assert_eq!(map.class_sizes(), &[1, 6, 12, 8]);
    }

    #[test]
    fn reduce_dimension_mismatch() {
        let grid = voxelize(&ShellPhantom::sphere(), 4).unwrap();
        let map = build_radial_map(5).unwrap();
        assert!(matches!(
            reduce_to_profile(&grid, &map),
            Err(PhantomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reduce_constant_grid() {
        let n = 6;
        let map = build_radial_map(n).unwrap();
        let grid = VoxelGrid::from_values(n, vec![0.5; n * n * n]).unwrap();
        let profile = reduce_to_profile(&grid, &map).unwrap();
        assert!(profile.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn reduce_single_voxel_mean() {
        let n = 3;
        let map = build_radial_map(n).unwrap();
        let mut values = vec![0.0; 27];
        // voxel (0,1,1) has key 4 (class 1, count 6)
        values[0 + 3 * (1 + 3 * 1)] = 0.9;
        let grid = VoxelGrid::from_values(n, values).unwrap();
        let profile = reduce_to_profile(&grid, &map).unwrap();
        assert_eq!(profile.values()[0], 0.0);
        assert_eq!(profile.values()[1], 0.9 / 6.0);
        assert_eq!(profile.values()[2], 0.0);
        assert_eq!(profile.values()[3], 0.0);
    }

    #[test]
    fn embed_constant_profile() {
        let map = build_radial_map(2).unwrap();
        let grid = embed_profile(&RadialProfile::new(vec![0.3]), &map).unwrap();
        assert!(grid.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn embed_length_mismatch() {
        let map = build_radial_map(3).unwrap();
        assert!(matches!(
            embed_profile(&RadialProfile::zeros(2), &map),
            Err(PhantomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn voxelized_phantom_is_exactly_radial() {
        let p = ShellPhantom::two_shell();
        let n = 20;
        let grid = voxelize(&p, n).unwrap();
        let map = build_radial_map(n).unwrap();
        let profile = reduce_to_profile(&grid, &map).unwrap();
        let back = embed_profile(&profile, &map).unwrap();
        assert_eq!(grid, back);
    }
}
