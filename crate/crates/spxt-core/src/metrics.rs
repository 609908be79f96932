//! Reconstruction quality metrics and the measurement comparison used by the
//! verification protocol.
//!
//! SSIM follows the standard Gaussian-window formulation extended to 3D:
//! local means, variances and covariance are separable Gaussian filters
//! (symmetric boundary handling), combined per voxel as
//!
//! ```text
//! ssim = (2 μx μy + C1)(2 σxy + C2) / ((μx² + μy² + C1)(σx² + σy² + C2))
//! ```
//!
//! with `C1 = (k1·L)²`, `C2 = (k2·L)²` and `L` the data range, then averaged
//! over all voxels.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::forward::MeasurementSet;
use crate::math;
use crate::phantom::VoxelGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    DimensionMismatch { a: usize, b: usize },
    /// The data range must be positive (an all-zero reference has none).
    ZeroDataRange,
    InvalidParams(&'static str),
    /// Measurement sets have different source counts or positions.
    GeometryMismatch,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::DimensionMismatch { a, b } => {
                write!(f, "grids have different sizes: {a} vs {b}")
            }
            MetricsError::ZeroDataRange => write!(f, "data range must be > 0"),
            MetricsError::InvalidParams(what) => write!(f, "invalid metric parameter: {what}"),
            MetricsError::GeometryMismatch => {
                write!(f, "measurement sets have mismatched source geometry")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// SSIM parameters; `data_range = None` uses the maximum of the reference
/// grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub data_range: Option<f64>,
    /// Cubic window side; must be odd.
    pub window: usize,
    /// Gaussian weight standard deviation in voxels.
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { k1: 0.01, k2: 0.03, data_range: None, window: 7, sigma: 1.5 }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<(), MetricsError> {
        if !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(MetricsError::InvalidParams("k1 and k2 must be > 0"));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(MetricsError::InvalidParams("window must be odd"));
        }
        if !(self.sigma > 0.0) {
            return Err(MetricsError::InvalidParams("sigma must be > 0"));
        }
        Ok(())
    }
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let radius = (window / 2) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|t| math::exp(-(t * t) as f64 / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in kernel.iter_mut() {
        *w /= sum;
    }
    kernel
}

/// Symmetric boundary index: reflects including the edge sample
/// (`-1 → 0`, `n → n-1`).
fn reflect(mut idx: isize, n: isize) -> usize {
    loop {
        if idx < 0 {
            idx = -idx - 1;
        } else if idx >= n {
            idx = 2 * n - 1 - idx;
        } else {
            return idx as usize;
        }
    }
}

/// Separable 3D convolution with a 1D kernel along all three axes.
fn gaussian_filter_3d(values: &[f64], n: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let ni = n as isize;
    let stride = [1usize, n, n * n];
    let mut src = values.to_vec();
    let mut dst = vec![0.0; values.len()];
    for axis in 0..3 {
        let st = stride[axis];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let pos = [i, j, k];
                    // base index with the filtered axis zeroed
                    let mut base = 0usize;
                    for a in 0..3 {
                        if a != axis {
                            base += pos[a] * stride[a];
                        }
                    }
                    let center = pos[axis] as isize;
                    let mut acc = 0.0;
                    for (t, w) in kernel.iter().enumerate() {
                        let idx = reflect(center + t as isize - radius, ni);
                        acc += w * src[base + idx * st];
                    }
                    dst[base + pos[axis] * st] = acc;
                }
            }
        }
        core::mem::swap(&mut src, &mut dst);
    }
    src
}

/// Mean structural similarity between two grids in `[-1, 1]`.
pub fn ssim(
    reference: &VoxelGrid,
    candidate: &VoxelGrid,
    params: &SsimParams,
) -> Result<f64, MetricsError> {
    params.validate()?;
    if reference.n() != candidate.n() {
        return Err(MetricsError::DimensionMismatch { a: reference.n(), b: candidate.n() });
    }
    let data_range = match params.data_range {
        Some(l) => l,
        None => reference.values().iter().copied().fold(0.0f64, f64::max),
    };
    if !(data_range > 0.0) {
        return Err(MetricsError::ZeroDataRange);
    }

    let n = reference.n();
    let x = reference.values();
    let y = candidate.values();
    let kernel = gaussian_kernel(params.window, params.sigma);

    let mu_x = gaussian_filter_3d(x, n, &kernel);
    let mu_y = gaussian_filter_3d(y, n, &kernel);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let e_xx = gaussian_filter_3d(&xx, n, &kernel);
    let e_yy = gaussian_filter_3d(&yy, n, &kernel);
    let e_xy = gaussian_filter_3d(&xy, n, &kernel);

    let c1 = (params.k1 * data_range) * (params.k1 * data_range);
    let c2 = (params.k2 * data_range) * (params.k2 * data_range);

    let mut acc = 0.0;
    for v in 0..x.len() {
        let mx = mu_x[v];
        let my = mu_y[v];
        let var_x = e_xx[v] - mx * mx;
        let var_y = e_yy[v] - my * my;
        let cov = e_xy[v] - mx * my;
        let numerator = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let denominator = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        acc += numerator / denominator;
    }
    Ok(acc / x.len() as f64)
}

/// Root mean squared voxel difference.
pub fn rmse(reference: &VoxelGrid, candidate: &VoxelGrid) -> Result<f64, MetricsError> {
    if reference.n() != candidate.n() {
        return Err(MetricsError::DimensionMismatch { a: reference.n(), b: candidate.n() });
    }
    let sum_sq: f64 = reference
        .values()
        .iter()
        .zip(candidate.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(math::sqrt(sum_sq / reference.values().len() as f64))
}

/// Outcome of a tolerance-based measurement comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub accept: bool,
    /// Largest per-source deviation of the noisy values.
    pub max_deviation: f64,
    /// Source index attaining the maximum, if any sources exist.
    pub worst_source: Option<usize>,
}

/// Accepts iff `max_r |a_r − b_r| ≤ tol` over the noisy values; both sets
/// must share source positions exactly.
pub fn compare_measurements(
    a: &MeasurementSet,
    b: &MeasurementSet,
    tol: f64,
) -> Result<Verdict, MetricsError> {
    if a.len() != b.len() || a.positions != b.positions {
        return Err(MetricsError::GeometryMismatch);
    }
    let mut max_deviation = 0.0f64;
    let mut worst_source = None;
    for (i, (va, vb)) in a.noisy.iter().zip(&b.noisy).enumerate() {
        let dev = math::abs(va - vb);
        if worst_source.is_none() || dev > max_deviation {
            max_deviation = dev;
            worst_source = Some(i);
        }
    }
    Ok(Verdict { accept: max_deviation <= tol, max_deviation, worst_source })
}
