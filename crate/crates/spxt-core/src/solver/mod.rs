//! Douglas-Rachford splitting for the TV-regularized reconstruction problem.
//!
//! The reconstruction minimizes, over radial profiles `f ∈ [0, f_max]^N`,
//!
//! ```text
//! J(f) = F(f) + G(f),
//! F(f) = ½ Σ_r (K_r(f) − g_r)²,      G(f) = (α/N) Σ |f_{i+1} − f_i|,
//! ```
//!
//! by alternating the two proximal maps with a reflection update:
//!
//! ```text
//! x^{k+1} = prox_{γG}(y^k)                       (direct 1D TV sweep)
//! f^{k+1} = prox_{γF}(2x^{k+1} − y^k)            (box-constrained quasi-Newton)
//! y^{k+1} = y^k + f^{k+1} − x^{k+1}
//! ```
//!
//! The data term is abstracted behind [`DataTerm`] so the driver can run on
//! alternative evaluators (parallel implementations, test doubles).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::forward::{
    k_gradient_scaled_into_unchecked, k_transform_unchecked, ForwardError, MeasurementSet,
    PathMatrix,
};
use crate::geometry::DetectorSpec;
use crate::math;
use crate::phantom::{build_radial_map, PhantomError, RadialMap, RadialProfile};
use crate::tvprox::{tv_denoise_1d, TvError};

mod boxed_lbfgs;

pub use boxed_lbfgs::InnerParams;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// One path matrix per measurement is required.
    CountMismatch { paths: usize, observed: usize },
    /// A path matrix references classes beyond the profile length.
    ClassIndexOutOfRange { index: usize, len: usize },
    /// The inner solver produced a non-finite value (step-size/scaling bug).
    NonFinite,
    InvalidParams(&'static str),
    Tv(TvError),
    Forward(ForwardError),
    Phantom(PhantomError),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::CountMismatch { paths, observed } => {
                write!(f, "{paths} path matrices for {observed} measurements")
            }
            SolverError::ClassIndexOutOfRange { index, len } => {
                write!(f, "class index {index} out of range for profile of length {len}")
            }
            SolverError::NonFinite => write!(f, "non-finite value in inner solver"),
            SolverError::InvalidParams(what) => write!(f, "invalid solver parameter: {what}"),
            SolverError::Tv(e) => write!(f, "{e}"),
            SolverError::Forward(e) => write!(f, "{e}"),
            SolverError::Phantom(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<TvError> for SolverError {
    fn from(e: TvError) -> Self {
        SolverError::Tv(e)
    }
}

impl From<ForwardError> for SolverError {
    fn from(e: ForwardError) -> Self {
        SolverError::Forward(e)
    }
}

impl From<PhantomError> for SolverError {
    fn from(e: PhantomError) -> Self {
        SolverError::Phantom(e)
    }
}

/// Smooth data-fit term of the reconstruction objective.
pub trait DataTerm {
    /// Length of the profile vectors this term operates on.
    fn dim(&self) -> usize;

    /// `F(f)`.
    fn value(&self, f: &[f64]) -> f64;

    /// Writes `∇F(f)` into `grad` and returns `F(f)`.
    fn value_and_gradient(&self, f: &[f64], grad: &mut [f64]) -> f64;
}

/// The measured single-pixel data term
/// `F(f) = ½ Σ_r (K_r(f) − g_r)²` evaluated sequentially over sources.
pub struct KDataTerm<'a> {
    paths: &'a [PathMatrix],
    observed: &'a [f64],
    dim: usize,
}

impl<'a> KDataTerm<'a> {
    /// Validates that there is one path matrix per observation and that no
    /// path references a class outside `dim`.
    pub fn new(
        paths: &'a [PathMatrix],
        observed: &'a [f64],
        dim: usize,
    ) -> Result<Self, SolverError> {
        if paths.len() != observed.len() {
            return Err(SolverError::CountMismatch {
                paths: paths.len(),
                observed: observed.len(),
            });
        }
        for p in paths {
            if let Some(max) = p.max_class() {
                if max as usize >= dim {
                    return Err(SolverError::ClassIndexOutOfRange {
                        index: max as usize,
                        len: dim,
                    });
                }
            }
        }
        Ok(Self { paths, observed, dim })
    }
}

impl DataTerm for KDataTerm<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (paths, &g) in self.paths.iter().zip(self.observed) {
            let r = k_transform_unchecked(f, paths) - g;
            acc += r * r;
        }
        0.5 * acc
    }

    fn value_and_gradient(&self, f: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut acc = 0.0;
        for (paths, &g) in self.paths.iter().zip(self.observed) {
            // two passes per source: K first, then the residual-weighted
            // gradient with the same attenuation factors
            let k = k_transform_unchecked(f, paths);
            let r = k - g;
            acc += r * r;
            k_gradient_scaled_into_unchecked(f, paths, r, grad);
        }
        0.5 * acc
    }
}

/// `F(profile) = ½ Σ_r (K_r − g_r)²` over one path matrix per measurement.
pub fn data_term(
    profile: &RadialProfile,
    observed: &[f64],
    paths: &[PathMatrix],
) -> Result<f64, SolverError> {
    let term = KDataTerm::new(paths, observed, profile.len())?;
    Ok(term.value(profile.values()))
}

/// Gradient of [`data_term`] with respect to the profile.
pub fn data_gradient(
    profile: &RadialProfile,
    observed: &[f64],
    paths: &[PathMatrix],
) -> Result<Vec<f64>, SolverError> {
    let term = KDataTerm::new(paths, observed, profile.len())?;
    let mut grad = vec![0.0; profile.len()];
    term.value_and_gradient(profile.values(), &mut grad);
    Ok(grad)
}

/// Proximal map of the data term over the box `[0, f_max]`:
/// approximately minimizes `γ·F(f) + ½‖f − v‖²` subject to the bounds,
/// warm-started at the projection of `v`.
pub fn prox_data<D: DataTerm + ?Sized>(
    v: &[f64],
    gamma: f64,
    data: &D,
    f_max: f64,
    inner: &InnerParams,
) -> Result<Vec<f64>, SolverError> {
    if !(gamma > 0.0) {
        return Err(SolverError::InvalidParams("gamma must be > 0"));
    }
    boxed_lbfgs::minimize_prox(v, gamma, data, f_max, inner)
}

/// Early-stop rule: finish once `‖f^{k+1} − f^k‖_∞` stays below `tolerance`
/// for `patience` consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    pub tolerance: f64,
    pub patience: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self { tolerance: 1e-9, patience: 20 }
    }
}

/// Douglas-Rachford driver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DrParams {
    /// TV regularization weight α; the TV prox receives γ·α/N.
    pub alpha: f64,
    /// Splitting step size γ > 0.
    pub gamma: f64,
    /// Fixed outer iteration budget.
    pub max_iters: usize,
    /// Upper box bound on profile values.
    pub f_max: f64,
    pub inner: InnerParams,
    /// Use the y-update `y + f^{k+1} − x^k` (with the previous x) instead of
    /// the standard `y + f^{k+1} − x^{k+1}`.
    pub paper_literal_update: bool,
    pub early_stop: Option<EarlyStop>,
}

impl Default for DrParams {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            gamma: 1.0,
            max_iters: 5000,
            f_max: 1.0,
            inner: InnerParams::default(),
            paper_literal_update: false,
            early_stop: None,
        }
    }
}

impl DrParams {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(SolverError::InvalidParams("gamma must be > 0"));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(SolverError::InvalidParams("alpha must be >= 0"));
        }
        if !(self.f_max > 0.0) {
            return Err(SolverError::InvalidParams("f_max must be > 0"));
        }
        Ok(())
    }
}

/// Per-iteration record: objective `J = F + G`, its two terms, and the step
/// size `‖f^{k+1} − f^k‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterStats {
    pub iter: usize,
    pub objective: f64,
    pub data_term: f64,
    pub tv_term: f64,
    pub step_norm: f64,
}

/// Iterate triple of the splitting scheme plus the run history.
#[derive(Debug, Clone, PartialEq)]
pub struct DrState {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub y: Vec<f64>,
    pub iter: usize,
    pub history: Vec<IterStats>,
}

impl DrState {
    /// All-zeros initial state (`x⁰ = y⁰ = 0`).
    pub fn new(len: usize) -> Self {
        Self {
            x: vec![0.0; len],
            f: vec![0.0; len],
            y: vec![0.0; len],
            iter: 0,
            history: Vec::new(),
        }
    }
}

fn tv_sum(f: &[f64]) -> f64 {
    f.windows(2).map(|w| math::abs(w[1] - w[0])).sum()
}

/// One Douglas-Rachford iteration; extends the state's history.
pub fn dr_iterate<D: DataTerm + ?Sized>(
    state: &mut DrState,
    params: &DrParams,
    data: &D,
) -> Result<(), SolverError> {
    params.validate()?;
    let n = state.y.len();
    let tv_weight = params.gamma * params.alpha / n as f64;

    let x_next = tv_denoise_1d(&state.y, tv_weight)?;
    let reflected: Vec<f64> = x_next
        .iter()
        .zip(&state.y)
        .map(|(x, y)| 2.0 * x - y)
        .collect();
    let f_next = prox_data(&reflected, params.gamma, data, params.f_max, &params.inner)?;

    let x_in_update: &[f64] = if params.paper_literal_update { &state.x } else { &x_next };
    for i in 0..n {
        state.y[i] += f_next[i] - x_in_update[i];
    }

    let data_value = data.value(&f_next);
    let tv_value = params.alpha / n as f64 * tv_sum(&f_next);
    let step_sq: f64 = f_next
        .iter()
        .zip(&state.f)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    state.iter += 1;
    state.history.push(IterStats {
        iter: state.iter,
        objective: data_value + tv_value,
        data_term: data_value,
        tv_term: tv_value,
        step_norm: math::sqrt(step_sq),
    });
    state.x = x_next;
    state.f = f_next;
    Ok(())
}

/// Runs the splitting from the all-zeros state against an arbitrary data
/// term. Returns the final `f` iterate and the full history.
pub fn reconstruct_with<D: DataTerm + ?Sized>(
    data: &D,
    params: &DrParams,
) -> Result<(Vec<f64>, Vec<IterStats>), SolverError> {
    params.validate()?;
    let mut state = DrState::new(data.dim());
    let mut quiet_iters = 0usize;
    for _ in 0..params.max_iters {
        let prev_f = state.f.clone();
        dr_iterate(&mut state, params, data)?;
        if let Some(stop) = params.early_stop {
            let step_inf = state
                .f
                .iter()
                .zip(&prev_f)
                .map(|(a, b)| math::abs(a - b))
                .fold(0.0f64, f64::max);
            if step_inf < stop.tolerance {
                quiet_iters += 1;
                if quiet_iters >= stop.patience {
                    break;
                }
            } else {
                quiet_iters = 0;
            }
        }
    }
    Ok((state.f, state.history))
}

/// A finished reconstruction: the radial profile, the per-iteration history,
/// and the radial map it lives on.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub profile: RadialProfile,
    pub history: Vec<IterStats>,
    pub map: RadialMap,
}

/// Full pipeline on one thread: build the radial map and per-source path
/// matrices for `n`, then run the splitting on the measurement set.
pub fn reconstruct(
    measurements: &MeasurementSet,
    detector: &DetectorSpec,
    n: usize,
    params: &DrParams,
) -> Result<Reconstruction, SolverError> {
    let map = build_radial_map(n)?;
    let mut paths = Vec::with_capacity(measurements.len());
    for (id, &pos) in measurements.positions.iter().enumerate() {
        paths.push(PathMatrix::for_source(id, pos, detector, &map)?);
    }
    let data = KDataTerm::new(&paths, &measurements.noisy, map.class_count())?;
    let (f, history) = reconstruct_with(&data, params)?;
    Ok(Reconstruction { profile: RadialProfile::new(f), history, map })
}
