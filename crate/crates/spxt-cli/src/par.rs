//! Parallel transform evaluation with a thread-count-independent reduction
//! order: sources are split into fixed chunks, each chunk is evaluated
//! sequentially, and chunk partials are combined in chunk order. Results are
//! therefore bit-identical for any number of threads.

use rayon::prelude::*;
use spxt_core::forward::{k_transform, ForwardError, PathMatrix};
use spxt_core::geometry::DetectorSpec;
use spxt_core::phantom::{RadialMap, RadialProfile};
use spxt_core::solver::{DataTerm, KDataTerm, SolverError};
use spxt_core::vec3::Vec3;

/// Sources per reduction chunk; fixed so the summation tree does not depend
/// on the thread count.
const CHUNK: usize = 16;

/// Chunked, rayon-parallel version of the measured data term.
pub struct ChunkedKData<'a> {
    chunks: Vec<KDataTerm<'a>>,
    dim: usize,
}

impl<'a> ChunkedKData<'a> {
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
        let chunks = paths
            .chunks(CHUNK)
            .zip(observed.chunks(CHUNK))
            .map(|(p, o)| KDataTerm::new(p, o, dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { chunks, dim })
    }
}

/// Traces every source's ray bundle in parallel; order is preserved.
pub fn build_path_matrices(
    positions: &[Vec3],
    detector: &DetectorSpec,
    map: &RadialMap,
) -> Result<Vec<PathMatrix>, ForwardError> {
    positions
        .par_iter()
        .enumerate()
        .map(|(id, &pos)| PathMatrix::for_source(id, pos, detector, map))
        .collect()
}

/// Per-source transform values in parallel; each value is computed exactly
/// as in the sequential path, so the result is thread-count independent.
pub fn clean_values(
    profile: &RadialProfile,
    paths: &[PathMatrix],
) -> Result<Vec<f64>, ForwardError> {
    paths.par_iter().map(|p| k_transform(profile, p)).collect()
}

impl DataTerm for ChunkedKData<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, f: &[f64]) -> f64 {
        let partials: Vec<f64> = self.chunks.par_iter().map(|c| c.value(f)).collect();
        partials.iter().sum()
    }

    fn value_and_gradient(&self, f: &[f64], grad: &mut [f64]) -> f64 {
        let partials: Vec<(f64, Vec<f64>)> = self
            .chunks
            .par_iter()
            .map(|c| {
                let mut g = vec![0.0; self.dim];
                let v = c.value_and_gradient(f, &mut g);
                (v, g)
            })
            .collect();
        grad.fill(0.0);
        let mut total = 0.0;
        for (v, g) in &partials {
            total += v;
            for (acc, x) in grad.iter_mut().zip(g) {
                *acc += x;
            }
        }
        total
    }
}
