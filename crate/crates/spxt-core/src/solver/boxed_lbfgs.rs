//! Box-constrained limited-memory quasi-Newton minimizer for the proximal
//! subproblem `φ(f) = γ·F(f) + ½‖f − v‖²` on `[0, f_max]^N`.
//!
//! Two-loop L-BFGS recursion with a projected backtracking line search
//! (Armijo sufficient decrease evaluated along the projection arc). The
//! memory is reset to steepest descent whenever the projected direction
//! fails to descend, and curvature pairs are only stored when `sᵀy > 0`.

use alloc::vec;
use alloc::vec::Vec;

use super::{DataTerm, SolverError};
use crate::math;

/// Inner-solver settings for the data-term proximal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerParams {
    /// Iteration cap for one proximal solve.
    pub max_iters: usize,
    /// Convergence threshold on the projected-gradient infinity norm.
    pub tolerance: f64,
    /// Number of curvature pairs kept.
    pub memory: usize,
}

impl Default for InnerParams {
    fn default() -> Self {
        Self { max_iters: 200, tolerance: 1e-9, memory: 10 }
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MIN_STEP: f64 = 1e-20;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct ProxObjective<'a, D: ?Sized> {
    data: &'a D,
    gamma: f64,
    v: &'a [f64],
}

impl<D: DataTerm + ?Sized> ProxObjective<'_, D> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (xi, vi) in x.iter().zip(self.v) {
            let d = xi - vi;
            quad += d * d;
        }
        self.gamma * self.data.value(x) + 0.5 * quad
    }

    /// Writes the full gradient into `grad` and returns the objective.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let data_value = self.data.value_and_gradient(x, grad);
        let mut quad = 0.0;
        for i in 0..x.len() {
            let d = x[i] - self.v[i];
            quad += d * d;
            grad[i] = self.gamma * grad[i] + d;
        }
        self.gamma * data_value + 0.5 * quad
    }
}

/// Infinity norm of the projected gradient: components pointing outside the
/// box at an active bound do not count.
fn projected_gradient_inf(x: &[f64], grad: &[f64], f_max: f64) -> f64 {
    let mut worst = 0.0f64;
    for (xi, gi) in x.iter().zip(grad) {
        let pg = if *xi <= 0.0 {
            gi.min(0.0)
        } else if *xi >= f_max {
            gi.max(0.0)
        } else {
            *gi
        };
        worst = worst.max(math::abs(pg));
    }
    worst
}

pub(super) fn minimize_prox<D: DataTerm + ?Sized>(
    v: &[f64],
    gamma: f64,
    data: &D,
    f_max: f64,
    inner: &InnerParams,
) -> Result<Vec<f64>, SolverError> {
    let n = v.len();
    if data.dim() != n {
        return Err(SolverError::InvalidParams("data term dimension mismatch"));
    }
    let objective = ProxObjective { data, gamma, v };

    // Warm start at the projection of v onto the box.
    let mut x: Vec<f64> = v.iter().map(|&t| t.clamp(0.0, f_max)).collect();
    let mut grad = vec![0.0; n];
    let mut phi = objective.value_and_gradient(&x, &mut grad);
    if !phi.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(SolverError::NonFinite);
    }

    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(inner.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(inner.memory);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(inner.memory);

    let mut direction = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut grad_new = vec![0.0; n];

    for _ in 0..inner.max_iters {
        if projected_gradient_inf(&x, &grad, f_max) <= inner.tolerance {
            break;
        }

        // d = -H·g via the two-loop recursion.
        direction.copy_from_slice(&grad);
        let pairs = s_hist.len();
        let mut alpha = vec![0.0; pairs];
        for i in (0..pairs).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &direction);
            for j in 0..n {
                direction[j] -= alpha[i] * y_hist[i][j];
            }
        }
        if pairs > 0 {
            let sy = dot(&s_hist[pairs - 1], &y_hist[pairs - 1]);
            let yy = dot(&y_hist[pairs - 1], &y_hist[pairs - 1]);
            if yy > 0.0 {
                let scaling = sy / yy;
                for d in direction.iter_mut() {
                    *d *= scaling;
                }
            }
        }
        for i in 0..pairs {
            let beta = rho_hist[i] * dot(&y_hist[i], &direction);
            for j in 0..n {
                direction[j] += (alpha[i] - beta) * s_hist[i][j];
            }
        }
        for d in direction.iter_mut() {
            *d = -*d;
        }

        // The projected step must descend; otherwise drop the memory and
        // fall back to steepest descent.
        let projected_decrease = |d: &[f64], t: f64, x_trial: &mut [f64]| {
            for j in 0..n {
                x_trial[j] = (x[j] + t * d[j]).clamp(0.0, f_max);
            }
            dot(&grad, x_trial) - dot(&grad, &x)
        };
        if projected_decrease(&direction, 1.0, &mut x_trial) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for j in 0..n {
                direction[j] = -grad[j];
            }
        }

        // Backtracking Armijo search along the projection arc.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let decrease = projected_decrease(&direction, t, &mut x_trial);
            if decrease < 0.0 {
                let phi_trial = objective.value(&x_trial);
                if !phi_trial.is_finite() {
                    return Err(SolverError::NonFinite);
                }
                if phi_trial <= phi + ARMIJO_C1 * decrease {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
            if t < MIN_STEP {
                break;
            }
        }
        if !accepted {
            // No productive step left at this precision.
            break;
        }

        let phi_new = objective.value_and_gradient(&x_trial, &mut grad_new);
        if !phi_new.is_finite() || grad_new.iter().any(|g| !g.is_finite()) {
            return Err(SolverError::NonFinite);
        }

        let s: Vec<f64> = x_trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_hist.len() == inner.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }

        x.copy_from_slice(&x_trial);
        grad.copy_from_slice(&grad_new);
        phi = phi_new;
    }

    Ok(x)
}
