//! Deterministic kernels shared by the model modules.
//!
//! Every residual in the crate is a sup norm over grid nodes and vector
//! components.

mod fixed_point;
mod grid;
mod nelder_mead;
mod ode;
mod sde;

pub use fixed_point::{solve_fixed_point, sup_distance, FixedPointConfig, FixedPointOutcome};
pub use grid::TimeGrid;
pub use nelder_mead::{nelder_mead, Bounds, NelderMeadConfig, SearchResult};
pub use ode::{integrate_ode, rk4_step, Direction, OdePath};
pub use sde::{ks_statistic, path_moments, path_rng, simulate_sde, NodeMoments, PathEnsemble};

/// Trapezoid rule for samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (0.5 * (values[0] + values[n - 1]) + inner)
        }
    }
}

/// Running trapezoid integral `∫_{t0}^{t_k}`, one entry per sample.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * h * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
