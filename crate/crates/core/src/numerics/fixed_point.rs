use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl FixedPointConfig {
    pub fn new(damping: f64, tol: f64, max_iter: usize) -> Result<Self> {
        let cfg = Self {
            damping,
            tol,
            max_iter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param(
                "damping",
                format!("{} not in (0, 1]", self.damping),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(
                "tol",
                format!("{} must be positive", self.tol),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOutcome {
    pub value: Vec<f64>,
    /// `‖map(x_k) − x_k‖∞` for every evaluated iterate.
    pub residuals: Vec<f64>,
}

/// Largest absolute componentwise difference; NaN if any entry is NaN.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let e = (x - y).abs();
        if e.is_nan() {
            return f64::NAN;
        }
        d = d.max(e);
    }
    d
}

/// Damped iteration `x ← (1−d)·x + d·map(x)`.
///
/// Returns the first iterate whose residual `‖map(x) − x‖∞` is below
/// `cfg.tol`, together with every residual computed along the way.
pub fn solve_fixed_point<M>(
    mut map: M,
    x0: Vec<f64>,
    cfg: &FixedPointConfig,
) -> Result<FixedPointOutcome>
where
    M: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let mut x = x0;
    let mut residuals = Vec::new();
    for _ in 0..cfg.max_iter {
        let y = map(&x)?;
        if y.len() != x.len() {
            return Err(Error::Domain(format!(
                "map changed dimension from {} to {}",
                x.len(),
                y.len()
            )));
        }
        let r = sup_distance(&x, &y);
        residuals.push(r);
        if !r.is_finite() {
            break;
        }
        if r < cfg.tol {
            return Ok(FixedPointOutcome {
                value: x,
                residuals,
            });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = (1.0 - cfg.damping) * *xi + cfg.damping * yi;
        }
    }
    Err(Error::NonConvergence {
        residual: residuals.last().copied().unwrap_or(f64::NAN),
        history: residuals,
    })
}
