use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[t0, t1]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::param(
                "grid",
                format!("need t0 < t1, got [{t0}, {t1}]"),
            ));
        }
        if steps == 0 {
            return Err(Error::param("steps", "must be positive"));
        }
        Ok(Self { t0, t1, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    pub fn h(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    /// Time of node `k`. The last node is exactly `t1`.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.h()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.node_count()).map(|k| self.time(k)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (self.t1 - self.t0).max(1.0);
        t >= self.t0 - slack && t <= self.t1 + slack
    }

    /// Interval index `k` and weight `w` with `t = (1-w)·t_k + w·t_{k+1}`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !self.contains(t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {}]",
                self.t0, self.t1
            )));
        }
        let s = ((t - self.t0) / self.h()).clamp(0.0, self.steps as f64);
        let k = (s.floor() as usize).min(self.steps - 1);
        Ok((k, s - k as f64))
    }

    /// Linear interpolation of nodal `values` at time `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Result<f64> {
        if values.len() != self.node_count() {
            return Err(Error::Domain(format!(
                "expected {} nodal values, got {}",
                self.node_count(),
                values.len()
            )));
        }
        let (k, w) = self.locate(t)?;
        Ok((1.0 - w) * values[k] + w * values[k + 1])
    }
}
