use crate::error::{Error, Result};

use super::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `y0` is the state at `t0`.
    Forward,
    /// `y0` is the terminal state at `t1`.
    Backward,
}

/// States on every node of a grid, stored in increasing time order.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub grid: TimeGrid,
    pub dim: usize,
    values: Vec<f64>,
}

impl OdePath {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    /// Component `c` on every node.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.dim)
            .copied()
            .collect()
    }
}

/// One classical RK4 step of size `h` (negative `h` steps backward).
pub fn rk4_step<F>(field: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    const STACK: usize = 16;
    let n = y.len();
    if n <= STACK {
        let mut scratch = [0.0; 5 * STACK];
        rk4_with(field, t, y, h, out, &mut scratch[..5 * n]);
    } else {
        rk4_with(field, t, y, h, out, &mut vec![0.0; 5 * n]);
    }
}

fn rk4_with<F>(field: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64], scratch: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, tmp) = rest.split_at_mut(n);

    field(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    field(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    field(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    field(t + h, tmp, k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Fixed-step RK4 on `grid`.
///
/// `field(t, y, dy)` writes the time derivative into `dy`. For
/// [`Direction::Backward`] the terminal condition `y0` sits at `t1` and the
/// scheme steps toward `t0`.
pub fn integrate_ode<F>(
    mut field: F,
    y0: &[f64],
    grid: &TimeGrid,
    direction: Direction,
) -> Result<OdePath>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let nodes = grid.node_count();
    let h = grid.h();
    let mut values = vec![0.0; dim * nodes];
    if y0.iter().any(|v| !v.is_finite()) {
        let t = match direction {
            Direction::Forward => grid.t0(),
            Direction::Backward => grid.t1(),
        };
        return Err(Error::IntegrationBlowup { t });
    }

    let mut y = y0.to_vec();
    let mut next = vec![0.0; dim];
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..nodes),
        Direction::Backward => Box::new((0..nodes).rev()),
    };
    let mut prev: Option<usize> = None;
    for k in order {
        if let Some(j) = prev {
            let (t, step) = match direction {
                Direction::Forward => (grid.time(j), h),
                Direction::Backward => (grid.time(j), -h),
            };
            rk4_step(&mut field, t, &y, step, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationBlowup { t: grid.time(k) });
            }
            std::mem::swap(&mut y, &mut next);
        }
        values[k * dim..(k + 1) * dim].copy_from_slice(&y);
        prev = Some(k);
    }
    Ok(OdePath {
        grid: *grid,
        dim,
        values,
    })
}
