//! Box-constrained Nelder–Mead with restarts.
//!
//! Trial points are projected onto the box before evaluation. Non-finite
//! objective values count as `+∞`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::param(
                "bounds",
                "lower and upper must have equal, nonzero length",
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::param(
                "bounds",
                "each lower bound must not exceed its upper bound",
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the simplex spread in objective value falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter (sup norm) falls below this.
    pub x_tol: f64,
    /// Initial edge length as a fraction of each box width.
    pub initial_step: f64,
    /// Extra runs started from the incumbent with a fresh simplex.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
            initial_step: 0.25,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value at the end of each run (first run plus restarts).
    pub trace: Vec<f64>,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimizes `f` over the box starting at `x0`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    bounds: &Bounds,
    cfg: &NelderMeadConfig,
) -> Result<SearchResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = bounds.dim();
    if x0.len() != n {
        return Err(Error::Domain(format!(
            "start has {} entries, bounds {}",
            x0.len(),
            n
        )));
    }
    let mut best = x0.to_vec();
    bounds.project(&mut best);
    let mut best_val = finite_or_inf(f(&best));
    let mut evals = 1;
    let mut trace = Vec::new();

    for run in 0..=cfg.restarts {
        let step = cfg.initial_step / (1 << run.min(8)) as f64;
        let (x, v, used) = single_run(
            &mut f,
            &best,
            bounds,
            cfg,
            step,
            cfg.max_evals.saturating_sub(evals),
        );
        evals += used;
        if v < best_val {
            best_val = v;
            best = x;
        }
        trace.push(best_val);
        if evals >= cfg.max_evals {
            break;
        }
    }
    Ok(SearchResult {
        x: best,
        value: best_val,
        evaluations: evals,
        trace,
    })
}

fn single_run<F>(
    f: &mut F,
    start: &[f64],
    bounds: &Bounds,
    cfg: &NelderMeadConfig,
    step: f64,
    budget: usize,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };

    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        let width = bounds.hi[i] - bounds.lo[i];
        let mut delta = step * if width > 0.0 { width } else { 1.0 };
        if delta == 0.0 {
            delta = 1e-3;
        }
        // step inward when the start sits on the upper face
        if v[i] + delta > bounds.hi[i] {
            delta = -delta;
        }
        v[i] += delta;
        bounds.project(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &simplex {
        if evals >= budget {
            values.push(f64::INFINITY);
        } else {
            values.push(eval(v, &mut evals));
        }
    }

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread.abs() <= cfg.f_tol) || diameter <= cfg.x_tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            bounds.project(&mut p);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            simplex[i] = shrunk;
            values[i] = eval(&simplex[i], &mut evals);
        }
    }

    let (i_best, &v_best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is nonempty");
    (simplex[i_best].clone(), v_best, evals)
}
