use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::TimeGrid;

/// Generator for one path: ChaCha8 keyed by `seed`, stream selected by the
/// path index. Draws within a path are consumed in step order, so the
/// numbers a path sees depend only on `(seed, path, step)` and never on
/// scheduling.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Monte Carlo paths on a common grid.
///
/// Values are stored path-major: node `k`, component `c` of path `p` lives at
/// `p·nodes·dim + k·dim + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub seed: u64,
    n_paths: usize,
    values: Vec<f64>,
    flagged: Vec<bool>,
}

impl PathEnsemble {
    /// Fills every path in parallel.
    ///
    /// `fill(path, rng, out)` writes `nodes·dim` values and returns `true` if
    /// the path hit a non-finite state.
    pub fn generate<F>(
        grid: &TimeGrid,
        dim: usize,
        n_paths: usize,
        seed: u64,
        fill: F,
    ) -> Result<Self>
    where
        F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) -> bool + Sync,
    {
        if n_paths == 0 {
            return Err(Error::param("n_paths", "must be positive"));
        }
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let stride = grid.node_count() * dim;
        let mut values = vec![0.0; stride * n_paths];
        let flagged = values
            .par_chunks_mut(stride)
            .enumerate()
            .map(|(p, out)| {
                let mut rng = path_rng(seed, p);
                fill(p, &mut rng, out)
            })
            .collect();
        Ok(Self {
            grid: *grid,
            dim,
            seed,
            n_paths,
            values,
            flagged,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    /// Every node and component of path `p`.
    pub fn path(&self, p: usize) -> &[f64] {
        let stride = self.grid.node_count() * self.dim;
        &self.values[p * stride..(p + 1) * stride]
    }

    pub fn value(&self, p: usize, k: usize, c: usize) -> f64 {
        self.path(p)[k * self.dim + c]
    }

    /// Component `c` at node `k` across all paths.
    pub fn cross_section(&self, k: usize, c: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.value(p, k, c)).collect()
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }
}

/// Scalar Euler–Maruyama: `dX = drift(t, X) dt + diffusion(t, X) dW`.
///
/// A path whose state turns non-finite is flagged and frozen at NaN for the
/// remaining nodes.
pub fn simulate_sde<D, S>(
    drift: D,
    diffusion: S,
    x0: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble>
where
    D: Fn(f64, f64) -> f64 + Sync,
    S: Fn(f64, f64) -> f64 + Sync,
{
    let h = grid.h();
    let sqrt_h = h.sqrt();
    PathEnsemble::generate(grid, 1, n_paths, seed, |_, rng, out| {
        let mut x = x0;
        out[0] = x;
        let mut bad = !x.is_finite();
        for k in 0..grid.steps() {
            if bad {
                out[k + 1] = f64::NAN;
                continue;
            }
            let t = grid.time(k);
            let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_h;
            x += drift(t, x) * h + diffusion(t, x) * dw;
            if !x.is_finite() {
                bad = true;
                x = f64::NAN;
            }
            out[k + 1] = x;
        }
        bad
    })
}

/// Per-node sample mean and standard error of a scalar path functional.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMoments {
    pub n_paths: usize,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

const CHUNK: usize = 256;

/// Streams `n_paths` scalar paths of `nodes` values each and returns per-node
/// moments without storing the paths.
///
/// Paths are summed in fixed chunks that are combined in index order, so the
/// result does not depend on the thread count.
pub fn path_moments<F>(nodes: usize, n_paths: usize, seed: u64, fill: F) -> Result<NodeMoments>
where
    F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if n_paths < 2 {
        return Err(Error::param(
            "n_paths",
            "need at least two paths for moments",
        ));
    }
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = vec![0.0; nodes];
            let mut s2 = vec![0.0; nodes];
            let mut buf = vec![0.0; nodes];
            for p in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, p);
                fill(p, &mut rng, &mut buf);
                for k in 0..nodes {
                    s[k] += buf[k];
                    s2[k] += buf[k] * buf[k];
                }
            }
            (s, s2)
        })
        .collect();
    let mut s = vec![0.0; nodes];
    let mut s2 = vec![0.0; nodes];
    for (a, b) in &chunks {
        for k in 0..nodes {
            s[k] += a[k];
            s2[k] += b[k];
        }
    }
    let n = n_paths as f64;
    let mean: Vec<f64> = s.iter().map(|v| v / n).collect();
    let std_err = s2
        .iter()
        .zip(&mean)
        .map(|(q, m)| ((q / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(NodeMoments {
        n_paths,
        mean,
        std_err,
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<C: Fn(f64) -> f64>(samples: &[f64], cdf: C) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
