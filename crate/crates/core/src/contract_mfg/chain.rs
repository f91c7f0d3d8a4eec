//! Continuous-time chains under a feedback, by thinning.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::numerics::{path_moments, NodeMoments, PathEnsemble, TimeGrid};

use super::model::FiniteStateModel;
use super::nash::MfgEquilibrium;

/// Generators at the grid nodes, linearly interpolated in between.
///
/// The exit rate at any time is a convex combination of nodal exit rates,
/// so the largest nodal one bounds it on the whole horizon.
struct ChainSampler<'a> {
    grid: TimeGrid,
    m: usize,
    q: Vec<f64>,
    bound: f64,
    p0: &'a [f64],
}

impl<'a> ChainSampler<'a> {
    fn new(model: &'a FiniteStateModel, grid: &TimeGrid, alpha: &[f64], p: &[f64]) -> Result<Self> {
        let m = model.m;
        let n = grid.node_count();
        if alpha.len() != n * m || p.len() != n * m {
            return Err(Error::Domain(format!(
                "feedback and flow need {} entries",
                n * m
            )));
        }
        let mut q = vec![0.0; n * m * m];
        for k in 0..n {
            model.assemble(
                grid.time(k),
                &alpha[k * m..(k + 1) * m],
                &p[k * m..(k + 1) * m],
                &mut q[k * m * m..(k + 1) * m * m],
            );
        }
        let bound = (0..n * m).map(|r| -q[r * m + r % m]).fold(0.0, f64::max);
        Ok(Self {
            grid: *grid,
            m,
            q,
            bound,
            p0: &model.p0,
        })
    }

    fn rate(&self, t: f64, i: usize, j: usize) -> f64 {
        let m2 = self.m * self.m;
        let (k, w) = self
            .grid
            .locate(t)
            .unwrap_or((self.grid.steps().saturating_sub(1), 1.0));
        let a = self.q[k * m2 + i * self.m + j];
        let b = self.q[((k + 1).min(self.grid.steps())) * m2 + i * self.m + j];
        (1.0 - w) * a + w * b
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.p0.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.p0.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// Writes the state at every grid node.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [usize]) {
        let mut x = self.draw_initial(rng);
        out[0] = x;
        let t_end = self.grid.t1();
        let mut next_node = 1;
        let mut t = 0.0;
        loop {
            t = if self.bound > 0.0 {
                let e: f64 = rng.sample(Exp1);
                t + e / self.bound
            } else {
                f64::INFINITY
            };
            while next_node < out.len() && self.grid.time(next_node) < t {
                out[next_node] = x;
                next_node += 1;
            }
            if t >= t_end {
                for o in out[next_node..].iter_mut() {
                    *o = x;
                }
                return;
            }
            let exit = -self.rate(t, x, x);
            let u: f64 = rng.random::<f64>() * self.bound;
            if u < exit {
                let mut acc = 0.0;
                let mut target = x;
                for j in (0..self.m).filter(|j| *j != x) {
                    acc += self.rate(t, x, j).max(0.0);
                    target = j;
                    if u < acc {
                        break;
                    }
                }
                x = target;
            }
        }
    }
}

/// State paths on the equilibrium grid, stored as `f64` state indices.
///
/// Each path draws its initial state from `p°` and then jumps by thinning
/// against the largest nodal exit rate; jumps are exact in law for the
/// piecewise-linear generator.
pub fn simulate_chain(
    model: &FiniteStateModel,
    eq: &MfgEquilibrium,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let sampler = ChainSampler::new(model, &eq.grid, &eq.alpha, &eq.p)?;
    let n = eq.grid.node_count();
    PathEnsemble::generate(&eq.grid, 1, n_paths, seed, |_, rng, out| {
        let mut states = vec![0usize; n];
        sampler.sample(rng, &mut states);
        for (o, s) in out.iter_mut().zip(&states) {
            *o = *s as f64;
        }
        false
    })
}

/// Occupancy frequencies per node and state (entry `k·m + i`), streamed
/// without storing the paths. Uses the same per-path streams as
/// [`simulate_chain`].
pub fn chain_occupancy(
    model: &FiniteStateModel,
    eq: &MfgEquilibrium,
    n_paths: usize,
    seed: u64,
) -> Result<NodeMoments> {
    let sampler = ChainSampler::new(model, &eq.grid, &eq.alpha, &eq.p)?;
    let n = eq.grid.node_count();
    let m = model.m;
    path_moments(n * m, n_paths, seed, |_, rng, out| {
        let mut states = vec![0usize; n];
        sampler.sample(rng, &mut states);
        out.fill(0.0);
        for (k, s) in states.iter().enumerate() {
            out[k * m + s] = 1.0;
        }
    })
}

/// Largest nodal exit rate, the thinning bound.
pub fn thinning_bound(model: &FiniteStateModel, eq: &MfgEquilibrium) -> Result<f64> {
    Ok(ChainSampler::new(model, &eq.grid, &eq.alpha, &eq.p)?.bound)
}
