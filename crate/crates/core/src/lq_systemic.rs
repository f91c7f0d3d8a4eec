//! Linear-quadratic inter-bank borrowing and lending game with common noise.
//!
//! Bank `i` controls its log-reserve drift `α^i` and pays
//! `½α² − qα(X̄−X^i) + (ε/2)(X̄−X^i)²` per unit time plus
//! `(c/2)(X̄_T−X^i_T)²` at the horizon. Equilibria are linear feedbacks in
//! `X̄ − X^i` whose gain is driven by a scalar Riccati equation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    integrate_ode, mean_and_stderr, trapezoid, Direction, PathEnsemble, TimeGrid,
};

/// Population size, with an explicit marker for the mean-field limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Players {
    Finite(usize),
    Infinite,
}

impl Players {
    /// `1/N`, zero at the limit marker.
    pub fn inverse(&self) -> f64 {
        match self {
            Players::Finite(n) => 1.0 / *n as f64,
            Players::Infinite => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqParams {
    pub a: f64,
    pub q: f64,
    pub eps: f64,
    pub c: f64,
    pub sigma: f64,
    pub rho_corr: f64,
    pub n_players: Players,
    pub horizon: f64,
}

impl LqParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.a,
            self.q,
            self.eps,
            self.c,
            self.sigma,
            self.rho_corr,
            self.horizon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("lq", "all parameters must be finite"));
        }
        if self.a < 0.0 {
            return Err(Error::param("a", format!("{} must be nonnegative", self.a)));
        }
        if self.q < 0.0 {
            return Err(Error::param("q", format!("{} must be nonnegative", self.q)));
        }
        if self.c < 0.0 {
            return Err(Error::param("c", format!("{} must be nonnegative", self.c)));
        }
        if self.eps < self.q * self.q {
            return Err(Error::param(
                "eps",
                format!(
                    "eps = {} must be at least q² = {}",
                    self.eps,
                    self.q * self.q
                ),
            ));
        }
        if self.sigma < 0.0 {
            return Err(Error::param(
                "sigma",
                format!("{} must be nonnegative", self.sigma),
            ));
        }
        if !(0.0..=1.0).contains(&self.rho_corr) {
            return Err(Error::param(
                "rho",
                format!("{} not in [0, 1]", self.rho_corr),
            ));
        }
        if let Players::Finite(n) = self.n_players {
            if n < 2 {
                return Err(Error::param("n_players", format!("{n} must be at least 2")));
            }
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param(
                "horizon",
                format!("{} must be positive", self.horizon),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopKind {
    Open,
    Closed,
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    pub grid: TimeGrid,
    pub eta: Vec<f64>,
    pub loop_kind: LoopKind,
}

impl RiccatiPath {
    pub fn eta_at(&self, t: f64) -> Result<f64> {
        self.grid.interpolate(&self.eta, t)
    }
}

/// Right-hand side `η̇` of the Riccati equation of the given kind.
pub fn riccati_rhs(params: &LqParams, kind: LoopKind, eta: f64) -> f64 {
    let inv_n = params.n_players.inverse();
    let (a, q, eps) = (params.a, params.q, params.eps);
    match kind {
        LoopKind::Open => 2.0 * (a + q - q * inv_n) * eta + (1.0 - inv_n) * eta * eta + q * q - eps,
        LoopKind::Closed => 2.0 * (a + q) * eta + (1.0 - inv_n * inv_n) * eta * eta + q * q - eps,
        LoopKind::Limit => 2.0 * (a + q) * eta + eta * eta + q * q - eps,
    }
}

/// Backward RK4 solve with terminal value `η_T = c`.
pub fn solve_riccati(
    params: &LqParams,
    grid: &TimeGrid,
    loop_kind: LoopKind,
) -> Result<RiccatiPath> {
    params.validate()?;
    let path = integrate_ode(
        |_, y, dy| dy[0] = riccati_rhs(params, loop_kind, y[0]),
        &[params.c],
        grid,
        Direction::Backward,
    )?;
    Ok(RiccatiPath {
        grid: *grid,
        eta: path.component(0),
        loop_kind,
    })
}

/// Gain `g_t = q + (1 − 1/N)·η_t`; player `i` plays `g_t·(x̄ − x^i)`.
pub fn feedback_gain(t: f64, riccati: &RiccatiPath, params: &LqParams) -> Result<f64> {
    let eta = riccati.eta_at(t)?;
    Ok(params.q + (1.0 - params.n_players.inverse()) * eta)
}

fn nodal_gains(riccati: &RiccatiPath, params: &LqParams) -> Vec<f64> {
    let w = 1.0 - params.n_players.inverse();
    riccati.eta.iter().map(|e| params.q + w * e).collect()
}

/// A single player scaling its equilibrium feedback gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub player: usize,
    pub gain_scale: f64,
}

fn check_inputs(params: &LqParams, x0: &[f64]) -> Result<usize> {
    params.validate()?;
    let n = match params.n_players {
        Players::Finite(n) => n,
        Players::Infinite => {
            return Err(Error::Domain(
                "simulation needs a finite number of players".into(),
            ))
        }
    };
    if x0.len() != n {
        return Err(Error::Domain(format!(
            "x0 has {} entries for {} players",
            x0.len(),
            n
        )));
    }
    Ok(n)
}

/// Euler paths of the equilibrium bank states.
///
/// Each sample shares one `W⁰` among the banks; the idiosyncratic `W^i` are
/// independent. The ensemble has one component per bank.
pub fn simulate_equilibrium(
    params: &LqParams,
    riccati: &RiccatiPath,
    x0: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_with_deviation(params, riccati, x0, n_samples, seed, None)
}

/// As [`simulate_equilibrium`], with one player optionally scaling its gain.
///
/// With the same seed the Brownian increments are identical to the
/// equilibrium run, which pairs the two cost estimates.
pub fn simulate_with_deviation(
    params: &LqParams,
    riccati: &RiccatiPath,
    x0: &[f64],
    n_samples: usize,
    seed: u64,
    deviation: Option<Deviation>,
) -> Result<PathEnsemble> {
    let n = check_inputs(params, x0)?;
    if let Some(d) = deviation {
        if d.player >= n {
            return Err(Error::Domain(format!(
                "deviating player {} of {}",
                d.player, n
            )));
        }
    }
    let grid = riccati.grid;
    let gains = nodal_gains(riccati, params);
    let h = grid.h();
    let sqrt_h = h.sqrt();
    let common = params.sigma * params.rho_corr;
    let idio = params.sigma * (1.0 - params.rho_corr * params.rho_corr).max(0.0).sqrt();
    let a = params.a;

    PathEnsemble::generate(&grid, n, n_samples, seed, |_, rng, out| {
        let mut x = x0.to_vec();
        let mut next = vec![0.0; n];
        out[..n].copy_from_slice(&x);
        let mut bad = false;
        for k in 0..grid.steps() {
            let mean = x.iter().sum::<f64>() / n as f64;
            let dw0: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_h;
            for i in 0..n {
                let dwi: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_h;
                let mut g = gains[k];
                if let Some(d) = deviation {
                    if d.player == i {
                        g *= d.gain_scale;
                    }
                }
                next[i] = x[i] + (a + g) * (mean - x[i]) * h + common * dw0 + idio * dwi;
            }
            std::mem::swap(&mut x, &mut next);
            bad |= x.iter().any(|v| !v.is_finite());
            out[(k + 1) * n..(k + 2) * n].copy_from_slice(&x);
        }
        bad
    })
}

/// Per-player Monte Carlo cost with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Realized cost of `player` on every sample of `ensemble`.
///
/// The control is the feedback `g_t·(X̄ − X^i)`, with `g_t` scaled for a
/// deviating player. Running cost uses the trapezoid rule on grid nodes.
pub fn player_cost_samples(
    params: &LqParams,
    ensemble: &PathEnsemble,
    riccati: &RiccatiPath,
    player: usize,
    deviation: Option<Deviation>,
) -> Result<Vec<f64>> {
    let n = ensemble.dim;
    if player >= n {
        return Err(Error::Domain(format!("player {player} of {n}")));
    }
    if ensemble.grid != riccati.grid {
        return Err(Error::Domain("ensemble and Riccati grids differ".into()));
    }
    let gains = nodal_gains(riccati, params);
    let scale = match deviation {
        Some(d) if d.player == player => d.gain_scale,
        _ => 1.0,
    };
    let nodes = ensemble.grid.node_count();
    let h = ensemble.grid.h();
    let mut running = vec![0.0; nodes];
    Ok((0..ensemble.n_paths())
        .map(|p| {
            let path = ensemble.path(p);
            let mut gap_t = 0.0;
            for k in 0..nodes {
                let state = &path[k * n..(k + 1) * n];
                let gap = state.iter().sum::<f64>() / n as f64 - state[player];
                let alpha = scale * gains[k] * gap;
                running[k] =
                    0.5 * alpha * alpha - params.q * alpha * gap + 0.5 * params.eps * gap * gap;
                gap_t = gap;
            }
            trapezoid(&running, h) + 0.5 * params.c * gap_t * gap_t
        })
        .collect())
}

/// Cost of every player under equilibrium play.
pub fn estimate_cost(
    params: &LqParams,
    ensemble: &PathEnsemble,
    riccati: &RiccatiPath,
) -> Result<CostEstimate> {
    let mut mean = Vec::with_capacity(ensemble.dim);
    let mut std_err = Vec::with_capacity(ensemble.dim);
    for i in 0..ensemble.dim {
        let samples = player_cost_samples(params, ensemble, riccati, i, None)?;
        let (m, s) = mean_and_stderr(&samples);
        mean.push(m);
        std_err.push(s);
    }
    Ok(CostEstimate { mean, std_err })
}

/// Cross-sectional mean of the bank states at every node of one sample.
pub fn empirical_mean_path(ensemble: &PathEnsemble, sample: usize) -> Vec<f64> {
    let n = ensemble.dim;
    ensemble
        .path(sample)
        .chunks(n)
        .map(|s| s.iter().sum::<f64>() / n as f64)
        .collect()
}
