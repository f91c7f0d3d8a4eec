//! Growth models driven by aggregate wealth.
//!
//! Two pieces live here:
//!
//! * Pareto calculus: under linear controls `α(t,x) = γ_t x` and geometric
//!   common noise, a one-sided Pareto population stays Pareto with the same
//!   tail exponent and a moving left endpoint `q_t`.
//! * The Aiyagari diffusion game: Cobb–Douglas prices, a deterministic adjoint
//!   `Y` that decouples from the forward state, and a mean-wealth fixed point.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    cumulative_trapezoid, path_moments, path_rng, solve_fixed_point, FixedPointConfig,
    PathEnsemble, TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoState {
    pub k: f64,
    pub q: f64,
}

impl ParetoState {
    pub fn new(k: f64, q: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::param("k", format!("{k} must be positive")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::param("q", format!("{q} must be positive")));
        }
        Ok(Self { k, q })
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.q {
            0.0
        } else {
            self.k * self.q.powf(self.k) / x.powf(self.k + 1.0)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - pareto_tail(self, x)
    }

    /// Quantile function; `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.q * (1.0 - u).powf(-1.0 / self.k)
    }
}

/// Mass `μ([x, ∞))` of the Pareto law.
pub fn pareto_tail(state: &ParetoState, x: f64) -> f64 {
    if x <= state.q {
        1.0
    } else {
        (state.q / x).powf(state.k)
    }
}

/// Left endpoint `q_t = q_0·exp(∫γ − σ²t/2 + σW⁰_t)` on every node.
///
/// `gamma_path` and `w0_path` are nodal values on `grid` with `W⁰_{t0} = 0`.
pub fn propagate_pareto(
    state0: &ParetoState,
    gamma_path: &[f64],
    sigma: f64,
    w0_path: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let nodes = grid.node_count();
    if gamma_path.len() != nodes || w0_path.len() != nodes {
        return Err(Error::Domain(format!(
            "need {nodes} nodal values, got γ: {}, W⁰: {}",
            gamma_path.len(),
            w0_path.len()
        )));
    }
    if gamma_path.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::param(
            "gamma",
            "control coefficients must be nonnegative",
        ));
    }
    let integral = cumulative_trapezoid(gamma_path, grid.h());
    Ok((0..nodes)
        .map(|k| {
            let t = grid.time(k) - grid.t0();
            state0.q * (integral[k] - 0.5 * sigma * sigma * t + sigma * w0_path[k]).exp()
        })
        .collect())
}

/// Particles driven by `dX = γ_t X dt + σ X dW⁰` with one shared `W⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoParticles {
    /// Common-noise path on every node.
    pub w0: Vec<f64>,
    /// Particle states at the final node.
    pub terminal: Vec<f64>,
}

/// Euler simulation of the Pareto growth SDE from `X_0 ~ μ^(q_0)`.
///
/// The common noise is drawn from stream 0 of `seed`; initial draws for
/// particle `i` use stream `i + 1`.
pub fn simulate_pareto_particles(
    state0: &ParetoState,
    gamma_path: &[f64],
    sigma: f64,
    grid: &TimeGrid,
    n_particles: usize,
    seed: u64,
) -> Result<ParetoParticles> {
    if gamma_path.len() != grid.node_count() {
        return Err(Error::Domain("γ path must have one value per node".into()));
    }
    let h = grid.h();
    let mut rng = path_rng(seed, 0);
    let mut w0 = vec![0.0; grid.node_count()];
    let mut factors = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * h.sqrt();
        w0[k + 1] = w0[k] + dw;
        factors.push(1.0 + gamma_path[k] * h + sigma * dw);
    }
    let terminal = (0..n_particles)
        .map(|i| {
            let u: f64 = path_rng(seed, i + 1).random();
            let mut x = state0.quantile(u);
            for f in &factors {
                x *= f;
            }
            x
        })
        .collect();
    Ok(ParetoParticles { w0, terminal })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCostParams {
    pub a_exp: f64,
    pub b_exp: f64,
    pub c_coef: f64,
    pub e_coef: f64,
    pub p_exp: f64,
    pub sigma: f64,
}

impl GrowthCostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_exp > 1.0) {
            return Err(Error::param("p", format!("{} must exceed 1", self.p_exp)));
        }
        for (name, v) in [
            ("c", self.c_coef),
            ("E", self.e_coef),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if !(self.a_exp.is_finite() && self.b_exp.is_finite()) {
            return Err(Error::param("a, b", "exponents must be finite"));
        }
        Ok(())
    }
}

/// Maximiser `α̂ = ((y/E)·μ([x,∞))^b)^{1/(p−1)}` of `yα − (E/p)α^p/μ([x,∞))^b`.
pub fn growth_best_response(
    x: f64,
    state: &ParetoState,
    y: f64,
    cost: &GrowthCostParams,
) -> Result<f64> {
    cost.validate()?;
    let base = y / cost.e_coef * pareto_tail(state, x).powf(cost.b_exp);
    if base < 0.0 {
        return Err(Error::Domain(format!(
            "negative base {base} raised to 1/(p−1) = {}",
            1.0 / (cost.p_exp - 1.0)
        )));
    }
    Ok(base.powf(1.0 / (cost.p_exp - 1.0)))
}

/// Running cost `c·x^a/density^b − (E/p)·α^p/tail^b` under a Pareto law.
///
/// The density is zero left of `q`, where the first term is infinite.
pub fn growth_running_cost(
    x: f64,
    state: &ParetoState,
    alpha: f64,
    cost: &GrowthCostParams,
) -> f64 {
    let density = state.density(x);
    let crowding = if density > 0.0 {
        cost.c_coef * x.powf(cost.a_exp) / density.powf(cost.b_exp)
    } else {
        f64::INFINITY
    };
    crowding
        - cost.e_coef / cost.p_exp * alpha.powf(cost.p_exp) / pareto_tail(state, x).powf(cost.b_exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiyagariParams {
    pub alpha_cd: f64,
    pub a_tfp: f64,
    pub delta: f64,
    pub gamma_crra: f64,
    pub horizon: f64,
}

impl AiyagariParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_cd > 0.0 && self.alpha_cd < 1.0) {
            return Err(Error::param(
                "alpha",
                format!("{} not in (0, 1)", self.alpha_cd),
            ));
        }
        if !(self.a_tfp > 0.0 && self.a_tfp.is_finite()) {
            return Err(Error::param(
                "A",
                format!("{} must be positive", self.a_tfp),
            ));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param(
                "delta",
                format!("{} must be nonnegative", self.delta),
            ));
        }
        if !(self.gamma_crra > 0.0 && self.gamma_crra < 1.0) {
            return Err(Error::param(
                "gamma",
                format!("{} not in (0, 1)", self.gamma_crra),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param(
                "horizon",
                format!("{} must be positive", self.horizon),
            ));
        }
        Ok(())
    }

    /// Net capital return `αA·K^{α−1} − δ` without the domain check.
    fn rate(&self, k: f64) -> f64 {
        self.alpha_cd * self.a_tfp * k.powf(self.alpha_cd - 1.0) - self.delta
    }

    fn wage(&self, k: f64) -> f64 {
        (1.0 - self.alpha_cd) * self.a_tfp * k.powf(self.alpha_cd)
    }
}

/// Interest rate and wage `(r, w)` at aggregate capital `K` with unit labour.
pub fn cobb_douglas_rates(k: f64, params: &AiyagariParams) -> Result<(f64, f64)> {
    params.validate()?;
    if !(k > 0.0) {
        return Err(Error::Domain(format!("capital K = {k} must be positive")));
    }
    Ok((params.rate(k), params.wage(k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanWealthFlow {
    pub grid: TimeGrid,
    pub mu_bar: Vec<f64>,
}

impl MeanWealthFlow {
    pub fn new(grid: TimeGrid, mu_bar: Vec<f64>) -> Result<Self> {
        if mu_bar.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "flow has {} values for {} nodes",
                mu_bar.len(),
                grid.node_count()
            )));
        }
        if let Some(v) = mu_bar.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("mean wealth {v} must be positive")));
        }
        Ok(Self { grid, mu_bar })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.node_count()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPath {
    pub grid: TimeGrid,
    pub y: Vec<f64>,
    /// Interval `[−e^{cT}, −e^{−cT}]` with `c = sup_t |r_t|` that must contain `Y`.
    pub bounds: (f64, f64),
}

impl AdjointPath {
    /// Consumption `(−Y_t)^{−1/γ}` on every node.
    pub fn consumption(&self, gamma: f64) -> Vec<f64> {
        self.y.iter().map(|y| (-y).powf(-1.0 / gamma)).collect()
    }
}

/// `Y_t = −exp(∫_t^T r_s ds)` with `r_s = αAμ̄_s^{α−1} − δ`, trapezoid in time.
///
/// This is the solution of `dY = −Y·r_t dt`, `Y_T = −1`, for the piecewise
/// linear interpolant of the nodal rates.
pub fn solve_adjoint_backward(
    flow: &MeanWealthFlow,
    params: &AiyagariParams,
) -> Result<AdjointPath> {
    params.validate()?;
    MeanWealthFlow::new(flow.grid, flow.mu_bar.clone())?;
    let rates: Vec<f64> = flow.mu_bar.iter().map(|m| params.rate(*m)).collect();
    let forward = cumulative_trapezoid(&rates, flow.grid.h());
    let total = *forward.last().expect("grid has nodes");
    let y: Vec<f64> = forward.iter().map(|f| -(total - f).exp()).collect();

    let c = rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let span = flow.grid.t1() - flow.grid.t0();
    let bounds = (-(c * span).exp(), -(-c * span).exp());
    for (k, v) in y.iter().enumerate() {
        // small slack for the rounding in exp of the extreme integrals
        let slack = 1e-12 * v.abs();
        if *v < bounds.0 - slack || *v > bounds.1 + slack {
            return Err(Error::InvalidAdjoint {
                t: flow.grid.time(k),
                value: *v,
            });
        }
    }
    Ok(AdjointPath {
        grid: flow.grid,
        y,
        bounds,
    })
}

/// Initial wealth law of the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialWealth {
    Point { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl InitialWealth {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialWealth::Point { value } => value,
            InitialWealth::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialWealth::Point { value } => value,
            InitialWealth::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Productivity `Z` and wealth `A` inputs shared by the forward simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardInputs {
    pub z0: f64,
    pub a0: InitialWealth,
    /// Volatility of `Z`; 1 in the model, 0 for the deterministic reduction.
    pub z_vol: f64,
}

impl Default for ForwardInputs {
    fn default() -> Self {
        Self {
            z0: 1.0,
            a0: InitialWealth::Point { value: 1.0 },
            z_vol: 1.0,
        }
    }
}

struct ForwardCoefficients {
    wage: Vec<f64>,
    rate: Vec<f64>,
    consumption: Vec<f64>,
}

fn forward_coefficients(
    y: &AdjointPath,
    flow: &MeanWealthFlow,
    params: &AiyagariParams,
) -> Result<ForwardCoefficients> {
    params.validate()?;
    if y.grid != flow.grid {
        return Err(Error::Domain("adjoint and flow grids differ".into()));
    }
    if let Some(k) = y.y.iter().position(|v| !(*v < 0.0)) {
        return Err(Error::InvalidAdjoint {
            t: y.grid.time(k),
            value: y.y[k],
        });
    }
    Ok(ForwardCoefficients {
        wage: flow.mu_bar.iter().map(|m| params.wage(*m)).collect(),
        rate: flow.mu_bar.iter().map(|m| params.rate(*m)).collect(),
        consumption: y.consumption(params.gamma_crra),
    })
}

fn forward_path<R: Rng>(
    c: &ForwardCoefficients,
    inputs: &ForwardInputs,
    h: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let steps = c.rate.len() - 1;
    let sqrt_h = h.sqrt();
    let mut z = inputs.z0;
    let mut a = inputs.a0.sample(rng);
    out[0] = z;
    out[1] = a;
    for k in 0..steps {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_h;
        let a_next = a + (c.wage[k] * z + c.rate[k] * a - c.consumption[k]) * h;
        z += -(z - 1.0) * h + inputs.z_vol * dw;
        a = a_next;
        out[2 * (k + 1)] = z;
        out[2 * (k + 1) + 1] = a;
    }
}

/// Euler paths of `(Z, A)` under the adjoint `Y` and the frozen flow `μ̄`.
///
/// `dZ = −(Z−1)dt + dW`,
/// `dA = [(1−α)Aμ̄^α Z + (αAμ̄^{α−1}−δ)A − (−Y)^{−1/γ}]dt`.
/// Component 0 is `Z`, component 1 is `A`.
pub fn simulate_forward_state(
    y: &AdjointPath,
    flow: &MeanWealthFlow,
    params: &AiyagariParams,
    inputs: &ForwardInputs,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let coef = forward_coefficients(y, flow, params)?;
    let h = flow.grid.h();
    PathEnsemble::generate(&flow.grid, 2, n_paths, seed, |_, rng, out| {
        forward_path(&coef, inputs, h, rng, out);
        out.iter().any(|v| !v.is_finite())
    })
}

/// Sample mean of `A_t` (with standard errors) under a frozen flow.
pub fn mean_wealth(
    y: &AdjointPath,
    flow: &MeanWealthFlow,
    params: &AiyagariParams,
    inputs: &ForwardInputs,
    n_paths: usize,
    seed: u64,
) -> Result<crate::numerics::NodeMoments> {
    let coef = forward_coefficients(y, flow, params)?;
    let h = flow.grid.h();
    let nodes = flow.grid.node_count();
    path_moments(nodes, n_paths, seed, |_, rng, out| {
        let mut buf = vec![0.0; 2 * nodes];
        forward_path(&coef, inputs, h, rng, &mut buf);
        for k in 0..nodes {
            out[k] = buf[2 * k + 1];
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AiyagariSolution {
    pub flow: MeanWealthFlow,
    pub adjoint: AdjointPath,
    pub residuals: Vec<f64>,
    /// Standard error of the Monte Carlo mean at every node of the final map.
    pub std_err: Vec<f64>,
    /// Set when some iterate had nonpositive mean wealth and was floored.
    pub floored: bool,
}

/// Floor applied to the mean-wealth iterate to keep prices defined.
pub const MEAN_WEALTH_FLOOR: f64 = 1e-8;

/// Damped fixed point `μ̄ ← E[A_t]` with common random numbers frozen across
/// iterations. The initial guess is the constant initial mean wealth.
pub fn solve_aiyagari_mfg(
    params: &AiyagariParams,
    inputs: &ForwardInputs,
    grid: &TimeGrid,
    cfg: &FixedPointConfig,
    n_paths: usize,
    seed: u64,
) -> Result<AiyagariSolution> {
    params.validate()?;
    let m0 = inputs.a0.mean();
    if !(m0 > 0.0) {
        return Err(Error::param(
            "a0",
            format!("initial mean wealth {m0} must be positive"),
        ));
    }
    let mut floored = false;
    let map = |mu: &[f64]| -> Result<Vec<f64>> {
        let flow = MeanWealthFlow::new(*grid, mu.to_vec())?;
        let y = solve_adjoint_backward(&flow, params)?;
        let moments = mean_wealth(&y, &flow, params, inputs, n_paths, seed)?;
        Ok(moments
            .mean
            .into_iter()
            .map(|m| {
                if m > MEAN_WEALTH_FLOOR {
                    m
                } else {
                    floored = true;
                    MEAN_WEALTH_FLOOR
                }
            })
            .collect())
    };
    let outcome = solve_fixed_point(map, vec![m0; grid.node_count()], cfg)?;
    let flow = MeanWealthFlow::new(*grid, outcome.value)?;
    let adjoint = solve_adjoint_backward(&flow, params)?;
    let std_err = mean_wealth(&adjoint, &flow, params, inputs, n_paths, seed)?.std_err;
    Ok(AiyagariSolution {
        flow,
        adjoint,
        residuals: outcome.residuals,
        std_err,
        floored,
    })
}
