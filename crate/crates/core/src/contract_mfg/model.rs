//! Finite-state model of the solvable class, contracts and the Hamiltonian.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fills the `m×m` row-major matrix of base rates `q̄_ij(t, p)`; the diagonal is ignored.
pub type RateFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Fills the per-state running cost `c₁(t, i, p)`.
pub type StateCostFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
pub type FlowCostFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type TerminalCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Utility of the running payment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentUtility {
    #[default]
    Linear,
    /// `√(1+r) − 1`
    SqrtShifted,
}

impl PaymentUtility {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PaymentUtility::Linear => r,
            PaymentUtility::SqrtShifted => (1.0 + r).sqrt() - 1.0,
        }
    }
}

/// Rates `q̄_ij(t,p) + λ_ij(α − α̲)` and costs `c₁(t,i,p) + γ_i α²/2`.
#[derive(Clone)]
pub struct FiniteStateModel {
    pub m: usize,
    pub base_rates: RateFn,
    /// Row-major `m×m`, diagonal ignored.
    pub lambda: Vec<f64>,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub c1: StateCostFn,
    pub gamma: Vec<f64>,
    pub utility: PaymentUtility,
    pub horizon: f64,
    pub p0: Vec<f64>,
    /// Declared bounds on every positive off-diagonal rate.
    pub rate_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for FiniteStateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteStateModel")
            .field("m", &self.m)
            .field("lambda", &self.lambda)
            .field("alpha", &(self.alpha_lo, self.alpha_hi))
            .field("gamma", &self.gamma)
            .field("utility", &self.utility)
            .field("horizon", &self.horizon)
            .field("p0", &self.p0)
            .finish_non_exhaustive()
    }
}

pub(crate) fn check_simplex(name: &'static str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(name, "entries must be finite and nonnegative"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::param(name, format!("entries sum to {s}, not 1")));
    }
    Ok(())
}

impl FiniteStateModel {
    /// Time- and population-independent rates and costs.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        base: Vec<f64>,
        lambda: Vec<f64>,
        alpha_bounds: (f64, f64),
        c1: Vec<f64>,
        gamma: Vec<f64>,
        horizon: f64,
        p0: Vec<f64>,
    ) -> Result<Self> {
        let m = p0.len();
        if base.len() != m * m || c1.len() != m {
            return Err(Error::param(
                "base_rates",
                format!("expected {m}×{m} rates and {m} costs"),
            ));
        }
        let model = Self {
            m,
            base_rates: Arc::new(move |_, _, out| out.copy_from_slice(&base)),
            lambda,
            alpha_lo: alpha_bounds.0,
            alpha_hi: alpha_bounds.1,
            c1: Arc::new(move |_, _, out| out.copy_from_slice(&c1)),
            gamma,
            utility: PaymentUtility::Linear,
            horizon,
            p0,
            rate_bounds: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks shapes, signs and the initial law. Rows of `λ` may vanish: such
    /// a state has no control and its minimizer sits at `α̲`.
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m < 2 {
            return Err(Error::param("m", "need at least two states"));
        }
        if self.lambda.len() != m * m || self.gamma.len() != m || self.p0.len() != m {
            return Err(Error::param(
                "model",
                format!("shapes do not match {m} states"),
            ));
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::param(
                "lambda",
                "entries must be finite and nonnegative",
            ));
        }
        if self.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::param("gamma", "weights must be positive"));
        }
        if !(self.alpha_lo >= 0.0 && self.alpha_lo <= self.alpha_hi && self.alpha_hi.is_finite()) {
            return Err(Error::param("alpha", "need 0 ≤ α̲ ≤ ᾱ < ∞"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if let Some((lo, hi)) = self.rate_bounds {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::param("rate_bounds", "need 0 < C₁ < C₂"));
            }
        }
        check_simplex("p0", &self.p0)
    }

    pub fn lambda_at(&self, i: usize, j: usize) -> f64 {
        self.lambda[i * self.m + j]
    }

    /// Generator for per-state actions; no bounds checks.
    pub(crate) fn assemble(&self, t: f64, alpha: &[f64], p: &[f64], q: &mut [f64]) {
        let m = self.m;
        (self.base_rates)(t, p, q);
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                if j != i {
                    let v = q[i * m + j] + self.lambda[i * m + j] * (alpha[i] - self.alpha_lo);
                    q[i * m + j] = v;
                    row += v;
                }
            }
            q[i * m + i] = -row;
        }
    }

    /// Positive off-diagonal rates of `q` outside the declared bounds.
    pub(crate) fn bound_violations(&self, q: &[f64]) -> usize {
        let Some((lo, hi)) = self.rate_bounds else {
            return 0;
        };
        let m = self.m;
        (0..m * m)
            .filter(|&k| k / m != k % m && q[k] > 0.0 && !(lo <= q[k] && q[k] <= hi))
            .count()
    }
}

/// Generator `Q(t, α, p)` with diagonal equal to minus the row sums.
pub fn build_q_matrix(
    model: &FiniteStateModel,
    t: f64,
    alpha: &[f64],
    p: &[f64],
) -> Result<Vec<f64>> {
    if alpha.len() != model.m || p.len() != model.m {
        return Err(Error::Domain(format!(
            "expected {} actions and weights",
            model.m
        )));
    }
    if let Some(a) = alpha
        .iter()
        .find(|a| !(model.alpha_lo..=model.alpha_hi).contains(*a))
    {
        return Err(Error::Domain(format!(
            "action {a} outside [{}, {}]",
            model.alpha_lo, model.alpha_hi
        )));
    }
    check_simplex("p", p)?;
    let mut q = vec![0.0; model.m * model.m];
    model.assemble(t, alpha, p, &mut q);
    if q.iter()
        .enumerate()
        .any(|(k, v)| k / model.m != k % model.m && *v < 0.0)
    {
        return Err(Error::Domain("negative off-diagonal rate".into()));
    }
    Ok(q)
}

/// Running payment on uniform knots plus a terminal payment per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub r_knots: Vec<f64>,
    pub xi: Vec<f64>,
}

impl Contract {
    pub fn zero(m: usize, knots: usize) -> Self {
        Self {
            r_knots: vec![0.0; knots.max(1)],
            xi: vec![0.0; m],
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.r_knots.is_empty() || self.xi.len() != m {
            return Err(Error::param(
                "contract",
                format!("need ≥ 1 knot and {m} terminal payments"),
            ));
        }
        if self.r_knots.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::param(
                "r_knots",
                "payments must be finite and nonnegative",
            ));
        }
        if self.xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("xi", "terminal payments must be finite"));
        }
        Ok(())
    }

    /// Piecewise-constant payment; knot `k` covers `[kT/K, (k+1)T/K)`.
    pub fn payment(&self, t: f64, horizon: f64) -> f64 {
        knot_value(&self.r_knots, t, horizon)
    }

    /// Exact `∫₀ᵀ r_t dt`.
    pub fn total_payment(&self, horizon: f64) -> f64 {
        horizon * self.r_knots.iter().sum::<f64>() / self.r_knots.len() as f64
    }
}

pub(crate) fn knot_index(count: usize, t: f64, horizon: f64) -> usize {
    let s = (t / horizon * count as f64).floor();
    if s <= 0.0 {
        0
    } else {
        (s as usize).min(count - 1)
    }
}

pub(crate) fn knot_value(knots: &[f64], t: f64, horizon: f64) -> f64 {
    knots[knot_index(knots.len(), t, horizon)]
}

/// Minimizer and value of the Hamiltonian in one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMin {
    pub alpha: f64,
    /// `c₁ + γα̂²/2 + Σ_j (Q − Q⁰)_ij z_j` with `Q⁰` the unit-rate generator;
    /// the payment utility is left to the caller.
    pub value: f64,
}

/// Closed-form minimizer given the state cost and the base-rate row.
pub(crate) fn hamiltonian_in_state(
    model: &FiniteStateModel,
    i: usize,
    c1_i: f64,
    base_row: &[f64],
    z: &[f64],
) -> HamiltonianMin {
    let m = model.m;
    let mut slope = 0.0;
    for j in 0..m {
        if j != i {
            slope += model.lambda[i * m + j] * (z[j] - z[i]);
        }
    }
    // `+ 0.0` turns a clamped −0 into +0
    let alpha = (-slope / model.gamma[i]).clamp(model.alpha_lo, model.alpha_hi) + 0.0;
    let mut value = c1_i + 0.5 * model.gamma[i] * alpha * alpha;
    for j in 0..m {
        if j != i {
            let q = base_row[j] + model.lambda[i * m + j] * (alpha - model.alpha_lo);
            value += (q - 1.0) * (z[j] - z[i]);
        }
    }
    HamiltonianMin { alpha, value }
}

/// `α̂ = clamp(−(1/γ_i) Σ_{j≠i} λ_ij (z_j − z_i))` and the minimized value.
pub fn minimize_hamiltonian(
    model: &FiniteStateModel,
    t: f64,
    i: usize,
    z: &[f64],
    p: &[f64],
) -> HamiltonianMin {
    let m = model.m;
    let mut c1 = vec![0.0; m];
    (model.c1)(t, p, &mut c1);
    let mut base = vec![0.0; m * m];
    (model.base_rates)(t, p, &mut base);
    hamiltonian_in_state(model, i, c1[i], &base[i * m..(i + 1) * m], z)
}

/// Regulator costs and the participation threshold.
#[derive(Clone)]
pub struct PrincipalSpec {
    pub c0: FlowCostFn,
    pub terminal: TerminalCostFn,
    pub kappa: f64,
}

impl PrincipalSpec {
    pub fn costless(kappa: f64) -> Self {
        Self {
            c0: Arc::new(|_, _| 0.0),
            terminal: Arc::new(|_| 0.0),
            kappa,
        }
    }
}

impl fmt::Debug for PrincipalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrincipalSpec")
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}
