//! Money and capital economies with logarithmic utility.
//!
//! The one-population economy has a stationary equilibrium in closed form
//! once existence holds. The two-population economy (experts and households)
//! reduces to a scalar wealth-share diffusion `η_t` driven by the common
//! noise; it is simulated in log-odds coordinates so that paths never leave
//! `(0, 1)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::numerics::{path_rng, PathEnsemble, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePopParams {
    pub a: f64,
    pub rho: f64,
    pub kappa: f64,
    pub delta: f64,
    pub sigma: f64,
    pub sigma0: f64,
    #[serde(rename = "muM")]
    pub mu_m: f64,
    #[serde(rename = "sigmaM")]
    pub sigma_m: f64,
}

impl OnePopParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.rho,
            self.kappa,
            self.delta,
            self.sigma,
            self.sigma0,
            self.mu_m,
            self.sigma_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("one_pop", "all parameters must be finite"));
        }
        for (name, v) in [
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        for (name, v) in [
            ("delta", self.delta),
            ("sigma0", self.sigma0),
            ("sigmaM", self.sigma_m),
        ] {
            if v < 0.0 {
                return Err(Error::param(name, format!("{v} must be nonnegative")));
            }
        }
        if !(1.0 + self.kappa * self.a > 0.0) {
            return Err(Error::param("a", "1 + κa must be positive"));
        }
        Ok(())
    }
}

/// Stationary one-population equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePopEquilibrium {
    /// Nominal share of wealth `ϑ = p/(p+q)`.
    pub vartheta: f64,
    /// `1 − ϑ`, computed directly to avoid cancellation.
    pub one_minus_vartheta: f64,
    pub p: f64,
    pub q: f64,
    pub p_plus_q: f64,
    pub iota: f64,
    pub r: f64,
    pub theta: f64,
    /// Value of the printed money coefficient `ϑ(1−κa)/(1−ϑ+κρ)`, kept for comparison.
    pub p_printed: f64,
}

fn adjustment(iota: f64, kappa: f64) -> f64 {
    (kappa * iota).ln_1p() / kappa
}

/// Closed-form stationary equilibrium after checking the existence conditions.
pub fn one_pop_stationary_equilibrium(params: &OnePopParams) -> Result<OnePopEquilibrium> {
    params.validate()?;
    let OnePopParams {
        a,
        rho,
        kappa,
        delta,
        sigma,
        sigma0,
        mu_m,
        sigma_m,
    } = *params;
    let gap = rho + mu_m - sigma_m * sigma_m;
    if !(gap > 0.0) {
        return Err(Infeasibility::NonPositiveRateGap { value: gap }.into());
    }
    let bound = gap.sqrt();
    if !(sigma > bound) {
        return Err(Infeasibility::VolatilityTooSmall { sigma, bound }.into());
    }
    let omv = bound / sigma;
    let vartheta = 1.0 - omv;
    let denom = omv + kappa * rho;
    let p_plus_q = (1.0 + kappa * a) / denom;
    let q = omv * p_plus_q;
    let p = vartheta * p_plus_q;
    let iota = (omv * a - rho) / denom;

    let ratio = ((a - iota) / q * omv + mu_m) / (sigma_m * sigma_m + sigma * sigma * omv * omv);
    let spread = sigma0 - sigma_m;
    let r = adjustment(iota, kappa)
        - delta
        - (mu_m + sigma_m * spread)
        - spread * (spread + sigma_m * ratio);

    Ok(OnePopEquilibrium {
        vartheta,
        one_minus_vartheta: omv,
        p,
        q,
        p_plus_q,
        iota,
        r,
        theta: vartheta,
        p_printed: vartheta * (1.0 - kappa * a) / denom,
    })
}

/// Household portfolio `1 − θ̂` implied by the pricing equation.
///
/// At equilibrium this equals `1 − ϑ`.
pub fn one_pop_portfolio_from_pricing(params: &OnePopParams, eq: &OnePopEquilibrium) -> f64 {
    let omv = eq.one_minus_vartheta;
    let num = (params.a - eq.iota) / eq.q * omv + params.mu_m;
    let den = params.sigma_m * params.sigma_m + params.sigma * params.sigma * omv * omv;
    num / den * omv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPopParams {
    pub a: f64,
    pub rho: f64,
    pub kappa: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl TwoPopParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.rho, self.kappa, self.delta, self.sigma];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("two_pop", "all parameters must be finite"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::param(
                "kappa",
                format!("{} must be positive", self.kappa),
            ));
        }
        if self.sigma < 0.0 {
            return Err(Error::param(
                "sigma",
                format!("{} must be nonnegative", self.sigma),
            ));
        }
        if !(1.0 + self.kappa * self.a > 0.0) {
            return Err(Error::param("a", "1 + κa must be positive"));
        }
        if !(1.0 + self.kappa * self.rho > 0.0) {
            return Err(Error::param("rho", "1 + κρ must be positive"));
        }
        Ok(())
    }
}

/// Capital price and investment rate `(q, ι)`.
pub fn two_pop_constants(params: &TwoPopParams) -> Result<(f64, f64)> {
    params.validate()?;
    let den = 1.0 + params.kappa * params.rho;
    Ok((
        (1.0 + params.kappa * params.a) / den,
        (params.a - params.rho) / den,
    ))
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")))
    }
}

/// Equilibrium rate `r = ρ + κ⁻¹log((1+κa)/(1+κρ)) − δ − σ²/η`.
pub fn two_pop_interest_rate(eta: f64, params: &TwoPopParams) -> Result<f64> {
    params.validate()?;
    open_unit("eta", eta)?;
    let (q, _) = two_pop_constants(params)?;
    Ok(params.rho + q.ln() / params.kappa - params.delta - params.sigma * params.sigma / eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerDiagnostics {
    pub scale: f64,
    pub speed_density: f64,
}

/// Scale function `½(1 − 1/(2x))` and speed density `(8/σ²)x²/(1−x)²`.
pub fn feller_diagnostics(params: &TwoPopParams, x: f64) -> Result<FellerDiagnostics> {
    params.validate()?;
    open_unit("x", x)?;
    let s2 = params.sigma * params.sigma;
    if s2 == 0.0 {
        return Err(Error::param(
            "sigma",
            "speed measure needs positive volatility",
        ));
    }
    Ok(FellerDiagnostics {
        scale: 0.5 * (1.0 - 1.0 / (2.0 * x)),
        speed_density: 8.0 / s2 * x * x / ((1.0 - x) * (1.0 - x)),
    })
}

/// Drift `σ²(1−η)²/η` of the wealth share.
pub fn eta_drift(params: &TwoPopParams, eta: f64) -> f64 {
    params.sigma * params.sigma * (1.0 - eta) * (1.0 - eta) / eta
}

/// `η` and `1 − η` from the log-odds `λ`, each without cancellation.
pub fn shares_from_log_odds(lambda: f64) -> (f64, f64) {
    if lambda >= 0.0 {
        let e = (-lambda).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = lambda.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSchemeConfig {
    /// Keep every `record_every`-th node of the grid.
    pub record_every: usize,
    /// Bound on the per-substep variance of `λ`, `σ²h_sub/η²`.
    pub substep_variance: f64,
    /// Safety limit on substeps per grid step; the remainder of the step is
    /// taken in one move once it is reached.
    pub max_substeps: usize,
    /// Number of equal-width bins on `(0, 1)` for drift statistics; 0 disables them.
    pub drift_bins: usize,
}

impl Default for EtaSchemeConfig {
    fn default() -> Self {
        Self {
            record_every: 1,
            substep_variance: 2e-3,
            max_substeps: 1_000_000,
            drift_bins: 0,
        }
    }
}

/// Per-bin sums of one-step drift estimates, keyed by the starting `η`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftBins {
    pub count: Vec<u64>,
    /// Sum of raw increments `(η_{k+1} − η_k)/h`.
    pub raw: Vec<f64>,
    /// Sum of increments with the exact Itô martingale part removed.
    pub corrected: Vec<f64>,
    pub corrected_sq: Vec<f64>,
    /// Sum of the model drift evaluated at the starting `η`.
    pub model: Vec<f64>,
}

impl DriftBins {
    fn new(n: usize) -> Self {
        Self {
            count: vec![0; n],
            raw: vec![0.0; n],
            corrected: vec![0.0; n],
            corrected_sq: vec![0.0; n],
            model: vec![0.0; n],
        }
    }

    fn merge(&mut self, other: &DriftBins) {
        for i in 0..self.count.len() {
            self.count[i] += other.count[i];
            self.raw[i] += other.raw[i];
            self.corrected[i] += other.corrected[i];
            self.corrected_sq[i] += other.corrected_sq[i];
            self.model[i] += other.model[i];
        }
    }

    /// `(bin centre, corrected relative error, raw relative error, standard error of the corrected relative error)` for bins with at least `min_count` observations.
    pub fn relative_errors(&self, min_count: u64) -> Vec<(f64, f64, f64, f64)> {
        let n = self.count.len();
        (0..n)
            .filter(|&i| self.count[i] >= min_count)
            .map(|i| {
                let c = self.count[i] as f64;
                let model = self.model[i] / c;
                let corr = self.corrected[i] / c;
                let var = (self.corrected_sq[i] / c - corr * corr).max(0.0);
                (
                    (i as f64 + 0.5) / n as f64,
                    (corr - model) / model,
                    (self.raw[i] / c - model) / model,
                    (var / c).sqrt() / model,
                )
            })
            .collect()
    }
}

/// Whole-path statistics of one simulated share path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPathSummary {
    pub min_eta: f64,
    pub min_one_minus_eta: f64,
    pub terminal_eta: f64,
    pub terminal_one_minus_eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSimulation {
    /// Recorded `η` on the coarsened grid.
    pub eta: PathEnsemble,
    /// Recorded `1 − η`, exact even where `η` rounds to 1.
    pub one_minus_eta: PathEnsemble,
    pub summaries: Vec<EtaPathSummary>,
    pub drift: Option<DriftBins>,
}

/// Positivity-preserving paths of `dη = σ²(1−η)²/η dt + σ(1−η) dW⁰`.
///
/// The state is the log-odds `λ = log(η/(1−η))`, which solves
/// `dλ = σ²/(2η²) dt + (σ/η) dW⁰`. Each grid step is covered by Euler
/// substeps of length `min(remaining, substep_variance·η²/σ²)`, chosen from
/// the current state, so the scheme refines itself where `η` is small.
pub fn simulate_eta_with(
    params: &TwoPopParams,
    eta0: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    cfg: &EtaSchemeConfig,
) -> Result<EtaSimulation> {
    params.validate()?;
    open_unit("eta0", eta0)?;
    if cfg.record_every == 0 || !grid.steps().is_multiple_of(cfg.record_every) {
        return Err(Error::param(
            "record_every",
            "must divide the number of steps",
        ));
    }
    if !(cfg.substep_variance > 0.0) || cfg.max_substeps == 0 {
        return Err(Error::param("substep_variance", "must be positive"));
    }
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be positive"));
    }
    let rec_grid = TimeGrid::new(grid.t0(), grid.t1(), grid.steps() / cfg.record_every)?;
    let rec_nodes = rec_grid.node_count();
    let h = grid.h();
    let s = params.sigma;
    let lambda0 = (eta0 / (1.0 - eta0)).ln();

    struct PathOut {
        eta: Vec<f64>,
        ome: Vec<f64>,
        summary: EtaPathSummary,
        bins: Option<DriftBins>,
    }

    let outs: Vec<PathOut> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut bins = (cfg.drift_bins > 0).then(|| DriftBins::new(cfg.drift_bins));
            let mut eta_rec = Vec::with_capacity(rec_nodes);
            let mut ome_rec = Vec::with_capacity(rec_nodes);
            let mut lambda = lambda0;
            let (e0, o0) = shares_from_log_odds(lambda);
            eta_rec.push(e0);
            ome_rec.push(o0);
            let mut summary = EtaPathSummary {
                min_eta: e0,
                min_one_minus_eta: o0,
                terminal_eta: e0,
                terminal_one_minus_eta: o0,
            };
            for k in 0..grid.steps() {
                let (eta_start, _) = shares_from_log_odds(lambda);
                let mut remaining = h;
                let mut taken = 0;
                let mut martingale = 0.0;
                while remaining > 0.0 {
                    let (e, o) = shares_from_log_odds(lambda);
                    let vol = s / e;
                    let hs = if s == 0.0 || taken + 1 >= cfg.max_substeps {
                        remaining
                    } else {
                        let cap = cfg.substep_variance / (vol * vol);
                        if cap >= remaining {
                            remaining
                        } else {
                            cap
                        }
                    };
                    remaining = if hs >= remaining { 0.0 } else { remaining - hs };
                    taken += 1;
                    let dw: f64 = rng.sample::<f64, _>(StandardNormal) * hs.sqrt();
                    if bins.is_some() {
                        // Itô expansion of η(λ): η' = η(1−η), η'' = η(1−η)(1−2η)
                        let d1 = e * o;
                        let d2 = d1 * (o - e);
                        martingale += d1 * vol * dw + 0.5 * d2 * vol * vol * (dw * dw - hs);
                    }
                    lambda += 0.5 * vol * vol * hs + vol * dw;
                }
                let (e, o) = shares_from_log_odds(lambda);
                if let Some(b) = bins.as_mut() {
                    let i = ((eta_start * b.count.len() as f64) as usize).min(b.count.len() - 1);
                    let inc = e - eta_start;
                    b.count[i] += 1;
                    b.raw[i] += inc / h;
                    let corr = (inc - martingale) / h;
                    b.corrected[i] += corr;
                    b.corrected_sq[i] += corr * corr;
                    b.model[i] += eta_drift(params, eta_start);
                }
                summary.min_eta = summary.min_eta.min(e);
                summary.min_one_minus_eta = summary.min_one_minus_eta.min(o);
                if (k + 1) % cfg.record_every == 0 {
                    eta_rec.push(e);
                    ome_rec.push(o);
                }
                summary.terminal_eta = e;
                summary.terminal_one_minus_eta = o;
            }
            PathOut {
                eta: eta_rec,
                ome: ome_rec,
                summary,
                bins,
            }
        })
        .collect();

    let mut drift = (cfg.drift_bins > 0).then(|| DriftBins::new(cfg.drift_bins));
    let mut summaries = Vec::with_capacity(n_paths);
    for o in &outs {
        summaries.push(o.summary);
        if let (Some(acc), Some(b)) = (drift.as_mut(), o.bins.as_ref()) {
            acc.merge(b);
        }
    }
    let eta = PathEnsemble::generate(&rec_grid, 1, n_paths, seed, |p, _, out| {
        out.copy_from_slice(&outs[p].eta);
        false
    })?;
    let one_minus_eta = PathEnsemble::generate(&rec_grid, 1, n_paths, seed, |p, _, out| {
        out.copy_from_slice(&outs[p].ome);
        false
    })?;
    Ok(EtaSimulation {
        eta,
        one_minus_eta,
        summaries,
        drift,
    })
}

/// [`simulate_eta_with`] using default scheme settings, recording every node.
pub fn simulate_eta(
    params: &TwoPopParams,
    eta0: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    Ok(simulate_eta_with(
        params,
        eta0,
        grid,
        n_paths,
        seed,
        &EtaSchemeConfig::default(),
    )?
    .eta)
}
