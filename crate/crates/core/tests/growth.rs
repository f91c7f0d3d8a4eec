use mfg_core::growth::{
    cobb_douglas_rates, growth_best_response, growth_running_cost, mean_wealth, pareto_tail,
    propagate_pareto, simulate_forward_state, simulate_pareto_particles, solve_adjoint_backward,
    solve_aiyagari_mfg, AiyagariParams, ForwardInputs, GrowthCostParams, InitialWealth,
    MeanWealthFlow, ParetoState,
};
use mfg_core::numerics::{integrate_ode, ks_statistic, Direction, FixedPointConfig, TimeGrid};
use mfg_core::Error;
use proptest::prelude::*;

fn golden_params() -> AiyagariParams {
    AiyagariParams {
        alpha_cd: 0.36,
        a_tfp: 1.0,
        delta: 0.05,
        gamma_crra: 0.5,
        horizon: 1.0,
    }
}

/// Simpson's rule on `[lo, hi]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn tail_examples() {
    let s = ParetoState::new(1.0, 1.0).unwrap();
    assert_eq!(pareto_tail(&s, 1.0), 1.0);
    assert_eq!(pareto_tail(&s, 0.3), 1.0);
    assert_eq!(pareto_tail(&s, 2.0), 0.5);
    assert!(ParetoState::new(0.0, 1.0).is_err());
    assert!(ParetoState::new(1.0, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn tail_matches_density_quadrature(k in 0.5f64..4.0, q in 0.2f64..3.0, x_rel in 1.0f64..5.0) {
        let s = ParetoState::new(k, q).unwrap();
        let x = q * x_rel;
        // substitute y = x·u^{−β} to map [x, ∞) onto (0, 1]; β = 2/k keeps the integrand smooth
        let beta = 2.0 / k;
        let integrand = |u: f64| if u <= 0.0 { 0.0 } else { s.density(x * u.powf(-beta)) * beta * x * u.powf(-beta - 1.0) };
        let quad = simpson(integrand, 0.0, 1.0, 20_000);
        prop_assert!((quad - pareto_tail(&s, x)).abs() < 1e-8, "quad {} tail {}", quad, pareto_tail(&s, x));
    }

    #[test]
    fn best_response_beats_grid(xr in 0.5f64..4.0, k in 0.5f64..3.0, q in 0.5f64..2.0,
                                y in 0.0f64..3.0, b in 0.0f64..2.0, p in 1.5f64..4.0) {
        let cost = GrowthCostParams { a_exp: 1.0, b_exp: b, c_coef: 1.0, e_coef: 1.3, p_exp: p, sigma: 0.2 };
        let s = ParetoState::new(k, q).unwrap();
        let x = xr * q;
        let alpha = growth_best_response(x, &s, y, &cost).unwrap();
        let tail = pareto_tail(&s, x);
        // α-dependent part of the Hamiltonian in cost orientation
        let h = |a: f64| cost.e_coef / p * a.powf(p) / tail.powf(b) - y * a;
        let hi = 2.0 * alpha + 1.0;
        let n = 100_000;
        let step = hi / n as f64;
        let best = (0..=n).map(|i| i as f64 * step).min_by(|a, c| h(*a).total_cmp(&h(*c))).unwrap();
        prop_assert!((best - alpha).abs() <= step, "grid {} closed {}", best, alpha);
    }

    #[test]
    fn euler_theorem(alpha in 0.05f64..0.95, a in 0.1f64..5.0, delta in 0.0f64..0.3, k in 0.01f64..50.0) {
        let p = AiyagariParams { alpha_cd: alpha, a_tfp: a, delta, gamma_crra: 0.5, horizon: 1.0 };
        let (r, w) = cobb_douglas_rates(k, &p).unwrap();
        let out = a * k.powf(alpha);
        prop_assert!((r * k + w + delta * k - out).abs() < 1e-12 * out.max(1.0));
    }
}

#[test]
fn best_response_examples() {
    let cost = GrowthCostParams {
        a_exp: 1.0,
        b_exp: 0.7,
        c_coef: 1.0,
        e_coef: 2.5,
        p_exp: 3.0,
        sigma: 0.3,
    };
    let s = ParetoState::new(2.0, 1.0).unwrap();
    assert_eq!(growth_best_response(0.5, &s, 2.5, &cost).unwrap(), 1.0);
    assert_eq!(growth_best_response(3.0, &s, 0.0, &cost).unwrap(), 0.0);
    assert!(matches!(
        growth_best_response(3.0, &s, -1.0, &cost),
        Err(Error::Domain(_))
    ));
    let bad = GrowthCostParams { p_exp: 1.0, ..cost };
    assert!(growth_best_response(3.0, &s, 1.0, &bad).is_err());
    // density term is infinite left of the endpoint
    assert!(growth_running_cost(0.5, &s, 1.0, &cost).is_infinite());
    let f = growth_running_cost(2.0, &s, 1.0, &cost);
    let expected = 2.0 / (2.0 / 8.0f64).powf(0.7) - 2.5 / 3.0 / 0.25f64.powf(0.7);
    assert!((f - expected).abs() < 1e-12);
}

#[test]
fn propagate_frozen_and_exponential() {
    let g = TimeGrid::new(0.0, 2.0, 400).unwrap();
    let s = ParetoState::new(1.5, 0.8).unwrap();
    let zeros = vec![0.0; g.node_count()];
    let q = propagate_pareto(&s, &zeros, 0.0, &zeros, &g).unwrap();
    assert!(q.iter().all(|v| *v == 0.8));
    let q = propagate_pareto(&s, &vec![0.3; g.node_count()], 0.0, &zeros, &g).unwrap();
    for (k, v) in q.iter().enumerate() {
        assert!((v - 0.8 * (0.3 * g.time(k)).exp()).abs() < 1e-12);
    }
    assert!(propagate_pareto(&s, &vec![-0.1; g.node_count()], 0.0, &zeros, &g).is_err());
    assert!(propagate_pareto(&s, &zeros[1..], 0.0, &zeros, &g).is_err());
}

#[test]
fn particles_stay_pareto() {
    let g = TimeGrid::new(0.0, 1.0, 2000).unwrap();
    let s = ParetoState::new(2.0, 1.0).unwrap();
    let gamma: Vec<f64> = g.times().iter().map(|t| 0.2 + 0.1 * t).collect();
    let sigma = 0.3;
    let n = 10_000;
    let particles = simulate_pareto_particles(&s, &gamma, sigma, &g, n, 8).unwrap();
    let q = propagate_pareto(&s, &gamma, sigma, &particles.w0, &g).unwrap();
    let law = ParetoState::new(2.0, q[g.steps()]).unwrap();
    let d = ks_statistic(&particles.terminal, |x| law.cdf(x));
    assert!(d < 1.628 / (n as f64).sqrt(), "KS {d}");
    // quartiles within 3 standard errors of the asymptotic quantile law
    let mut xs = particles.terminal.clone();
    xs.sort_by(f64::total_cmp);
    for u in [0.25, 0.5, 0.75] {
        let emp = xs[(u * n as f64) as usize];
        let theo = law.quantile(u);
        let se = (u * (1.0 - u) / n as f64).sqrt() / law.density(theo);
        assert!((emp - theo).abs() < 3.0 * se, "u {u}: {emp} vs {theo}");
    }
}

#[test]
fn rates_examples() {
    let p = AiyagariParams {
        alpha_cd: 0.5,
        a_tfp: 1.0,
        delta: 0.0,
        gamma_crra: 0.5,
        horizon: 1.0,
    };
    assert_eq!(cobb_douglas_rates(1.0, &p).unwrap(), (0.5, 0.5));
    assert!(cobb_douglas_rates(0.0, &p).is_err());
    let p = golden_params();
    let k_star = (p.delta / (p.alpha_cd * p.a_tfp)).powf(1.0 / (p.alpha_cd - 1.0));
    assert!(cobb_douglas_rates(k_star, &p).unwrap().0.abs() < 1e-14);
}

#[test]
fn adjoint_trivial_cases() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let k_star = (p.delta / (p.alpha_cd * p.a_tfp)).powf(1.0 / (p.alpha_cd - 1.0));
    let y = solve_adjoint_backward(&MeanWealthFlow::constant(g, k_star).unwrap(), &p).unwrap();
    assert!(y.y.iter().all(|v| (v + 1.0).abs() < 1e-12));
    let flow = MeanWealthFlow::new(g, g.times().iter().map(|t| 1.0 + t).collect()).unwrap();
    let y = solve_adjoint_backward(&flow, &p).unwrap();
    assert_eq!(*y.y.last().unwrap(), -1.0);
    assert!(MeanWealthFlow::new(g, vec![0.0; 101]).is_err());
}

#[test]
fn adjoint_matches_rk4() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 500).unwrap();
    let flow = MeanWealthFlow::new(
        g,
        g.times()
            .iter()
            .map(|t| 1.0 + 0.5 * (3.0 * t).sin())
            .collect(),
    )
    .unwrap();
    let y = solve_adjoint_backward(&flow, &p).unwrap();
    let rates: Vec<f64> = flow
        .mu_bar
        .iter()
        .map(|m| cobb_douglas_rates(*m, &p).unwrap().0)
        .collect();
    let rk = integrate_ode(
        |t, v, dv| dv[0] = -v[0] * g.interpolate(&rates, t).unwrap(),
        &[-1.0],
        &g,
        Direction::Backward,
    )
    .unwrap();
    for k in 0..g.node_count() {
        assert!((rk.state(k)[0] - y.y[k]).abs() < 1e-8);
        assert!(y.y[k] >= y.bounds.0 && y.y[k] <= y.bounds.1 && y.bounds.1 < 0.0);
    }
}

#[test]
fn forward_rejects_nonnegative_adjoint() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
    let flow = MeanWealthFlow::constant(g, 1.0).unwrap();
    let mut y = solve_adjoint_backward(&flow, &p).unwrap();
    y.y[3] = 0.0;
    let r = simulate_forward_state(&y, &flow, &p, &ForwardInputs::default(), 4, 0);
    assert!(matches!(r, Err(Error::InvalidAdjoint { .. })));
}

#[test]
fn productivity_mean_stays_at_one() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let flow = MeanWealthFlow::constant(g, 1.2).unwrap();
    let y = solve_adjoint_backward(&flow, &p).unwrap();
    let ens = simulate_forward_state(&y, &flow, &p, &ForwardInputs::default(), 20_000, 4).unwrap();
    for k in 0..g.node_count() {
        let z = ens.cross_section(k, 0);
        let (m, se) = mfg_core::numerics::mean_and_stderr(&z);
        if k == 0 {
            assert_eq!(m, 1.0);
        } else {
            assert!((m - 1.0).abs() < 3.0 * se, "node {k}: {m} ± {se}");
        }
    }
}

#[test]
fn deterministic_reduction_matches_ode() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 4000).unwrap();
    let flow = MeanWealthFlow::new(g, g.times().iter().map(|t| 1.0 + 0.2 * t).collect()).unwrap();
    let y = solve_adjoint_backward(&flow, &p).unwrap();
    let inputs = ForwardInputs {
        z_vol: 0.0,
        ..Default::default()
    };
    let ens = simulate_forward_state(&y, &flow, &p, &inputs, 3, 1).unwrap();
    let cons = y.consumption(p.gamma_crra);
    let ode = integrate_ode(
        |t, a, da| {
            let m = 1.0 + 0.2 * t;
            let (r, w) = cobb_douglas_rates(m, &p).unwrap();
            da[0] = w + r * a[0] - g.interpolate(&cons, t).unwrap();
        },
        &[1.0],
        &g,
        Direction::Forward,
    )
    .unwrap();
    for path in 0..3 {
        for k in 0..g.node_count() {
            assert_eq!(ens.value(path, k, 0), 1.0);
            assert!((ens.value(path, k, 1) - ode.state(k)[0]).abs() < 1e-3);
        }
    }
    // consumption is one deterministic path shared by everyone
    assert!(cons.iter().all(|c| c.is_finite() && *c > 0.0));
}

/// Deterministic fixed point of the mean equations with the same Euler scheme,
/// computed independently at 200 steps; E[Z] = 1 reduces the wealth mean to
/// `m' = A m^α − δm − (−Y)^{−1/γ}` once `m = μ̄`.
const GOLDEN_MU_HALF: f64 = 1.1562995597366015;
const GOLDEN_MU_ONE: f64 = 1.2220606738475772;

#[test]
fn aiyagari_fixed_point_golden() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 200).unwrap();
    let cfg = FixedPointConfig::new(0.5, 1e-7, 200).unwrap();
    let inputs = ForwardInputs::default();
    let sol = solve_aiyagari_mfg(&p, &inputs, &g, &cfg, 20_000, 3).unwrap();
    assert!(!sol.floored);
    assert!(*sol.residuals.last().unwrap() < 1e-7);
    // eventually monotone after the third iteration
    assert!(
        sol.residuals[3..].windows(2).all(|w| w[1] <= w[0]),
        "{:?}",
        sol.residuals
    );
    for (k, golden) in [(100, GOLDEN_MU_HALF), (200, GOLDEN_MU_ONE)] {
        let err = (sol.flow.mu_bar[k] - golden).abs();
        assert!(
            err < 3.0 * sol.std_err[k],
            "node {k}: {} vs {golden} (se {})",
            sol.flow.mu_bar[k],
            sol.std_err[k]
        );
    }
    // certificate: map at the returned flow moves it by less than tol
    let y = solve_adjoint_backward(&sol.flow, &p).unwrap();
    let m = mean_wealth(&y, &sol.flow, &p, &inputs, 20_000, 3).unwrap();
    let moved = m
        .mean
        .iter()
        .zip(&sol.flow.mu_bar)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved < 1e-7);
    for v in &sol.adjoint.y {
        assert!(*v >= sol.adjoint.bounds.0 && *v <= sol.adjoint.bounds.1);
    }
}

#[test]
fn aiyagari_stable_under_path_doubling() {
    let p = golden_params();
    let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let cfg = FixedPointConfig::new(0.5, 1e-8, 200).unwrap();
    let inputs = ForwardInputs {
        a0: InitialWealth::Uniform { lo: 0.5, hi: 1.5 },
        ..Default::default()
    };
    let a = solve_aiyagari_mfg(&p, &inputs, &g, &cfg, 5_000, 1).unwrap();
    let b = solve_aiyagari_mfg(&p, &inputs, &g, &cfg, 10_000, 2).unwrap();
    for k in 0..g.node_count() {
        let pooled = (a.std_err[k].powi(2) + b.std_err[k].powi(2)).sqrt();
        assert!(
            (a.flow.mu_bar[k] - b.flow.mu_bar[k]).abs() <= 3.0 * pooled.max(1e-15),
            "node {k}"
        );
    }
}
