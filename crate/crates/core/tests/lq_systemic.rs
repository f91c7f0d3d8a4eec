use mfg_core::lq_systemic::{
    empirical_mean_path, estimate_cost, feedback_gain, player_cost_samples, simulate_equilibrium,
    simulate_with_deviation, solve_riccati, Deviation, LoopKind, LqParams, Players, RiccatiPath,
};
use mfg_core::numerics::{mean_and_stderr, TimeGrid};
use proptest::prelude::*;

fn params(n: Players) -> LqParams {
    LqParams {
        a: 0.1,
        q: 0.5,
        eps: 0.5,
        c: 0.0,
        sigma: 1.0,
        rho_corr: 0.5,
        n_players: n,
        horizon: 1.0,
    }
}

fn grid(p: &LqParams, steps: usize) -> TimeGrid {
    TimeGrid::new(0.0, p.horizon, steps).unwrap()
}

/// Closed-form solution of `η̇ = Aη² + Bη + C`, `η(T) = c`, evaluated at `t`.
///
/// With roots `r1 > r2` of the quadratic, `w = (η − r1)/(η − r2)` decays as
/// `exp(−A(r1 − r2)(T − t))` in reversed time.
fn riccati_closed_form(a2: f64, b: f64, c0: f64, terminal: f64, tau: f64) -> f64 {
    let disc = (b * b - 4.0 * a2 * c0).sqrt();
    let r1 = (-b + disc) / (2.0 * a2);
    let r2 = (-b - disc) / (2.0 * a2);
    let w0 = (terminal - r1) / (terminal - r2);
    let w = w0 * (-a2 * (r1 - r2) * tau).exp();
    (r1 - r2 * w) / (1.0 - w)
}

fn coefficients(p: &LqParams, kind: LoopKind) -> (f64, f64, f64) {
    let inv = p.n_players.inverse();
    match kind {
        LoopKind::Open => (1.0 - inv, 2.0 * (p.a + p.q - p.q * inv), p.q * p.q - p.eps),
        LoopKind::Closed => (1.0 - inv * inv, 2.0 * (p.a + p.q), p.q * p.q - p.eps),
        LoopKind::Limit => (1.0, 2.0 * (p.a + p.q), p.q * p.q - p.eps),
    }
}

fn sup_gap(x: &RiccatiPath, y: &RiccatiPath) -> f64 {
    x.eta
        .iter()
        .zip(&y.eta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

const ETA_OPEN_0: f64 = 0.14535348942810608;
const ETA_CLOSED_0: f64 = 0.13929546981968888;

#[test]
fn golden_eta_matches_closed_form() {
    let p = params(Players::Finite(10));
    let g = grid(&p, 1000);
    for (kind, golden) in [
        (LoopKind::Open, ETA_OPEN_0),
        (LoopKind::Closed, ETA_CLOSED_0),
    ] {
        let path = solve_riccati(&p, &g, kind).unwrap();
        let (a2, b, c0) = coefficients(&p, kind);
        let exact = riccati_closed_form(a2, b, c0, p.c, 1.0);
        assert!(
            (exact - golden).abs() < 1e-12,
            "{kind:?}: closed form {exact} vs golden {golden}"
        );
        assert!(
            (path.eta[0] - golden).abs() < 1e-10,
            "{kind:?}: {}",
            path.eta[0]
        );
        for (k, eta) in path.eta.iter().enumerate() {
            let tau = 1.0 - g.time(k);
            assert!((eta - riccati_closed_form(a2, b, c0, p.c, tau)).abs() < 1e-10);
        }
    }
}

#[test]
fn terminal_value_is_exact() {
    let mut p = params(Players::Finite(5));
    p.c = 0.37;
    for kind in [LoopKind::Open, LoopKind::Closed, LoopKind::Limit] {
        let path = solve_riccati(&p, &grid(&p, 100), kind).unwrap();
        assert_eq!(*path.eta.last().unwrap(), 0.37);
    }
}

#[test]
fn zero_solution_when_eps_is_q_squared() {
    let mut p = params(Players::Finite(7));
    p.eps = p.q * p.q;
    for kind in [LoopKind::Open, LoopKind::Closed, LoopKind::Limit] {
        let path = solve_riccati(&p, &grid(&p, 500), kind).unwrap();
        assert!(path.eta.iter().all(|e| e.abs() < 1e-12));
    }
}

#[test]
fn infinite_marker_collapses_all_kinds() {
    let p = params(Players::Infinite);
    let g = grid(&p, 800);
    let open = solve_riccati(&p, &g, LoopKind::Open).unwrap();
    let closed = solve_riccati(&p, &g, LoopKind::Closed).unwrap();
    let limit = solve_riccati(&p, &g, LoopKind::Limit).unwrap();
    assert!(sup_gap(&open, &limit) < 1e-12);
    assert!(sup_gap(&closed, &limit) < 1e-12);
}

#[test]
fn rejects_eps_below_q_squared() {
    let mut p = params(Players::Finite(10));
    p.eps = 0.2;
    assert!(solve_riccati(&p, &grid(&p, 10), LoopKind::Open).is_err());
    let mut p = params(Players::Finite(1));
    p.n_players = Players::Finite(1);
    assert!(p.validate().is_err());
}

#[test]
fn open_closed_gap_shrinks_per_decade() {
    let gaps: Vec<f64> = [10, 100, 1000]
        .iter()
        .map(|&n| {
            let p = params(Players::Finite(n));
            let g = grid(&p, 1000);
            sup_gap(
                &solve_riccati(&p, &g, LoopKind::Open).unwrap(),
                &solve_riccati(&p, &g, LoopKind::Closed).unwrap(),
            )
        })
        .collect();
    for w in gaps.windows(2) {
        let f = w[0] / w[1];
        assert!((5.0..=20.0).contains(&f), "factor {f}, gaps {gaps:?}");
    }
}

#[test]
fn finite_paths_approach_limit_monotonically() {
    let lim_p = params(Players::Infinite);
    let g = grid(&lim_p, 1000);
    let limit = solve_riccati(&lim_p, &g, LoopKind::Limit).unwrap();
    for kind in [LoopKind::Open, LoopKind::Closed] {
        let gaps: Vec<f64> = [10, 100, 1000, 10_000]
            .iter()
            .map(|&n| {
                sup_gap(
                    &solve_riccati(&params(Players::Finite(n)), &g, kind).unwrap(),
                    &limit,
                )
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{kind:?}: {gaps:?}");
        // at least first-order convergence between the last two decades
        assert!(gaps[2] / gaps[3] >= 5.0, "{kind:?}: {gaps:?}");
    }
}

#[test]
fn gain_examples() {
    let p = params(Players::Infinite);
    let g = grid(&p, 4);
    let path = RiccatiPath {
        grid: g,
        eta: vec![0.3; 5],
        loop_kind: LoopKind::Limit,
    };
    assert!((feedback_gain(0.5, &path, &p).unwrap() - 0.8).abs() < 1e-15);
    let zero = RiccatiPath {
        eta: vec![0.0; 5],
        ..path.clone()
    };
    assert_eq!(feedback_gain(0.2, &zero, &p).unwrap(), 0.5);
    assert!(feedback_gain(1.5, &path, &p).is_err());

    let p10 = params(Players::Finite(10));
    let golden = solve_riccati(&p10, &grid(&p10, 1000), LoopKind::Open).unwrap();
    let gain = feedback_gain(0.0, &golden, &p10).unwrap();
    assert!((gain - (0.5 + 0.9 * ETA_OPEN_0)).abs() < 1e-12);
}

#[test]
fn no_noise_equal_start_is_frozen() {
    let mut p = params(Players::Finite(4));
    p.sigma = 0.0;
    let r = solve_riccati(&p, &grid(&p, 50), LoopKind::Closed).unwrap();
    let ens = simulate_equilibrium(&p, &r, &[1.5; 4], 8, 3).unwrap();
    assert!(ens.raw().iter().all(|v| *v == 1.5));
    let cost = estimate_cost(&p, &ens, &r).unwrap();
    assert!(cost.mean.iter().all(|c| *c == 0.0));
}

#[test]
#[allow(clippy::needless_range_loop)]
fn full_correlation_spread_decays_deterministically() {
    let mut p = params(Players::Finite(3));
    p.rho_corr = 1.0;
    let g = grid(&p, 200);
    let r = solve_riccati(&p, &g, LoopKind::Open).unwrap();
    let x0 = [1.0, -0.5, 2.0];
    let ens = simulate_equilibrium(&p, &r, &x0, 5, 9).unwrap();
    let mean0 = x0.iter().sum::<f64>() / 3.0;
    let h = g.h();
    for s in 0..5 {
        let mut factor = 1.0;
        for k in 0..=g.steps() {
            let xbar = empirical_mean_path(&ens, s)[k];
            for i in 0..3 {
                let spread = ens.value(s, k, i) - xbar;
                assert!((spread - factor * (x0[i] - mean0)).abs() < 1e-12);
            }
            if k < g.steps() {
                factor *= 1.0 - (p.a + p.q + (1.0 - 1.0 / 3.0) * r.eta[k]) * h;
            }
        }
    }
}

#[test]
fn empirical_mean_is_driftless() {
    let p = params(Players::Finite(10));
    let g = grid(&p, 100);
    let r = solve_riccati(&p, &g, LoopKind::Closed).unwrap();
    let x0: Vec<f64> = (0..10).map(|i| i as f64 * 0.1 - 0.3).collect();
    let ens = simulate_equilibrium(&p, &r, &x0, 4000, 17).unwrap();
    let increments: Vec<f64> = (0..ens.n_paths())
        .map(|s| {
            let m = empirical_mean_path(&ens, s);
            m[g.steps()] - m[0]
        })
        .collect();
    let (mean, se) = mean_and_stderr(&increments);
    assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn cost_matches_direct_formula_when_eta_vanishes() {
    let mut p = params(Players::Finite(5));
    p.eps = p.q * p.q;
    let g = grid(&p, 60);
    let r = solve_riccati(&p, &g, LoopKind::Open).unwrap();
    let ens = simulate_equilibrium(&p, &r, &[0.0, 1.0, -1.0, 0.5, 2.0], 50, 5).unwrap();
    let h = g.h();
    for i in 0..5 {
        let samples = player_cost_samples(&p, &ens, &r, i, None).unwrap();
        for (s, got) in samples.iter().enumerate() {
            let mut direct = 0.0;
            for k in 0..=g.steps() {
                let xbar = empirical_mean_path(&ens, s)[k];
                let d = xbar - ens.value(s, k, i);
                let alpha = p.q * d;
                let f = 0.5 * alpha * alpha - p.q * alpha * d + 0.5 * p.eps * d * d;
                let w = if k == 0 || k == g.steps() { 0.5 } else { 1.0 };
                direct += w * h * f;
            }
            assert!((got - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn deviation_validation() {
    let p = params(Players::Finite(3));
    let r = solve_riccati(&p, &grid(&p, 10), LoopKind::Open).unwrap();
    assert!(simulate_equilibrium(&p, &r, &[0.0; 2], 4, 0).is_err());
    let dev = Deviation {
        player: 3,
        gain_scale: 1.05,
    };
    assert!(simulate_with_deviation(&p, &r, &[0.0; 3], 4, 0, Some(dev)).is_err());
    assert!(simulate_equilibrium(&params(Players::Infinite), &r, &[0.0; 3], 4, 0).is_err());
}

#[test]
fn perturbed_gain_costs_more() {
    let p = params(Players::Finite(10));
    let g = grid(&p, 50);
    let r = solve_riccati(&p, &g, LoopKind::Closed).unwrap();
    let x0 = vec![0.0; 10];
    let n = 10_000;
    let base_ens = simulate_equilibrium(&p, &r, &x0, n, 23).unwrap();
    let base = player_cost_samples(&p, &base_ens, &r, 0, None).unwrap();
    for scale in [0.95, 1.05] {
        let dev = Deviation {
            player: 0,
            gain_scale: scale,
        };
        let ens = simulate_with_deviation(&p, &r, &x0, n, 23, Some(dev)).unwrap();
        let cost = player_cost_samples(&p, &ens, &r, 0, Some(dev)).unwrap();
        let diff: Vec<f64> = cost.iter().zip(&base).map(|(a, b)| a - b).collect();
        let (m, se) = mean_and_stderr(&diff);
        assert!(m > 3.0 * se, "scale {scale}: diff {m} se {se}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn eta_nonnegative(a in 0.0f64..1.0, q in 0.0f64..1.5, extra in 0.0f64..2.0, c in 0.0f64..2.0,
                       n in 2usize..500, horizon in 0.1f64..3.0) {
        let p = LqParams { a, q, eps: q * q + extra, c, sigma: 1.0, rho_corr: 0.0,
                           n_players: Players::Finite(n), horizon };
        let g = TimeGrid::new(0.0, horizon, 300).unwrap();
        for kind in [LoopKind::Open, LoopKind::Closed, LoopKind::Limit] {
            let path = solve_riccati(&p, &g, kind).unwrap();
            prop_assert!(path.eta.iter().all(|e| *e >= 0.0));
        }
    }
}
