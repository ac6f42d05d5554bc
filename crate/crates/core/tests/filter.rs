use bae_core::filter::*;
use proptest::prelude::*;

fn run(duration: f64, dt: f64, seed: u64, every: usize) -> FilterRun {
    FilterRun {
        duration,
        dt,
        seed,
        record_every: every,
    }
}

fn state(v_x: f64, v_y: f64) -> GaussianState {
    GaussianState {
        mean_x: 0.0,
        mean_y: 0.0,
        v_x,
        v_y,
        c: 0.0,
    }
}

#[test]
fn riccati_oracle_without_damping() {
    for (big_k, v0) in [(0.5, 0.5), (3.0, 2.0)] {
        let p = FilterParams::new(0.0, 0.0, big_k / 8.0, big_k).unwrap();
        let dt = max_step(&p);
        let traj = simulate_conditional(&p, &run(5.0, dt, 1, 50), state(v0, 1.0 / (4.0 * v0))).unwrap();
        for s in &traj.samples {
            let want = v0 / (1.0 + big_k * v0 * s.t);
            assert!(
                (s.state.v_x - want).abs() < 1e-6,
                "t = {}: {} vs {want}",
                s.t,
                s.state.v_x
            );
        }
    }
}

#[test]
fn variance_relaxes_exponentially_without_measurement() {
    let (gamma, n_bar) = (0.7, 2.0);
    let p = FilterParams::new(gamma, n_bar, 0.0, 0.0).unwrap();
    let v0 = 0.6;
    let traj = simulate_conditional(&p, &run(5.0, 0.01, 3, 10), state(v0, 1.0)).unwrap();
    let th = n_bar + 0.5;
    for s in &traj.samples {
        let want = th + (v0 - th) * (-gamma * s.t).exp();
        assert!((s.state.v_x - want).abs() < 1e-9);
    }
}

#[test]
fn long_run_reaches_closed_form() {
    // gamma / 2K = 1, n_bar = 0 -> sqrt(2) - 1
    let p = FilterParams::new(2.0, 0.0, 1.0 / 8.0, 1.0).unwrap();
    let dt = max_step(&p);
    let duration = 20.0 / p.relaxation_rate();
    let n = (duration / dt).ceil();
    let traj = simulate_conditional(&p, &run(n * dt, dt, 4, 1000), GaussianState::thermal(0.0)).unwrap();
    let v = traj.final_state().v_x;
    assert!((v - (2f64.sqrt() - 1.0)).abs() < 0.01 * (2f64.sqrt() - 1.0), "{v}");
    match steady_state(0.0, 0.0, 1.0, 1.0).unwrap().v_y {
        Variance::Unbounded => {}
        v => panic!("{v:?}"),
    }
    assert_eq!(steady_state_vx(0.0, 1.0, 2.0), 0.0);
}

#[test]
fn endpoint_variances_converge_in_dt() {
    let p = FilterParams::new(0.3, 0.5, 1.0, 2.0).unwrap();
    let init = state(5.0, 5.0);
    let end = |dt: f64| {
        simulate_conditional(&p, &run(2.0, dt, 5, usize::MAX), init)
            .unwrap()
            .final_state()
    };
    let (a, b, c) = (end(0.005), end(0.0025), end(0.00125));
    let order = ((a.v_x - b.v_x).abs() / (b.v_x - c.v_x).abs()).log2();
    assert!(order >= 0.9, "order {order}");
}

#[test]
fn record_is_bit_identical_for_a_seed() {
    let p = FilterParams::new(0.1, 0.0, 0.5, 4.0).unwrap();
    let a = simulate_conditional(&p, &run(1.0, 0.0025, 11, 1), GaussianState::thermal(0.0)).unwrap();
    let b = simulate_conditional(&p, &run(1.0, 0.0025, 11, 1), GaussianState::thermal(0.0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.record.samples.len(), 400);
}

#[test]
fn record_is_consistent_with_the_conditional_mean() {
    // Kalman consistency: the spread of conditional means plus the
    // conditional variance recovers the unconditional X variance, which a
    // back-action evading measurement leaves at n_bar + 1/2; and the
    // innovation dy - sqrt(K)<X>dt has variance dt and moves the mean by
    // the gain sqrt(K) V_X.
    let (gamma, n_bar, big_k) = (0.05, 0.0, 1.0);
    let p = FilterParams::new(gamma, n_bar, big_k / 8.0, big_k).unwrap();
    let dt = 0.01;
    let r = run(4.0, dt, 21, 1);
    let trajs = simulate_ensemble(&p, &r, GaussianState::thermal(n_bar), 400).unwrap();
    let last = |t: &FilterTrajectory| t.final_state();
    let n = trajs.len() as f64;
    let spread = trajs.iter().map(|t| last(t).mean_x.powi(2)).sum::<f64>() / n;
    let total = spread + last(&trajs[0]).v_x;
    assert!((total - (n_bar + 0.5)).abs() < 0.05, "{total}");

    let sk = big_k.sqrt();
    let mut s2 = 0.0;
    let mut gain = 0.0;
    let mut m = 0usize;
    for t in &trajs {
        for (w, y) in t.samples.windows(2).zip(&t.record.samples) {
            let innov = y * dt - sk * w[0].state.mean_x * dt;
            let dmean = w[1].state.mean_x - w[0].state.mean_x + 0.5 * gamma * w[0].state.mean_x * dt;
            s2 += innov * innov;
            gain += dmean * innov / (sk * w[0].state.v_x);
            m += 1;
        }
    }
    let var = s2 / m as f64;
    assert!((var / dt - 1.0).abs() < 0.02, "{}", var / dt);
    assert!((gain / s2 - 1.0).abs() < 1e-9, "{}", gain / s2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn variance_flow_is_monotone_and_physical(
        gamma in 0.0..2.0f64, n_bar in 0.0..5.0f64, big_k in 0.01..3.0f64, v0 in 0.05..8.0f64,
    ) {
        let p = FilterParams::new(gamma, n_bar, big_k, big_k).unwrap();
        let ss = steady_state_vx(gamma, n_bar, big_k);
        prop_assume!((v0 - ss).abs() > 1e-6);
        let init = state(v0, (0.25 / v0).max(n_bar + 0.5));
        let dt = max_step(&p);
        let n = (3.0 / dt).round();
        let traj = simulate_conditional(&p, &run(n * dt, dt, 9, 10), init).unwrap();
        let sign = (ss - v0).signum();
        for w in traj.samples.windows(2) {
            prop_assert!(sign * (w[1].state.v_x - w[0].state.v_x) >= -1e-12);
            prop_assert!(w[1].state.is_physical(HEISENBERG_TOL));
        }
    }

    #[test]
    fn variances_do_not_depend_on_noise(seed_a in any::<u64>(), seed_b in any::<u64>()) {
        let p = FilterParams::new(0.2, 1.0, 0.3, 2.0).unwrap();
        let a = simulate_conditional(&p, &run(1.0, 0.005, seed_a, 20), GaussianState::thermal(1.0)).unwrap();
        let b = simulate_conditional(&p, &run(1.0, 0.005, seed_b, 20), GaussianState::thermal(1.0)).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert_eq!((x.state.v_x, x.state.v_y, x.state.c), (y.state.v_x, y.state.v_y, y.state.c));
        }
    }
}
