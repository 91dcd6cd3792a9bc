use approx::assert_relative_eq;
use cachenet::counter::{
    lambda_for_insertion_rate, occupancy_probability, provision_from_target, CounterParams, SteadyState, TargetSpec,
};
use cachenet::hysteresis::{
    build_chain, coefficient_of_variation, first_passage_mean_busy, first_passage_mean_return, mean_busy_truncated,
    paper_recursion_nu, renewal_occupancy, replacement_rate_hysteresis, sojourn_cdf, stationary_occupancy,
    HysteresisParams, Sojourn,
};
use cachenet::optimizer::{minimize, minimize_with_return_cap, objective, return_time_at, CostWeights};
use proptest::prelude::*;

/// Birth-death oracle: stationary law of the counter truncated far above K.
fn truncated_mm1_tail(lambda: f64, mu: f64, k: usize) -> f64 {
    let rho = lambda / mu;
    let n = k + 2000;
    let mut w = vec![1.0f64; n];
    for i in 1..n {
        w[i] = w[i - 1] * rho;
    }
    let total: f64 = w.iter().sum();
    w[k + 1..].iter().sum::<f64>() / total
}

proptest! {
    #[test]
    fn renewal_identities_hold(rho in 0.05f64..0.99, lambda in 0.01f64..100.0, k in 0.0f64..40.0) {
        let p = CounterParams::new(lambda, lambda / rho, k).unwrap();
        let s = SteadyState::from_params(&p).unwrap();
        prop_assert!((s.gamma * s.mean_return - (1.0 - s.pi_up)).abs() <= 1e-12 * (1.0 - s.pi_up));
        prop_assert!((s.gamma * (s.mean_busy + s.mean_return) - 1.0).abs() <= 1e-12);
        prop_assert!((s.pi_up - s.mean_busy / (s.mean_busy + s.mean_return)).abs() <= 1e-12);
    }

    #[test]
    fn integer_occupancy_matches_birth_death(rho in 0.05f64..0.9, k in 0usize..15) {
        let p = CounterParams::new(rho, 1.0, k as f64).unwrap();
        let exact = occupancy_probability(&p).unwrap();
        let oracle = truncated_mm1_tail(rho, 1.0, k);
        prop_assert!((exact - oracle).abs() <= 1e-12 * oracle.max(1e-300) + 1e-300);
    }

    #[test]
    fn provisioning_round_trips(pi in 0.01f64..0.99, lambda in 0.1f64..50.0, k in 0.0f64..30.0) {
        let spec = TargetSpec::new(pi, lambda, k).unwrap();
        let prov = provision_from_target(&spec).unwrap();
        let back = occupancy_probability(&prov.params(&spec)).unwrap();
        prop_assert!((back - pi).abs() <= 1e-10 * pi);
    }

    #[test]
    fn objective_minimum_beats_grid(alpha in 0.01f64..10.0, beta in 0.01f64..10.0, pi in 0.05f64..0.95, lambda in 0.1f64..50.0) {
        let w = CostWeights::new(alpha, beta, 60.0).unwrap();
        let m = minimize(&w, pi, lambda).unwrap();
        for i in 0..=120 {
            let k = i as f64 * 0.5;
            let v = objective(k, &w, pi, lambda).unwrap();
            prop_assert!(m.cost <= v * (1.0 + 1e-9));
        }
    }

    #[test]
    fn churn_only_weights_pick_k_max(alpha in 0.01f64..10.0, k_max in 1.0f64..200.0, pi in 0.05f64..0.95, lambda in 0.1f64..50.0) {
        let w = CostWeights::new(alpha, 0.0, k_max).unwrap();
        prop_assert_eq!(minimize(&w, pi, lambda).unwrap().k, k_max);
    }

    #[test]
    fn return_cap_is_respected(pi in 0.3f64..0.95, lambda in 0.5f64..20.0, scale in 1.01f64..3.0) {
        let w = CostWeights::new(1.0, 1.0, 50.0).unwrap();
        let r_star = return_time_at(0.0, pi, lambda).unwrap() * scale;
        let k = minimize_with_return_cap(&w, pi, lambda, r_star).unwrap();
        prop_assert!(return_time_at(k, pi, lambda).unwrap() <= r_star * (1.0 + 1e-9));
    }

    #[test]
    fn ladder_matches_truncated_chain(rho in 0.05f64..0.9, k in 0usize..10, gap in 0usize..10) {
        let k_h = k.saturating_sub(gap);
        let p = HysteresisParams::new(rho, 1.0, k, k_h).unwrap();
        let ladder = first_passage_mean_busy(&p).unwrap();
        let chain = mean_busy_truncated(&p, p.default_truncation().unwrap()).unwrap();
        prop_assert!((ladder - chain).abs() <= 1e-9 * ladder);
        let nu = paper_recursion_nu(&p, k - k_h + 1).unwrap();
        prop_assert!((nu[k - k_h] - ladder).abs() <= 1e-12 * ladder);
    }

    #[test]
    fn renewal_and_stationary_occupancy_agree(rho in 0.1f64..0.85, k in 0usize..8, gap in 0usize..8) {
        let k_h = k.saturating_sub(gap);
        let p = HysteresisParams::new(rho, 1.0, k, k_h).unwrap();
        let chain = build_chain(&p, p.default_truncation().unwrap()).unwrap();
        let a = stationary_occupancy(&chain).unwrap();
        let b = renewal_occupancy(&p).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn gamma_falls_with_kh(rho in 0.05f64..0.95, k in 1usize..12) {
        let mut prev = f64::INFINITY;
        for k_h in (0..=k).rev() {
            let g = replacement_rate_hysteresis(&HysteresisParams::new(rho, 1.0, k, k_h).unwrap()).unwrap();
            prop_assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn sojourn_cdfs_are_monotone(rho in 0.2f64..0.8, k in 1usize..6, gap in 0usize..6) {
        let k_h = k.saturating_sub(gap);
        let p = HysteresisParams::new(rho, 1.0, k, k_h).unwrap();
        let grid: Vec<f64> = (0..60).map(|i| i as f64 * 0.5).collect();
        for which in [Sojourn::Busy, Sojourn::Return] {
            let cdf = sojourn_cdf(&p, which, &grid).unwrap();
            prop_assert!(cdf[0].abs() < 1e-12);
            for w in cdf.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-10);
                prop_assert!(w[1] <= 1.0 + 1e-10);
            }
        }
    }
}

#[test]
fn single_and_double_precision_agree() {
    let p64 = CounterParams::new(2.0f64, 3.0, 4.0).unwrap();
    let p32 = CounterParams::new(2.0f32, 3.0, 4.0).unwrap();
    let a = SteadyState::from_params(&p64).unwrap();
    let b = SteadyState::from_params(&p32).unwrap();
    assert_relative_eq!(a.pi_up, b.pi_up as f64, max_relative = 1e-5);
    assert_relative_eq!(a.gamma, b.gamma as f64, max_relative = 1e-5);
    assert_relative_eq!(a.mean_return, b.mean_return as f64, max_relative = 1e-5);
}

#[test]
fn hysteresis_without_gap_is_the_plain_counter() {
    let h = HysteresisParams::new(1.0, 1.6, 5, 5).unwrap();
    let c = SteadyState::from_params(&CounterParams::new(1.0, 1.6, 5.0).unwrap()).unwrap();
    assert_relative_eq!(first_passage_mean_busy(&h).unwrap(), c.mean_busy, max_relative = 1e-12);
    assert_relative_eq!(first_passage_mean_return(&h).unwrap(), c.mean_return, max_relative = 1e-10);
    assert_relative_eq!(replacement_rate_hysteresis(&h).unwrap(), c.gamma, max_relative = 1e-10);
}

#[test]
fn single_counter_busy_period_is_mm1_cv() {
    // M/M/1 busy period: CV^2 = (1 + rho) / (1 - rho)
    let rho = 0.6;
    let h = HysteresisParams::new(rho, 1.0, 3, 3).unwrap();
    let cv = coefficient_of_variation(&h, Sojourn::Busy).unwrap();
    assert_relative_eq!(cv * cv, (1.0 + rho) / (1.0 - rho), max_relative = 1e-8);
}

#[test]
fn calibrated_rate_gives_published_optimum() {
    let lambda: f64 = lambda_for_insertion_rate(0.32, 0.9, 10.0).unwrap();
    let w = CostWeights::with_default_k_max(1.0, 1.0).unwrap();
    let m = minimize(&w, 0.9, lambda).unwrap();
    assert!((9.5..=10.5).contains(&m.k), "K* = {}", m.k);
    let s = provision_from_target(&TargetSpec::new(0.9, lambda, m.k).unwrap()).unwrap();
    assert!((s.gamma - 0.32).abs() <= 0.01);
    assert!((s.mean_return - 0.31).abs() <= 0.01);
}
