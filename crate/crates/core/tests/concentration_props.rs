use fnmix_core::concentration::{master_hoeffding, uniform_hoeffding, uniform_hoeffding_burnin};
use fnmix_core::intervals::adaptive_ci;
use fnmix_core::seqtest::{algdiff_epsilon_k, decision_times, ParamSource};
use fnmix_core::Result;
use proptest::prelude::*;

fn tf_geometric(lambda: f64) -> impl Fn(f64) -> Result<u64> + Sync {
    // T_f(delta) = ceil(log(2 delta) / log(lambda)) for d_f(n) = lambda^n / 2
    move |delta: f64| Ok(((2.0 * delta).ln() / lambda.ln()).ceil().max(1.0) as u64)
}

proptest! {
    #[test]
    fn master_bound_monotone(eps in 0.01f64..0.5, n in 1u64..100_000, extra in 0u64..10_000, lambda in 0.05f64..0.95) {
        let tf = tf_geometric(lambda);
        let t = tf(eps / 2.0).unwrap();
        prop_assume!(n >= t);
        let base = master_hoeffding(eps, n, &tf, None).unwrap().value;
        prop_assert!(master_hoeffding(eps, n + extra, &tf, None).unwrap().value <= base);
        prop_assert!(master_hoeffding((eps * 1.5).min(1.0), n, &tf, None).unwrap().value <= base);
    }

    #[test]
    fn uniform_bounds_monotone(eps in 0.01f64..0.5, n in 10u64..100_000, extra in 0u64..10_000, gamma in 0.01f64..1.0) {
        let a = uniform_hoeffding(eps, n, gamma).unwrap().value;
        prop_assert!(uniform_hoeffding(eps, n + extra, gamma).unwrap().value <= a);
        prop_assert!(uniform_hoeffding(eps * 1.5, n, gamma).unwrap().value <= a);
        let b = uniform_hoeffding_burnin(eps, n, 5, gamma, 0.01).unwrap().value;
        prop_assert!(uniform_hoeffding_burnin(eps, n + extra, 5, gamma, 0.01).unwrap().value <= b);
        prop_assert!(uniform_hoeffding_burnin(eps * 1.5, n, 5, gamma, 0.01).unwrap().value <= b);
    }

    #[test]
    fn master_with_unit_mixing_time_matches_closed_form(eps in 0.001f64..1.0, n in 1u64..1_000_000) {
        let b = master_hoeffding(eps, n, |_| Ok(1), None).unwrap();
        let expected = (-(eps * eps * n as f64) / 8.0).exp();
        prop_assert!((b.value - expected).abs() <= 1e-15 * expected.max(1e-300));
    }

    #[test]
    fn adaptive_interval_rate_meets_level(alpha in 0.001f64..0.4, n in 2_000u64..1_000_000, lambda in 0.05f64..0.9) {
        let samples = vec![0.5; n as usize];
        let tf = tf_geometric(lambda);
        let eta = 0.2;
        if let Ok(ci) = adaptive_ci(&samples, alpha, &tf, eta) {
            let r = ci.diagnostics.r_n.unwrap();
            prop_assert!(r >= 8.0 * (2.0 / alpha).ln() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn schedule_grows_geometrically(n0 in 1u64..10_000, xi in 0.01f64..0.39) {
        let times = decision_times(n0, xi, 10_000_000);
        prop_assert!(times[0] > n0);
        for w in times.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(w[1] as f64 <= (1.0 + xi) * w[0] as f64 + 1.0 + xi);
        }
        prop_assert_eq!(*times.last().unwrap(), 10_000_000);
    }

    #[test]
    fn diff_epsilons_solve_their_equation(alpha in 0.01f64..0.4, k in 1u64..50, n_k in 100u64..1_000_000, lambda in 0.05f64..0.9) {
        let tf = tf_geometric(lambda);
        let eps = algdiff_epsilon_k(alpha, k, n_k, ParamSource::Adaptive(&tf)).unwrap();
        prop_assume!(eps.is_finite());
        let rhs = ((1.0 / alpha).ln() + 1.0 + 2.0 * (k as f64).ln()) / n_k as f64;
        // the defining inequality holds at eps and fails just below it
        prop_assert!(eps * eps / (8.0 * tf(eps / 2.0).unwrap() as f64) >= rhs);
        let below = eps - 1e-10;
        prop_assert!(below * below / (8.0 * tf(below / 2.0).unwrap() as f64) < rhs);
        let more = algdiff_epsilon_k(alpha, k, 2 * n_k, ParamSource::Adaptive(&tf)).unwrap();
        prop_assert!(more <= eps);
    }
}
