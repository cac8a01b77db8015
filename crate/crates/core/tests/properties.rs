mod common;

use common::*;
use proptest::prelude::*;

use ermrer::gibbs::{objective_value, solve_ermrer};
use ermrer::measure::{AtomDistribution, ReferenceMeasure};
use ermrer::partition::{cumulants, log_partition as lib_log_partition};
use ermrer::risk::EmpiricalRisk;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..=8).prop_flat_map(|m| {
        (
            prop::collection::vec(0.05f64..2.0, m),
            prop::collection::vec(0.0f64..1.0, m),
            -2.3f64..2.3,
        )
            .prop_map(|(q, l, ll)| (q, l, ll.exp()))
    })
}

proptest! {
    #[test]
    fn posterior_matches_oracle((q, l, lambda) in instance()) {
        let m = ReferenceMeasure::custom(q.clone()).unwrap();
        let r = EmpiricalRisk::new(l.clone()).unwrap();
        let post = solve_ermrer(&m, &r, lambda).unwrap();
        let p = post.probs.probs();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(max_abs_diff(p, &posterior(&q, &l, lambda)) <= 1e-12);
    }

    #[test]
    fn log_partition_is_nondecreasing((q, l, _) in instance(), t in -20.0f64..20.0, dt in 0.0f64..5.0) {
        let m = ReferenceMeasure::custom(q).unwrap();
        let r = EmpiricalRisk::new(l).unwrap();
        prop_assert!(lib_log_partition(&m, &r, t + dt).unwrap() >= lib_log_partition(&m, &r, t).unwrap());
    }

    #[test]
    fn variance_is_nonnegative_and_mean_in_range((q, l, lambda) in instance()) {
        let m = ReferenceMeasure::custom(q).unwrap();
        let r = EmpiricalRisk::new(l.clone()).unwrap();
        let c = cumulants(&m, &r, lambda).unwrap();
        let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(c.k2 >= 0.0);
        prop_assert!(c.k1 >= lo - 1e-15 && c.k1 <= hi + 1e-15);
        prop_assert!(c.k2 <= 0.25 * (hi - lo).powi(2) + 1e-15);
    }

    #[test]
    fn gibbs_minimizes_objective((q, l, lambda) in instance(), seed in 0u64..1000) {
        let m = ReferenceMeasure::custom(q.clone()).unwrap();
        let r = EmpiricalRisk::new(l).unwrap();
        let post = solve_ermrer(&m, &r, lambda).unwrap();
        let best = objective_value(&post.probs, &m, &r, lambda).unwrap();
        let mut g = Gen::new(seed);
        let alpha: Vec<f64> = post.probs.probs().iter().map(|p| 100.0 * p).collect();
        let perturbed = dist(&g.dirichlet_with(&alpha));
        prop_assert!(objective_value(&perturbed, &m, &r, lambda).unwrap() >= best - 1e-12);
    }

    #[test]
    fn shifting_the_risk_leaves_the_posterior((q, l, lambda) in instance(), c in 0.0f64..5.0) {
        let m = ReferenceMeasure::custom(q).unwrap();
        let a = solve_ermrer(&m, &EmpiricalRisk::new(l.clone()).unwrap(), lambda).unwrap();
        let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
        let b = solve_ermrer(&m, &EmpiricalRisk::new(shifted).unwrap(), lambda).unwrap();
        prop_assert!(max_abs_diff(a.probs.probs(), b.probs.probs()) <= 1e-12);
    }

    #[test]
    fn point_mass_relative_entropy(m in 2usize..8, at in 0usize..8) {
        let at = at % m;
        let p = AtomDistribution::point_mass(m, at).unwrap();
        let u = AtomDistribution::uniform(m).unwrap();
        prop_assert!((p.relative_entropy(&u).unwrap() - (m as f64).ln()).abs() <= 1e-12);
    }
}
