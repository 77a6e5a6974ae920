use hawkes_core::estimators::{
    delta_schedule, detect_regime, estimator_e, estimator_u_and_p, estimator_v, estimator_zw,
    in_domain, invert_phi, lattice_times, phi, Regime,
};
use hawkes_core::CountsGrid;
use proptest::prelude::*;

/// `(E, V, W)` limits for given parameters.
fn forward(mu: f64, lambda: f64, p: f64) -> (f64, f64, f64) {
    let r = 1.0 - lambda * p;
    (
        mu / r,
        mu * mu * lambda * lambda * p * (1.0 - p) / (r * r),
        mu / (r * r * r),
    )
}

/// Increasing count paths on `times` for `rows` individuals.
fn counts_strategy(n: usize, len: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
    prop::collection::vec(prop::collection::vec(0u64..50, len), n).prop_map(|incs| {
        incs.into_iter()
            .map(|row| {
                row.into_iter()
                    .scan(0u64, |acc, x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn phi_inverts_the_limit_map(mu in 0.05f64..5.0, p in 0.01f64..0.99, frac in 0.01f64..0.99) {
        let lambda = frac / p;
        let (u, v, w) = forward(mu, lambda, p);
        prop_assert!(in_domain(u, v, w));
        let [m, l, q] = phi(u, v, w).unwrap();
        prop_assert!((m - mu).abs() <= 1e-8 * mu);
        prop_assert!((l - lambda).abs() <= 1e-8 * lambda);
        prop_assert!((q - p).abs() <= 1e-8 * p);
        let strict = invert_phi(u, v, w).unwrap();
        prop_assert!(strict.in_domain);
        prop_assert_eq!(strict.p_hat, q);
    }

    #[test]
    fn sup_estimate_is_a_probability(rows in counts_strategy(6, 1), n_extra in 0usize..10) {
        let c = CountsGrid::from_rows(vec![5.0], rows).unwrap();
        let s = estimator_u_and_p(&c, 5.0, 6, 6 + n_extra).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.p));
        prop_assert!(s.u.is_finite());
    }

    #[test]
    fn w_is_twice_z2_minus_z(rows in counts_strategy(4, 9)) {
        let times = lattice_times(8.0, 1.0).unwrap();
        let c = CountsGrid::from_rows(times, rows).unwrap();
        let e = estimator_e(&c, 8.0, 4, 7).unwrap();
        let (z1, z2, w) = estimator_zw(&c, 8.0, 1.0, 4, 7, e).unwrap();
        prop_assert_eq!(w, 2.0 * z2 - z1);
        prop_assert!(z1 >= 0.0 && z2 >= 0.0);
    }

    #[test]
    fn full_observation_statistics_ignore_labels(rows in counts_strategy(5, 9), shift in 1usize..5) {
        let times = lattice_times(8.0, 1.0).unwrap();
        let mut rotated = rows.clone();
        rotated.rotate_left(shift);
        let a = CountsGrid::from_rows(times.clone(), rows).unwrap();
        let b = CountsGrid::from_rows(times, rotated).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
        prop_assert!(close(estimator_e(&a, 8.0, 5, 5).unwrap(), estimator_e(&b, 8.0, 5, 5).unwrap()));
        prop_assert!(close(estimator_v(&a, 8.0, 5, 5).unwrap(), estimator_v(&b, 8.0, 5, 5).unwrap()));
        let (ea, eb) = (estimator_e(&a, 8.0, 5, 5).unwrap(), estimator_e(&b, 8.0, 5, 5).unwrap());
        let wa = estimator_zw(&a, 8.0, 1.0, 5, 5, ea).unwrap().2;
        let wb = estimator_zw(&b, 8.0, 1.0, 5, 5, eb).unwrap().2;
        prop_assert!(close(wa, wb));
    }

    #[test]
    fn detector_is_monotone_in_mean_count(t in 1.5f64..1000.0, z in 0.0f64..1e8, factor in 1.0f64..100.0) {
        let low = detect_regime(z, t).unwrap().regime;
        let high = detect_regime(z * factor, t).unwrap().regime;
        if low == Regime::Supercritical {
            prop_assert_eq!(high, Regime::Supercritical);
        }
    }

    #[test]
    fn schedule_lattice_exists(t in 1.0f64..5000.0, q in 3.5f64..30.0) {
        let d = delta_schedule(t, q).unwrap();
        prop_assert!(lattice_times(t, d).is_ok());
        prop_assert!(d > 0.0 && d <= t / 2.0 + 1e-12);
    }
}

#[test]
fn phi_inversion_on_a_fixed_parameter_grid() {
    for mu in [0.5, 1.0, 3.0] {
        for p in [0.1, 0.35, 0.6] {
            for frac in [0.2, 0.7, 0.95] {
                let lambda = frac / p;
                let (u, v, w) = forward(mu, lambda, p);
                let [m, l, q] = phi(u, v, w).unwrap();
                assert!((m - mu).abs() < 1e-10 * mu);
                assert!((l - lambda).abs() < 1e-10 * lambda);
                assert!((q - p).abs() < 1e-10 * p);
            }
        }
    }
}
