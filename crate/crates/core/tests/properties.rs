use proptest::prelude::*;

use fdot::grid::{FieldSeries, SpatialMesh};
use fdot::losses::{split_by_length, training_errors, LossBreakdown};
use fdot::metrics::{mean_std, relative_l2};
use fdot::stability::uniform_time_mesh;
use fdot::synth::{add_noise, project_semidiscrete, recover_mu_from_p};
use fdot::train::{adam_step, AdamState, Schedule};
use fdot::{BoundaryTrace, RngStream, SpaceTimeGrid};

fn finite_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_error_is_scale_invariant(
        pair in (1usize..40).prop_flat_map(|n| (finite_vec(n), finite_vec(n))),
        k in -20i32..20,
        c in 1e-3..1e3f64,
    ) {
        let (a, e) = pair;
        prop_assume!(e.iter().any(|v| *v != 0.0));
        let base = relative_l2(&a, &e).unwrap();
        // powers of two scale without rounding
        let s = 2f64.powi(k);
        let sa: Vec<f64> = a.iter().map(|v| v * s).collect();
        let se: Vec<f64> = e.iter().map(|v| v * s).collect();
        prop_assert_eq!(relative_l2(&sa, &se).unwrap(), base);
        let ca: Vec<f64> = a.iter().map(|v| -c * v).collect();
        let ce: Vec<f64> = e.iter().map(|v| -c * v).collect();
        let scaled = relative_l2(&ca, &ce).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn schedule_matches_closed_form(initial in 1e-5..1e-1f64, factor in 0.01..1.0f64, interval in 1usize..5000, epoch in 0usize..100_000) {
        let s = Schedule { initial, factor, interval };
        prop_assert_eq!(s.rate(epoch), initial * factor.powi((epoch / interval) as i32));
    }

    #[test]
    fn boundary_split_is_fair(n in 0usize..5000, lengths in prop::collection::vec(0.1..10.0f64, 1..6)) {
        let counts = split_by_length(n, &lengths);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let total: f64 = lengths.iter().sum();
        for (c, l) in counts.iter().zip(&lengths) {
            prop_assert!((*c as f64 - n as f64 * l / total).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn noise_is_bounded_by_delta(delta in 0.0..0.5f64, seed in any::<u64>()) {
        let g = SpaceTimeGrid::unit(5, 4, 1.0).unwrap();
        let clean = BoundaryTrace::from_fn(&g, |x, y, t, _| x - y + t);
        let noisy = add_noise(&clean, delta, &RngStream::new(seed, "noise")).unwrap();
        let diff = noisy.zip_with(&clean, |a, b| a - b).unwrap();
        prop_assert!(diff.max_abs() <= delta);
    }

    #[test]
    fn projection_round_trip(n in 3usize..9, k in 1usize..6, a in 0.5..3.0f64, b in -1.0..1.0f64) {
        let mesh = SpatialMesh::unit_square(n).unwrap();
        let times = uniform_time_mesh(1.0, 2 * k);
        let u_e = FieldSeries::from_fn(mesh, times.clone(), |x, y, t| 0.2 + t + x * y);
        let mu = |x: f64, y: f64, t: f64| a + b * (x - y) * t;
        let p = project_semidiscrete(mu, &u_e, &uniform_time_mesh(1.0, k)).unwrap();
        let back = recover_mu_from_p(&p, &u_e, 1e-3).unwrap();
        for (level, &t) in back.times.iter().enumerate() {
            for (node, v) in back.values[level].iter().enumerate() {
                let (x, y) = mesh.coords(node);
                prop_assert!((v - mu(x, y, t)).abs() <= 1e-12 * mu(x, y, t).abs());
            }
        }
    }

    #[test]
    fn first_adam_step_never_exceeds_rate(g in finite_vec(8), rate in 1e-6..1.0f64) {
        let mut p = vec![0.0; 8];
        let mut s = AdamState::new(8);
        adam_step(&mut p, &g, &mut s, rate).unwrap();
        for v in p {
            prop_assert!(v.abs() <= rate * (1.0 + 1e-12));
        }
    }

    #[test]
    fn training_errors_reconcile(
        parts in prop::collection::vec(0.0..10.0f64, 8),
        lambda in 0.0..1e4f64,
    ) {
        let b = LossBreakdown {
            int: parts[0],
            tb0: parts[1],
            tb1: parts[2],
            sb: [parts[3], parts[4], parts[5], parts[6]],
            d: parts[7],
            lambda,
            total: lambda * parts[7] + parts[..7].iter().sum::<f64>(),
        };
        let total = training_errors(&b).reconstructed_total(lambda);
        prop_assert!((total - b.total).abs() <= 1e-12 * b.total.max(1e-300));
    }

    #[test]
    fn population_std_reconciles(values in prop::collection::vec(0.0..1.0f64, 1..10)) {
        let (m, s) = mean_std(&values);
        let n = values.len() as f64;
        let second = values.iter().map(|v| v * v).sum::<f64>() / n;
        prop_assert!((s * s - (second - m * m)).abs() <= 1e-12);
    }
}
