use advse::channel::{fg, prox_shifted_logistic};
use advse::exec::{counter_seed, map_indexed, map_sequential};
use advse::metrics::{boundary_error_at, boundary_error_owen_at};
use advse::special::sigmoid;
use advse::{build_bfm, Block};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prox_is_stationary_and_monotone(w in -30.0..30.0f64, v in 1e-4..100.0f64, s in 0.0..4.0f64, y in prop::sample::select(vec![-1.0, 1.0])) {
        let x = prox_shifted_logistic(w, v, y, s).unwrap();
        let r = x - w - y * v * sigmoid(-(y * x - s));
        prop_assert!(r.abs() < 1e-11 * (w.abs() + s).max(1.0));
        let x2 = prox_shifted_logistic(w + 0.1, v, y, s).unwrap();
        prop_assert!(x2 >= x);
    }

    #[test]
    fn force_points_toward_the_label(w in -20.0..20.0f64, v in 1e-3..50.0f64, p in 0.0..5.0f64, e in 0.0..1.0f64) {
        prop_assert!(fg(1.0, w, v, p, e).unwrap() >= 0.0);
        prop_assert!(fg(-1.0, w, v, p, e).unwrap() <= 0.0);
    }

    #[test]
    fn boundary_error_is_a_probability(c in -0.999..0.999f64, reach in 0.0..6.0f64) {
        let b = boundary_error_at(c, reach);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((b - boundary_error_owen_at(c, reach)).abs() < 1e-9);
    }

    #[test]
    fn models_are_trace_normalized(
        phi in 0.05..0.95f64,
        psi in (0.1..10.0f64, 0.1..10.0f64),
        delta in (0.1..5.0f64, 0.1..5.0f64),
        ups in (0.1..5.0f64, 0.1..5.0f64),
    ) {
        let m = build_bfm(&[Block::new(phi, psi.0, delta.0, ups.0, 1.0), Block::new(1.0 - phi, psi.1, delta.1, ups.1, 1.0)], None).unwrap();
        let b = m.blocks();
        let td: f64 = b.iter().map(|x| x.phi * x.delta).sum();
        let tu: f64 = b.iter().map(|x| x.phi * x.upsilon).sum();
        prop_assert!((td - 1.0).abs() < 1e-12 && (tu - 1.0).abs() < 1e-12);
        let sizes = m.block_sizes(997);
        prop_assert_eq!(sizes.iter().sum::<usize>(), 997);
    }

    #[test]
    fn seeds_do_not_collide(base in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        prop_assert_ne!(counter_seed(base, i), counter_seed(base, j));
    }
}

#[test]
fn dispatch_preserves_order() {
    let f = |i: usize| counter_seed(7, i as u64);
    assert_eq!(map_indexed(1000, f), map_sequential(1000, f));
}
