use advse::metrics::{
    boundary_error, boundary_error_at, boundary_error_owen, boundary_error_owen_at, class_preserving_error, error_bounds,
    generalisation_error, owen_t, report, robustness, training_error, usefulness,
};
use advse::se::solve_fixed_point;
use advse::{build_bfm, AuxOverlaps, Block, BlockFeatureModel, ExperimentParams, Overlaps, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

fn battery() -> Vec<BlockFeatureModel> {
    let single = |psi, t| build_bfm(&[Block::new(1.0, psi, 1.0, 1.0, t)], None).unwrap();
    let pair = |d1, d2| {
        build_bfm(&[Block::new(0.5, 5.0, d1, 1.0, 1.0), Block::new(0.5, 0.2, d2, 1.0, 1.0)], None).unwrap()
    };
    vec![single(0.5, 2.0), single(0.5, 8.0), single(2.0, 0.5), single(2.0, 2.0), pair(2.0, 1.0), pair(1.0, 1.0), pair(1.0, 2.0)]
}

fn sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn owen_t_special_values() {
    assert_eq!(owen_t(0.7, 0.0), 0.0);
    for a in [0.3, 1.0, 4.0, 40.0] {
        assert!((owen_t(0.0, a) - a.atan() / (2.0 * PI)).abs() < 1e-13);
    }
    // composite trapezoid with 2e5 panels
    let (h, a) = (1.5f64, 0.7f64);
    let n = 200_000;
    let step = a / n as f64;
    let g = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
    let mut s = 0.5 * (g(0.0) + g(a));
    for i in 1..n {
        s += g(i as f64 * step);
    }
    let trap = s * step / (2.0 * PI);
    assert!((owen_t(h, a) - trap).abs() < 1e-10);
}

#[test]
fn owen_t_reflection_matches_direct_integral() {
    for &(h, a) in &[(0.3, 2.5), (1.2, 7.0), (2.0, 1.5), (0.05, 30.0)] {
        let (direct, _) = advse::quad::integrate1(|x| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x), 0.0, a, 1e-14);
        assert!((owen_t(h, a) - direct / (2.0 * PI)).abs() < 1e-12, "{h} {a}");
        assert_eq!(owen_t(-h, a), owen_t(h, a));
        assert_eq!(owen_t(h, -a), -owen_t(h, a));
    }
}

#[test]
fn owen_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let c: f64 = rng.random_range(-0.99..0.99);
        let reach: f64 = rng.random_range(0.0..3.0);
        let (a, b) = (boundary_error_at(c, reach), boundary_error_owen_at(c, reach));
        assert!((a - b).abs() < 1e-10, "{c} {reach}: {a} {b}");
    }
    let (a, b) = (boundary_error(1.0, 2.0, 0.8, 1.5, 0.05, 0.4).unwrap(), boundary_error_owen(1.0, 2.0, 0.8, 1.5, 0.05, 0.4).unwrap());
    assert!((a - b).abs() < 1e-10);
}

// Gaussian local fields given (m, q, rho, tau): teacher nu, label, student omega.
fn local_field_sample(rng: &mut ChaCha8Rng, m: f64, q: f64, rho: f64, tau: f64) -> (f64, f64, f64) {
    let g: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
    let nu = rho.sqrt() * g[0];
    let omega = m / rho * nu + (q - m * m / rho).sqrt() * g[1];
    let y = if nu + tau * g[2] >= 0.0 { 1.0 } else { -1.0 };
    (nu, y, omega)
}

#[test]
fn clean_and_boundary_errors_match_sampling() {
    let (m, q, a, rho, tau, eps_g) = (1.1, 1.7, 0.9f64, 1.3, 0.2, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut gen, mut bnd) = (vec![], vec![]);
    let reach = eps_g * a.sqrt();
    for _ in 0..400_000 {
        let (_, y, omega) = local_field_sample(&mut rng, m, q, rho, tau);
        let margin = y * omega;
        gen.push(if margin < 0.0 { 1.0 } else { 0.0 });
        bnd.push(if margin >= 0.0 && margin <= reach { 1.0 } else { 0.0 });
    }
    let (g, gs) = sem(&gen);
    let (b, bs) = sem(&bnd);
    let eg = generalisation_error(m, q, rho, tau).unwrap();
    let eb = boundary_error(m, q, a, rho, tau, eps_g).unwrap();
    assert!((eg - g).abs() < 4.0 * gs, "{eg} vs {g}");
    assert!((eb - b).abs() < 4.0 * bs, "{eb} vs {b}");
}

#[test]
fn class_preserving_matches_scaled_attack_sampling() {
    let ov = Overlaps { m: 1.2, q: 1.8, v: 1.0, p: 1.0 };
    let aux = AuxOverlaps { a: 1.1, f: 0.7, n: 1.1, rho: 1.4 };
    let (eps_g, gamma) = (0.6, 0.3);
    for tau in [0.0, 0.3] {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let drop = eps_g * aux.f / aux.a.sqrt();
        let full = eps_g * aux.a.sqrt();
        let mut hits = vec![];
        for _ in 0..1_000_000 {
            let (nu, y, omega) = local_field_sample(&mut rng, ov.m, ov.q, aux.rho, tau);
            let tm = y * nu;
            // low margin: no attack; otherwise the largest fraction of the
            // student-worst perturbation that keeps the teacher margin at gamma
            let c = if tm <= gamma { 0.0 } else { ((tm - gamma) / drop).min(1.0) };
            hits.push(if y * omega <= c * full { 1.0 } else { 0.0 });
        }
        let (mc, s) = sem(&hits);
        let th = class_preserving_error(&ov, &aux, tau, eps_g, gamma).unwrap();
        assert!((th - mc).abs() < 3.0 * s, "tau {tau}: {th} vs {mc} +- {s}");
    }
}

#[test]
fn class_preserving_limits() {
    let ov = Overlaps { m: 1.2, q: 1.8, v: 1.0, p: 1.0 };
    let aux = AuxOverlaps { a: 1.1, f: 0.7, n: 1.1, rho: 1.4 };
    let egen = generalisation_error(ov.m, ov.q, aux.rho, 0.05).unwrap();
    let none = class_preserving_error(&ov, &aux, 0.05, 0.0, 0.0).unwrap();
    assert!((none - egen).abs() < 1e-10);
    let huge = class_preserving_error(&ov, &aux, 0.05, 0.4, 10.0 * aux.rho.sqrt()).unwrap();
    assert!((huge - egen).abs() < 1e-6);
    let zero_a = AuxOverlaps { a: 0.0, ..aux };
    assert!(class_preserving_error(&ov, &zero_a, 0.05, 0.4, 0.0).is_err());
    assert!(class_preserving_error(&ov, &aux, 0.05, 0.4, -1.0).is_err());
}

#[test]
fn class_preserving_resolves_narrow_label_noise() {
    // teacher field sd ~ 31 against tau = 0.05
    let ov = Overlaps { m: 291.67, q: 120.30, v: 1.0, p: 121.1 };
    let aux = AuxOverlaps { a: 121.1, f: 294.6, n: 120.3, rho: 990.01 };
    let egen = generalisation_error(ov.m, ov.q, aux.rho, 0.05).unwrap();
    let none = class_preserving_error(&ov, &aux, 0.05, 0.0, 0.0).unwrap();
    assert!((none - egen).abs() < 1e-10, "{none} {egen}");
}

#[test]
fn battery_identities_and_bounds() {
    let cfg = SolverConfig::default();
    for model in battery() {
        for alpha in [0.5, 2.0, 8.0] {
            let params = ExperimentParams::new(alpha, 1e-3, 0.05, 0.2, 0.2);
            let fp = solve_fixed_point(&params, &model, &cfg).unwrap();
            let r = report(&fp, &params, Some(0.0)).unwrap();
            assert!((r.eadv - r.egen - r.ebnd).abs() < 1e-12);
            let ecp = r.ecp.unwrap();
            assert!(r.egen <= ecp + 1e-9 && ecp <= r.eadv + 1e-9, "{:?}", r);
            let b = error_bounds(&model, 0.05, 0.2);
            assert!(r.egen >= b.egen_lower - 1e-9, "{} < {}", r.egen, b.egen_lower);
            assert!(r.ebnd <= b.ebnd_upper + 1e-9, "{} > {}", r.ebnd, b.ebnd_upper);
            let clean = report(&fp, &ExperimentParams { eps_g: 0.0, ..params }, None).unwrap();
            assert_eq!(clean.ebnd, 0.0);
            assert_eq!(clean.eadv, clean.egen);
        }
    }
}

#[test]
fn boundary_error_is_monotone() {
    let rho = 1.0;
    let q = 1.0f64;
    let mut prev_eps = [0.0; 20];
    for eps_g in [0.0, 0.1, 0.3, 0.7, 1.5] {
        for (i, prev) in prev_eps.iter_mut().enumerate() {
            let c = -0.95 + 0.1 * i as f64;
            let b = boundary_error(c * (rho * q).sqrt(), q, 1.0, rho, 0.0, eps_g).unwrap();
            assert!(b >= *prev - 1e-9);
            *prev = b;
        }
    }
    let mut last_b = -1.0;
    let mut last_g = 1.0;
    for i in 0..20 {
        let c = -0.95 + 0.1 * i as f64;
        let b = boundary_error_at(c, 0.4);
        let g = generalisation_error(c, 1.0, 1.0, 0.0).unwrap();
        assert!(b >= last_b - 1e-9 && g < last_g);
        last_b = b;
        last_g = g;
    }
}

#[test]
fn random_estimator_has_coin_flip_training_error() {
    let ov = Overlaps { m: 0.0, q: 1e-6, v: 1e-12, p: 1e-6 };
    let aux = AuxOverlaps { a: 1e-12, f: 0.0, n: 1e-12, rho: 1.0 };
    let e = training_error(&ov, &aux, &ExperimentParams::new(1.0, 1e3, 0.05, 0.0, 0.2)).unwrap();
    assert!((e - 0.5).abs() < 1e-6, "{e}");
}

#[test]
fn usefulness_and_robustness_closed_forms() {
    assert!((usefulness(&BlockFeatureModel::identity(), 0.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
    let model = build_bfm(&[Block::new(0.5, 5.0, 1.0, 1.0, 1.0), Block::new(0.5, 0.2, 1.0, 1.0, 1.0)], None).unwrap();
    assert_eq!(robustness(&model, 0.05, 0.0), usefulness(&model, 0.05));
    assert!(robustness(&model, 0.05, 0.2) < usefulness(&model, 0.05));
}
