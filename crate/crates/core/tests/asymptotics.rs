use advse::asymptotics::{defence_rotation_check, plateau_errors, solve_large_alpha, universality_check, LargeAlphaParams};
use advse::metrics::report;
use advse::se::solve_fixed_point;
use advse::{build_bfm, Block, BlockFeatureModel, Error, ExperimentParams, SolverConfig};

fn swfm(d1: f64, d2: f64) -> BlockFeatureModel {
    build_bfm(&[Block::new(0.5, 5.0, d1, 1.0, 1.0), Block::new(0.5, 0.2, d2, 1.0, 1.0)], None).unwrap()
}

#[test]
fn plateau_matches_full_solver_at_large_ratio() {
    let cfg = SolverConfig::default();
    let single = build_bfm(&[Block::new(1.0, 2.0, 1.0, 1.0, 2.0)], None).unwrap();
    for model in [single, swfm(1.0, 2.0)] {
        let lambda1 = 1e-3;
        let st = solve_large_alpha(&LargeAlphaParams { lambda1, tau: 0.05, eps_t: 0.2, eps_g: 0.2 }, &model, &cfg).unwrap();
        let pl = plateau_errors(&st, 0.05, 0.2);
        let alpha = 1e4;
        let params = ExperimentParams::new(alpha, lambda1 * alpha, 0.05, 0.2, 0.2);
        let fp = solve_fixed_point(&params, &model, &cfg).unwrap();
        let r = report(&fp, &params, None).unwrap();
        assert!((pl.egen_inf - r.egen).abs() < 1e-3, "{} {}", pl.egen_inf, r.egen);
        assert!((pl.ebnd_inf - r.ebnd).abs() < 1e-3, "{} {}", pl.ebnd_inf, r.ebnd);
        // overlaps approach their leading coefficients
        assert!((fp.overlaps.m - st.m0).abs() < 1e-2 * st.m0);
        assert!((fp.overlaps.v * alpha - st.v0).abs() < 1e-2 * st.v0);
    }
}

#[test]
fn noiseless_untrained_limit_is_refused() {
    let pr = LargeAlphaParams { lambda1: 1e-3, tau: 0.0, eps_t: 0.0, eps_g: 0.2 };
    assert_eq!(solve_large_alpha(&pr, &swfm(1.0, 1.0), &SolverConfig::default()), Err(Error::ScalingViolation));
    let noisy = LargeAlphaParams { tau: 0.05, ..pr };
    assert!(solve_large_alpha(&noisy, &swfm(1.0, 1.0), &SolverConfig::default()).is_ok());
}

#[test]
fn training_gap_decays_faster_than_inverse_ratio() {
    let model = BlockFeatureModel::identity();
    let tab = universality_check(&model, 0.05, 0.2, 1e-3, &[0.5], &[100.0, 200.0], &SolverConfig::default()).unwrap();
    let g = &tab.gaps[0];
    assert!(g[1] <= 0.6 * g[0], "{g:?}");
    assert!(tab.exponents[0].unwrap() < -1.0);
    assert!(universality_check(&swfm(1.0, 1.0), 0.05, 0.2, 1e-3, &[0.5], &[100.0], &SolverConfig::default()).is_err());
}

#[test]
fn moving_defence_to_weak_block_trades_clean_for_boundary_error() {
    let cfg = SolverConfig::default();
    let model = swfm(1.0, 1.0);
    let s = defence_rotation_check(&model, -0.5, &[0.0, 0.02], 0.05, 0.2, 0.2, 1e-3, &cfg).unwrap();
    assert!(s.egen_slope > 0.0 && s.ebnd_slope < 0.0, "{s:?}");
    assert!((s.eadv_slope - s.egen_slope - s.ebnd_slope).abs() < 1e-9);
    assert_eq!(s.grid[0].1, s.base.egen_inf);
    assert_eq!(s.grid[0].2, s.base.ebnd_inf);
    // opposite rotation flips both signs
    let r = defence_rotation_check(&model, 0.5, &[], 0.05, 0.2, 0.2, 1e-3, &cfg).unwrap();
    assert!((r.egen_slope + s.egen_slope).abs() < 1e-6 && (r.ebnd_slope + s.ebnd_slope).abs() < 1e-6);
}

#[test]
fn rotation_check_enforces_hypotheses() {
    let cfg = SolverConfig::default();
    let flipped = build_bfm(&[Block::new(0.5, 0.2, 1.0, 1.0, 1.0), Block::new(0.5, 5.0, 1.0, 1.0, 1.0)], None).unwrap();
    assert!(defence_rotation_check(&flipped, -0.5, &[], 0.05, 0.2, 0.2, 1e-3, &cfg).is_err());
    let heavy_strong = swfm(30.0, 1.0);
    assert!(defence_rotation_check(&heavy_strong, -0.5, &[], 0.05, 0.2, 0.2, 1e-3, &cfg).is_err());
    let single = BlockFeatureModel::identity();
    assert!(defence_rotation_check(&single, -0.5, &[], 0.05, 0.2, 0.2, 1e-3, &cfg).is_err());
}
