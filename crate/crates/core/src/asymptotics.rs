//! Large sample-ratio limit with `lambda = lambda1 * alpha`.
//!
//! Overlaps tend to constants, the susceptibility `V` decays like `V0/alpha`
//! and every conjugate grows linearly in alpha. The proximal map then
//! linearizes and the channel force reduces to a sigmoid of the margin.

use std::f64::consts::PI;

use crate::bfm::{build_bfm, Block, BlockFeatureModel};
use crate::channel::{Logistic, MarginLoss};
use crate::error::{domain, Error, Result};
use crate::metrics::boundary_error_at;
use crate::params::ExperimentParams;
use crate::se::{solve_fixed_point, LocalFields, SolverConfig, P_FLOOR};
use crate::special::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeAlphaParams {
    pub lambda1: f64,
    pub tau: f64,
    pub eps_t: f64,
    pub eps_g: f64,
}

/// Leading-order coefficients of the overlaps and conjugates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledState {
    pub m0: f64,
    pub q0: f64,
    pub v0: f64,
    pub p0: f64,
    pub a0: f64,
    pub f0: f64,
    pub n0: f64,
    pub m_hat0: f64,
    pub q_hat0: f64,
    pub v_hat0: f64,
    pub p_hat0: f64,
    pub lambda1: f64,
    pub rho: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauReport {
    pub egen_inf: f64,
    pub ebnd_inf: f64,
    pub eadv_inf: f64,
    /// `m0 / sqrt((rho + tau^2) q0)`.
    pub alignment_inf: f64,
    /// `sqrt(A0 / q0)`.
    pub attack_ratio_inf: f64,
}

struct Hats {
    m: f64,
    q: f64,
    v: f64,
    p: f64,
}

fn channel(m0: f64, q0: f64, p0: f64, rho: f64, pr: &LargeAlphaParams, tol: f64) -> Result<Hats> {
    let sqrt_p = p0.max(P_FLOOR).sqrt();
    let s = if pr.eps_t == 0.0 { 0.0 } else { pr.eps_t * sqrt_p };
    let fields = LocalFields { m: m0, q: q0, rho, tau: pr.tau };
    let [mh, qh, vh, ph] = fields.expect(&[s], tol, |y, _xi, omega, z, dz| {
        let u = y * omega - s;
        let r = sigmoid(-u);
        [dz * y * r, z * r * r, z * Logistic.d2(u), z * r]
    })?;
    Ok(Hats {
        m: mh,
        q: qh,
        v: vh,
        p: if pr.eps_t == 0.0 { 0.0 } else { pr.eps_t / sqrt_p * ph },
    })
}

fn prior(h: &Hats, pr: &LargeAlphaParams, model: &BlockFeatureModel) -> Result<[f64; 7]> {
    let mut o = [0.0; 7];
    for b in model.blocks() {
        let d = pr.lambda1 + h.v * b.psi + h.p * b.delta;
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("nonpositive prior denominator {d}")));
        }
        let e = h.m * h.m * b.psi * b.psi * b.t / (d * d);
        o[0] += b.phi * h.m * b.psi * b.psi * b.t / d;
        o[1] += b.phi * b.psi * e;
        o[2] += b.phi * b.psi / d;
        o[3] += b.phi * b.delta * e;
        o[4] += b.phi * b.upsilon * e;
        o[5] += b.phi * h.m * b.psi * b.upsilon * b.t / d;
        o[6] += b.phi * e;
    }
    Ok(o)
}

/// Damped iteration of the rescaled system.
pub fn solve_large_alpha(pr: &LargeAlphaParams, model: &BlockFeatureModel, cfg: &SolverConfig) -> Result<ScaledState> {
    if pr.eps_t == 0.0 && pr.tau == 0.0 {
        return Err(Error::ScalingViolation);
    }
    if !(pr.lambda1 > 0.0) || !(pr.eps_t >= 0.0) || !(pr.tau >= 0.0) {
        return domain("need lambda1 > 0, eps_t >= 0, tau >= 0");
    }
    let rho = model.rho();
    let mut eta = cfg.damping;
    let mut last = Error::Convergence { iterations: 0, residual: f64::INFINITY };
    for _ in 0..=cfg.retries {
        let (mut m0, mut q0, mut p0) = (cfg.init.m, cfg.init.q, cfg.init.p);
        let mut residual = f64::INFINITY;
        let mut failed = None;
        for it in 1..=cfg.max_iter {
            let h = match channel(m0, q0, p0, rho, pr, cfg.quad_tol) {
                Ok(h) => h,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            };
            let o = match prior(&h, pr, model) {
                Ok(o) => o,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            };
            residual = (o[0] - m0).abs().max((o[1] - q0).abs()).max((o[3] - p0).abs());
            if !residual.is_finite() {
                failed = Some(Error::Numerical("non-finite update".into()));
                break;
            }
            if residual < cfg.tol {
                let h = channel(o[0], o[1], o[3], rho, pr, cfg.quad_tol)?;
                let o2 = prior(&h, pr, model)?;
                return Ok(ScaledState {
                    m0: o[0],
                    q0: o[1],
                    v0: o2[2],
                    p0: o[3],
                    a0: o2[4],
                    f0: o2[5],
                    n0: o2[6],
                    m_hat0: h.m,
                    q_hat0: h.q,
                    v_hat0: h.v,
                    p_hat0: h.p,
                    lambda1: pr.lambda1,
                    rho,
                    iterations: it,
                    residual,
                });
            }
            m0 += eta * (o[0] - m0);
            q0 += eta * (o[1] - q0);
            p0 += eta * (o[3] - p0);
        }
        last = failed.unwrap_or(Error::Convergence { iterations: cfg.max_iter, residual });
        eta *= 0.5;
    }
    Err(last)
}

pub fn plateau_errors(state: &ScaledState, tau: f64, eps_g: f64) -> PlateauReport {
    let c = (state.m0 / ((state.rho + tau * tau) * state.q0).sqrt()).clamp(-1.0, 1.0);
    let ratio = (state.a0 / state.q0).sqrt();
    let egen = c.acos() / PI;
    let ebnd = boundary_error_at(c, eps_g * ratio);
    PlateauReport {
        egen_inf: egen,
        ebnd_inf: ebnd,
        eadv_inf: egen + ebnd,
        alignment_inf: c,
        attack_ratio_inf: ratio,
    }
}

/// Gap between adversarially trained and plain adversarial error along a
/// sample-ratio sequence, for each training budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub alphas: Vec<f64>,
    pub eps_t: Vec<f64>,
    /// `gaps[i][j]`: budget `eps_t[i]` at `alphas[j]`.
    pub gaps: Vec<Vec<f64>>,
    /// Least-squares slope of `ln gap` against `ln alpha`; `None` when the
    /// gaps vanish.
    pub exponents: Vec<Option<f64>>,
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Adversarial error of the full solver at one parameter point.
pub fn full_adversarial_error(params: &ExperimentParams, model: &BlockFeatureModel, cfg: &SolverConfig) -> Result<f64> {
    let fp = solve_fixed_point(params, model, cfg)?;
    let c = (fp.overlaps.m / ((fp.aux.rho + params.tau.powi(2)) * fp.overlaps.q).sqrt()).clamp(-1.0, 1.0);
    let reach = params.eps_g * (fp.aux.a / fp.overlaps.q).sqrt();
    Ok(c.acos() / PI + boundary_error_at(c, reach))
}

/// Decay of `|Eadv(eps_t) - Eadv(0)|` with alpha at fixed `lambda`, for a
/// single-block model.
pub fn universality_check(
    model: &BlockFeatureModel,
    tau: f64,
    eps_g: f64,
    lambda: f64,
    eps_t_list: &[f64],
    alpha_list: &[f64],
    cfg: &SolverConfig,
) -> Result<DecayTable> {
    if model.len() != 1 {
        return domain("the universality check needs a single-block model");
    }
    let base: Vec<f64> = alpha_list
        .iter()
        .map(|&a| full_adversarial_error(&ExperimentParams::new(a, lambda, tau, 0.0, eps_g), model, cfg))
        .collect::<Result<_>>()?;
    let mut gaps = Vec::new();
    let mut exponents = Vec::new();
    for &et in eps_t_list {
        let row: Vec<f64> = if et == 0.0 {
            vec![0.0; alpha_list.len()]
        } else {
            alpha_list
                .iter()
                .zip(&base)
                .map(|(&a, &b)| {
                    full_adversarial_error(&ExperimentParams::new(a, lambda, tau, et, eps_g), model, cfg)
                        .map(|e| (e - b).abs())
                })
                .collect::<Result<_>>()?
        };
        exponents.push(loglog_slope(alpha_list, &row));
        gaps.push(row);
    }
    Ok(DecayTable { alphas: alpha_list.to_vec(), eps_t: eps_t_list.to_vec(), gaps, exponents })
}

/// First-order response of the plateau errors to moving defence weight
/// between the two blocks of a strong/weak feature model.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSlopes {
    pub egen_slope: f64,
    pub ebnd_slope: f64,
    pub eadv_slope: f64,
    /// Alignment `m0 / sqrt(rho q0)` at zero rotation.
    pub theta0: f64,
    /// Attack ratio `sqrt(A0 / q0)` at zero rotation.
    pub u0: f64,
    /// Whether the closed-form improvement condition holds at zero rotation.
    pub condition_holds: bool,
    /// Plateau at zero rotation.
    pub base: PlateauReport,
    /// `(rho, Egen, Ebnd)` along the requested grid.
    pub grid: Vec<(f64, f64, f64)>,
}

fn rotated(blocks: &[Block], delta1: f64, r: f64) -> Result<BlockFeatureModel> {
    let mut b = blocks.to_vec();
    b[0].delta += delta1 * r;
    b[1].delta -= delta1 * r;
    build_bfm(&b, None)
}

/// Left side minus right side of the improvement condition; negative means
/// the rotation lowers the adversarial error.
pub fn improvement_margin(theta0: f64, u0: f64, eps_g: f64) -> f64 {
    let s = 1.0 - theta0 * theta0;
    let x = theta0 * u0 * eps_g;
    let lhs = eps_g / 2f64.sqrt() * crate::special::erfc(-x / (2.0 * s).sqrt());
    let rhs = (-x * x / (2.0 * s)).exp() / (PI.sqrt() * s.sqrt());
    lhs - rhs
}

/// Rotates defence weight `Delta = (Delta1 + delta1 r, Delta2 - delta1 r)`
/// and differentiates the large-alpha plateau at `r = 0` with step `1e-4`
/// plus one Richardson extrapolation.
#[allow(clippy::too_many_arguments)]
pub fn defence_rotation_check(
    swfm: &BlockFeatureModel,
    delta1: f64,
    varrho_grid: &[f64],
    tau: f64,
    eps_g: f64,
    eps_t: f64,
    lambda1: f64,
    cfg: &SolverConfig,
) -> Result<RotationSlopes> {
    let b = swfm.blocks();
    if b.len() != 2 {
        return domain("the rotation check needs exactly two blocks");
    }
    if !(b[0].psi > b[1].psi) {
        return domain("first block must have the larger data variance");
    }
    if b[1].delta * b[0].psi < b[0].delta * b[1].psi {
        return domain("defence hypothesis Delta2 psi1 >= Delta1 psi2 violated");
    }
    if (b[0].upsilon - b[1].upsilon).abs() > 1e-12 {
        return domain("attack weights must be equal across blocks");
    }
    let pr = LargeAlphaParams { lambda1, tau, eps_t, eps_g };
    let plateau = |r: f64| -> Result<PlateauReport> {
        let m = rotated(b, delta1, r)?;
        Ok(plateau_errors(&solve_large_alpha(&pr, &m, cfg)?, tau, eps_g))
    };
    let base_state = solve_large_alpha(&pr, swfm, cfg)?;
    let base = plateau_errors(&base_state, tau, eps_g);
    let h = 1e-4;
    let diff = |h: f64| -> Result<[f64; 3]> {
        let (p, m) = (plateau(h)?, plateau(-h)?);
        Ok([
            (p.egen_inf - m.egen_inf) / (2.0 * h),
            (p.ebnd_inf - m.ebnd_inf) / (2.0 * h),
            (p.eadv_inf - m.eadv_inf) / (2.0 * h),
        ])
    };
    let (d1, d2) = (diff(h)?, diff(h / 2.0)?);
    let rich = |i: usize| (4.0 * d2[i] - d1[i]) / 3.0;
    let theta0 = base_state.m0 / (base_state.rho * base_state.q0).sqrt();
    let u0 = (base_state.a0 / base_state.q0).sqrt();
    let grid = varrho_grid
        .iter()
        .map(|&r| plateau(r).map(|p| (r, p.egen_inf, p.ebnd_inf)))
        .collect::<Result<_>>()?;
    Ok(RotationSlopes {
        egen_slope: rich(0),
        ebnd_slope: rich(1),
        eadv_slope: rich(2),
        theta0,
        u0,
        condition_holds: improvement_margin(theta0, u0, eps_g) < 0.0,
        base,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_noiseless_untrained() {
        let pr = LargeAlphaParams { lambda1: 1e-3, tau: 0.0, eps_t: 0.0, eps_g: 0.2 };
        assert_eq!(
            solve_large_alpha(&pr, &BlockFeatureModel::identity(), &SolverConfig::default()),
            Err(Error::ScalingViolation)
        );
    }

    #[test]
    fn loglog_slope_of_power() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.3)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.3).abs() < 1e-12);
        assert_eq!(loglog_slope(&xs, &[0.0; 4]), None);
    }
}
