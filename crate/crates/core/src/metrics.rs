//! Error metrics as functions of the overlaps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bfm::BlockFeatureModel;
use crate::channel::{prox_with, Logistic, MarginLoss};
use crate::error::{domain, Error, Result};
use crate::params::ExperimentParams;
use crate::quad::{integrate, integrate1};
use crate::se::{AuxOverlaps, FixedPoint, LocalFields, Overlaps, P_FLOOR};
use crate::special::{erf, erfc, ncdf, npdf, sigmoid, SQRT_2};

const SLACK: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub egen: f64,
    pub ebnd: f64,
    pub eadv: f64,
    pub etrain: Option<f64>,
    pub ltrain: Option<f64>,
    pub ecp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryAngles {
    /// `m / sqrt(rho q)`.
    pub theta: f64,
    /// `sqrt(A / q)`.
    pub kappa: f64,
}

pub fn angles(ov: &Overlaps, aux: &AuxOverlaps) -> GeometryAngles {
    GeometryAngles {
        theta: ov.m / (aux.rho * ov.q).sqrt(),
        kappa: (aux.a / ov.q).sqrt(),
    }
}

/// Cosine between student field and noisy teacher field.
fn noisy_alignment(m: f64, q: f64, rho: f64, tau: f64) -> Result<f64> {
    if !(q > 0.0 && rho > 0.0) {
        return domain(format!("q and rho must be positive, got q={q}, rho={rho}"));
    }
    let c = m / ((rho + tau * tau) * q).sqrt();
    if !c.is_finite() || c.abs() > 1.0 + SLACK {
        return domain(format!("alignment {c} outside [-1, 1]"));
    }
    Ok(c.clamp(-1.0, 1.0))
}

pub fn generalisation_error(m: f64, q: f64, rho: f64, tau: f64) -> Result<f64> {
    Ok(noisy_alignment(m, q, rho, tau)?.acos() / PI)
}

/// Slope `k` of the conditional probit in the boundary integrand, as a
/// function of the noisy alignment. Infinite at perfect alignment.
fn boundary_slope(c: f64) -> f64 {
    let s = 1.0 - c * c;
    if s <= 0.0 {
        f64::INFINITY.copysign(c)
    } else {
        c / s.sqrt()
    }
}

fn attack_reach(q: f64, a: f64, eps_g: f64) -> Result<f64> {
    if !(eps_g >= 0.0) {
        return domain(format!("eps_g must be nonnegative, got {eps_g}"));
    }
    if !(a >= 0.0) {
        return domain(format!("A must be nonnegative, got {a}"));
    }
    Ok(eps_g * (a / q).sqrt())
}

/// `int_0^L erfc(-k nu / sqrt 2) phi(nu) d nu`, by quadrature.
pub fn boundary_error_at(c: f64, reach: f64) -> f64 {
    if reach == 0.0 {
        return 0.0;
    }
    let k = boundary_slope(c);
    if k.is_infinite() {
        return if k > 0.0 { erf(reach / SQRT_2) } else { 0.0 };
    }
    integrate1(|nu| erfc(-k * nu / SQRT_2) * npdf(nu), 0.0, reach, QUAD_TOL * 0.1).0
}

/// Probability mass of correctly classified points within attack reach.
pub fn boundary_error(m: f64, q: f64, a: f64, rho: f64, tau: f64, eps_g: f64) -> Result<f64> {
    let c = noisy_alignment(m, q, rho, tau)?;
    let reach = attack_reach(q, a, eps_g)?;
    Ok(boundary_error_at(c, reach))
}

/// Closed form of [`boundary_error_at`] through Owen's T function.
pub fn boundary_error_owen_at(c: f64, reach: f64) -> f64 {
    let l = reach;
    let k = boundary_slope(c);
    if k == 0.0 {
        return 0.5 * erf(l / SQRT_2);
    }
    if k.is_infinite() {
        return if k > 0.0 { erf(l / SQRT_2) } else { 0.0 };
    }
    2.0 * owen_t(k * l, 1.0 / k) + 0.5 * erf(l / SQRT_2) * erfc(-k * l / SQRT_2) + (-1.0 / k).atan() / PI
}

pub fn boundary_error_owen(m: f64, q: f64, a: f64, rho: f64, tau: f64, eps_g: f64) -> Result<f64> {
    let c = noisy_alignment(m, q, rho, tau)?;
    let reach = attack_reach(q, a, eps_g)?;
    Ok(boundary_error_owen_at(c, reach))
}

/// Owen's T function `(1/2pi) int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx`.
///
/// Integrated directly for `|a| <= 1`; larger `|a|` go through the
/// reflection `T(h,a) + T(ah,1/a) = (Phi(h) + Phi(ah))/2 - Phi(h) Phi(ah)`
/// for `h >= 0`, `a > 0`.
pub fn owen_t(h: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if a < 0.0 {
        return -owen_t(h, -a);
    }
    let h = h.abs();
    if a <= 1.0 {
        let hh = h * h;
        let (v, _) = integrate1(|x| (-0.5 * hh * (1.0 + x * x)).exp() / (1.0 + x * x), 0.0, a, QUAD_TOL);
        return v / (2.0 * PI);
    }
    let ah = a * h;
    let (ph, pah) = (ncdf(h), ncdf(ah));
    // 0.5(ph + pah) - ph pah written without cancellation in the upper tail
    let (qh, qah) = (ncdf(-h), ncdf(-ah));
    let sym = 0.5 * (ph * qah + pah * qh);
    sym - owen_t(ah, 1.0 / a)
}

/// Correlation of the teacher field with the labels.
pub fn usefulness(model: &BlockFeatureModel, tau: f64) -> f64 {
    let rho = model.rho();
    (2.0 / PI).sqrt() * rho / (rho + tau * tau).sqrt()
}

/// Usefulness after the worst-case attack of size `eps_g`.
pub fn robustness(model: &BlockFeatureModel, tau: f64, eps_g: f64) -> f64 {
    usefulness(model, tau) - eps_g * model.teacher_attack_norm().sqrt()
}

/// Teacher-level bounds: a floor on the clean error and a ceiling on the
/// boundary error valid at every estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    pub egen_lower: f64,
    pub ebnd_upper: f64,
}

pub fn error_bounds(model: &BlockFeatureModel, tau: f64, eps_g: f64) -> ErrorBounds {
    let rho = model.rho();
    let c_max = (rho / (rho + tau * tau)).sqrt();
    ErrorBounds {
        egen_lower: c_max.acos() / PI,
        ebnd_upper: boundary_error_owen_at(c_max, eps_g * model.max_attack_ratio()),
    }
}

fn margin_shift(ov: &Overlaps, eps_t: f64) -> f64 {
    if eps_t == 0.0 {
        0.0
    } else {
        eps_t * ov.p.max(P_FLOOR).sqrt()
    }
}

/// Fraction of training points the estimator misclassifies.
///
/// The proximal point has the wrong sign exactly when `y omega` falls below
/// `-V sigmoid(s)`, which gives the discontinuity location in closed form.
pub fn training_error(ov: &Overlaps, aux: &AuxOverlaps, params: &ExperimentParams) -> Result<f64> {
    let s = margin_shift(ov, params.eps_t);
    let thr = -ov.v * sigmoid(s);
    let fields = LocalFields { m: ov.m, q: ov.q, rho: aux.rho, tau: params.tau };
    let [e] = fields.expect(&[thr], 1e-10, |y, _xi, omega, z, _dz| {
        [if y * omega < thr { z } else { 0.0 }]
    })?;
    Ok(e)
}

/// Mean training loss at the shifted margins.
pub fn training_loss(ov: &Overlaps, aux: &AuxOverlaps, params: &ExperimentParams) -> Result<f64> {
    let s = margin_shift(ov, params.eps_t);
    let v = ov.v;
    let fields = LocalFields { m: ov.m, q: ov.q, rho: aux.rho, tau: params.tau };
    let mut err = None;
    let [l] = fields.expect(&[s, s - v], 1e-10, |y, _xi, omega, z, _dz| {
        match prox_with(&Logistic, omega, v, y, s) {
            Ok(p) => [z * Logistic.value(p.margin)],
            Err(e) => {
                err.get_or_insert(e);
                [0.0]
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(l),
    }
}

#[inline]
fn probit(x: f64, s: f64) -> f64 {
    if s > 0.0 {
        ncdf(x / s)
    } else if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Adversarial error restricted to perturbations that keep the teacher
/// margin `y nu` at or above `gamma`.
///
/// Points with teacher margin at most `gamma` are not attacked; points whose
/// margin stays above `gamma` under the full attack get it; in between the
/// attack is scaled down until the teacher margin reaches `gamma`.
pub fn class_preserving_error(ov: &Overlaps, aux: &AuxOverlaps, tau: f64, eps_g: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return domain(format!("gamma must be nonnegative, got {gamma}"));
    }
    if !(eps_g >= 0.0) {
        return domain(format!("eps_g must be nonnegative, got {eps_g}"));
    }
    let (m, q, a, f, rho) = (ov.m, ov.q, aux.a, aux.f, aux.rho);
    if !(a > 0.0) {
        return domain("attack overlap A is zero");
    }
    let sigma = (q - m * m / rho).max(0.0).sqrt();
    let ra = a.sqrt();
    let full = eps_g * ra;
    let gamma_star = gamma.max(gamma + eps_g * f / ra);
    let sd = rho.sqrt();
    let lo = if tau == 0.0 { 0.0 } else { -10.0 * sd };
    let hi = 10.0 * sd;
    let mut pts = vec![lo, 0.0, hi];
    // label and estimator steps can be far narrower than sd; without
    // breakpoints at their scale the first Kronrod panel misses them
    let mut extra = vec![gamma, gamma_star];
    for w in [tau, tau * 8.0] {
        extra.extend([-w, w]);
    }
    if m != 0.0 {
        let width = sigma * rho / m.abs();
        for c in [0.0, gamma, full * rho / m] {
            for k in [-8.0, -1.0, 1.0, 8.0] {
                extra.push(c + k * width);
            }
        }
    }
    for p in extra {
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate(
        |nu| {
            let w = npdf(nu / sd) / sd * probit(nu, tau);
            if w == 0.0 {
                return [0.0];
            }
            let mean = m * nu / rho;
            let reach = if nu <= gamma {
                0.0
            } else if nu >= gamma_star {
                full
            } else {
                (nu - gamma) * a / f
            };
            [2.0 * w * probit(reach - mean, sigma)]
        },
        &pts,
        1e-11,
        2000,
    );
    if !q.value[0].is_finite() {
        return Err(Error::Numerical("class-preserving integral is not finite".into()));
    }
    Ok(q.value[0])
}

/// All theory errors at a fixed point. `gamma` switches on the
/// class-preserving error.
pub fn report(fp: &FixedPoint, params: &ExperimentParams, gamma: Option<f64>) -> Result<ErrorReport> {
    let (ov, aux) = (&fp.overlaps, &fp.aux);
    let egen = generalisation_error(ov.m, ov.q, aux.rho, params.tau)?;
    let ebnd = boundary_error(ov.m, ov.q, aux.a, aux.rho, params.tau, params.eps_g)?;
    let ecp = match gamma {
        Some(g) => Some(class_preserving_error(ov, aux, params.tau, params.eps_g, g)?),
        None => None,
    };
    Ok(ErrorReport {
        egen,
        ebnd,
        eadv: egen + ebnd,
        etrain: Some(training_error(ov, aux, params)?),
        ltrain: Some(training_loss(ov, aux, params)?),
        ecp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalisation_reference_values() {
        assert_eq!(generalisation_error(0.0, 1.0, 1.0, 0.3).unwrap(), 0.5);
        let (rho, tau, q) = (2.0, 0.1, 3.0f64);
        let m = ((rho + tau * tau) * q).sqrt();
        assert_eq!(generalisation_error(m, q, rho, tau).unwrap(), 0.0);
        let m = (0.5f64).sqrt() * (rho * q).sqrt();
        assert!((generalisation_error(m, q, rho, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(generalisation_error(2.0 * m, q, rho, 0.0).is_err());
    }

    #[test]
    fn boundary_reference_values() {
        assert_eq!(boundary_error(0.5, 1.0, 1.0, 1.0, 0.05, 0.0).unwrap(), 0.0);
        let b = boundary_error(0.0, 2.0, 0.5, 1.0, 0.05, 0.7).unwrap();
        assert!((b - (ncdf(0.7 * 0.5) - 0.5)).abs() < 1e-13);
        assert!(boundary_error(0.5, 1.0, 1.0, 1.0, 0.05, -0.1).is_err());
    }

    #[test]
    fn owen_t_identities() {
        assert_eq!(owen_t(1.3, 0.0), 0.0);
        for a in [0.1, 0.9, 1.0, 3.0, 1e6] {
            assert!((owen_t(0.0, a) - a.atan() / (2.0 * PI)).abs() < 1e-14, "{a}");
        }
        // trapezoid oracle on a fine grid
        let (h, a) = (1.5_f64, 0.7_f64);
        let n = 200_000;
        let dx = a / n as f64;
        let f = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
        let mut s = 0.5 * (f(0.0) + f(a));
        for i in 1..n {
            s += f(i as f64 * dx);
        }
        let trap = s * dx / (2.0 * PI);
        assert!((owen_t(h, a) - trap).abs() < 1e-10);
        // reflection branch agrees with direct integration
        let direct = integrate1(|x| (-0.5 * 0.64 * (1.0 + x * x)).exp() / (1.0 + x * x), 0.0, 2.5, 1e-14).0 / (2.0 * PI);
        assert!((owen_t(0.8, 2.5) - direct).abs() < 1e-13);
        assert_eq!(owen_t(-0.8, 2.5), owen_t(0.8, 2.5));
        assert_eq!(owen_t(0.8, -2.5), -owen_t(0.8, 2.5));
    }

    #[test]
    fn owen_form_matches_quadrature_and_limits() {
        for &(c, l) in &[(0.3, 0.4), (-0.6, 1.2), (0.98, 0.05), (-0.99, 2.0), (0.0, 0.3)] {
            let a = boundary_error_at(c, l);
            let b = boundary_error_owen_at(c, l);
            assert!((a - b).abs() < 1e-12, "{c} {l}: {a} {b}");
        }
        assert!((boundary_error_owen_at(1e-9, 0.6) - (ncdf(0.6) - 0.5)).abs() < 1e-8);
        assert!(boundary_error_owen_at(0.4, 0.0).abs() < 1e-15);
    }

    #[test]
    fn full_line_integral_is_generalisation_error() {
        // integrating the boundary integrand over the whole half line
        // gives the probability of a correct-sign student
        let c: f64 = 0.55;
        let whole = boundary_error_at(c, 12.0);
        assert!((whole - (1.0 - c.acos() / PI)).abs() < 1e-12);
    }

    #[test]
    fn usefulness_values() {
        let m = BlockFeatureModel::identity();
        assert!((usefulness(&m, 0.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert_eq!(robustness(&m, 0.1, 0.0), usefulness(&m, 0.1));
    }

    #[test]
    fn bounds_on_identity_model() {
        let b = error_bounds(&BlockFeatureModel::identity(), 0.0, 0.2);
        assert!(b.egen_lower.abs() < 1e-7);
        let b = error_bounds(&BlockFeatureModel::identity(), 0.05, 0.0);
        assert!(b.ebnd_upper >= 0.0);
    }
}
