//! Probit teacher channel and the proximal map of the margin-shifted loss.

use crate::error::{domain, Error, Result};
use crate::special::{erfc, log1p_exp, sigmoid, INV_SQRT_2PI, SQRT_2};

/// Label noise model `P(y | z) = Phi(y z / tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbitChannel {
    pub tau: f64,
}

impl ProbitChannel {
    pub fn new(tau: f64) -> Self {
        ProbitChannel { tau }
    }
}

/// Convex, nonincreasing margin loss with two derivatives.
pub trait MarginLoss: Sync {
    fn value(&self, u: f64) -> f64;
    /// First derivative, nonpositive.
    fn d1(&self, u: f64) -> f64;
    /// Second derivative, nonnegative.
    fn d2(&self, u: f64) -> f64;
    /// Upper bound on `-d1`.
    fn max_slope(&self) -> f64;
}

/// `g(u) = ln(1 + e^{-u})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl MarginLoss for Logistic {
    #[inline]
    fn value(&self, u: f64) -> f64 {
        log1p_exp(-u)
    }
    #[inline]
    fn d1(&self, u: f64) -> f64 {
        -sigmoid(-u)
    }
    #[inline]
    fn d2(&self, u: f64) -> f64 {
        sigmoid(u) * sigmoid(-u)
    }
    fn max_slope(&self) -> f64 {
        1.0
    }
}

#[inline]
pub(crate) fn z0_raw(y: f64, omega: f64, var: f64) -> f64 {
    0.5 * erfc(-y * omega / (SQRT_2 * var.sqrt()))
}

#[inline]
pub(crate) fn dz0_raw(y: f64, omega: f64, var: f64) -> f64 {
    y * (-omega * omega / (2.0 * var)).exp() * INV_SQRT_2PI / var.sqrt()
}

fn check_v(v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("V must be positive, got {v}"));
    }
    Ok(())
}

/// Probability of label `y` when the teacher field is Gaussian with mean
/// `omega` and variance `v`.
pub fn z0(y: f64, omega: f64, v: f64, ch: ProbitChannel) -> Result<f64> {
    check_v(v)?;
    Ok(z0_raw(y, omega, v + ch.tau * ch.tau))
}

pub fn dz0_domega(y: f64, omega: f64, v: f64, ch: ProbitChannel) -> Result<f64> {
    check_v(v)?;
    Ok(dz0_raw(y, omega, v + ch.tau * ch.tau))
}

/// Proximal point together with its derivative in `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxPoint {
    pub x: f64,
    /// `dx/d omega = 1 / (1 + V g''(y x - s))`.
    pub dx: f64,
    /// Margin `y x - s` at the solution.
    pub margin: f64,
    /// Loss curvature `g''` at the margin.
    pub curv: f64,
}

impl ProxPoint {
    /// `d fg / d omega = (dx - 1) / V`, written without the cancellation.
    #[inline]
    pub fn dforce(&self, v: f64) -> f64 {
        -self.curv / (1.0 + v * self.curv)
    }
}

const PROX_MAX_ITER: usize = 100;

/// Minimizes `(x - omega)^2 / (2V) + g(y x - s)` over `x`.
///
/// Works in the margin variable `u = y x - s`, where stationarity reads
/// `u + V g'(u) = c` with `c = y omega - s`. The left side is increasing and
/// the root lies in `[c, c + V max|g'|]`.
pub fn prox_with<L: MarginLoss>(loss: &L, omega: f64, v: f64, y: f64, s: f64) -> Result<ProxPoint> {
    let c = y * omega - s;
    let resid = |u: f64| u + v * loss.d1(u) - c;
    let tol = 1e-12 * c.abs().max(1.0);
    let (mut lo, mut hi) = (c, c + v * loss.max_slope());
    let mut u = c - v * loss.d1(c);
    if !(u > lo && u < hi) {
        u = 0.5 * (lo + hi);
    }
    let mut r = resid(u);
    let mut it = 0;
    let mut stalled = false;
    while r.abs() > tol {
        if it == PROX_MAX_ITER {
            return Err(Error::Numerical(format!(
                "prox did not converge: omega={omega}, V={v}, y={y}, s={s}, residual={r:e}"
            )));
        }
        it += 1;
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let step = r / (1.0 + v * loss.d2(u));
        let mut next = u - step;
        // Newton can cycle where the residual changes convexity
        if !(next > lo && next < hi) || stalled {
            next = 0.5 * (lo + hi);
        }
        if next == u {
            break;
        }
        u = next;
        let prev = r.abs();
        r = resid(u);
        stalled = r.abs() > 0.5 * prev;
    }
    let curv = loss.d2(u);
    Ok(ProxPoint { x: y * (u + s), dx: 1.0 / (1.0 + v * curv), margin: u, curv })
}

/// Proximal point of the logistic loss with margin shift `s`.
pub fn prox_shifted_logistic(omega: f64, v: f64, y: f64, s: f64) -> Result<f64> {
    check_v(v)?;
    if !(s >= 0.0) {
        return domain(format!("shift must be nonnegative, got {s}"));
    }
    Ok(prox_with(&Logistic, omega, v, y, s)?.x)
}

/// Moreau envelope value at `omega`.
pub fn moreau_envelope(omega: f64, v: f64, y: f64, s: f64) -> Result<f64> {
    check_v(v)?;
    let p = prox_with(&Logistic, omega, v, y, s)?;
    Ok((p.x - omega).powi(2) / (2.0 * v) + Logistic.value(p.margin))
}

#[inline]
fn shift(p: f64, eps_t: f64) -> f64 {
    if eps_t == 0.0 {
        0.0
    } else {
        eps_t * p.max(crate::se::P_FLOOR).sqrt()
    }
}

/// Channel force `(prox - omega) / V`. Since `y fg = -g'`, it always has the
/// sign of `y`.
pub fn fg(y: f64, omega: f64, v: f64, p: f64, eps_t: f64) -> Result<f64> {
    check_v(v)?;
    let pp = prox_with(&Logistic, omega, v, y, shift(p, eps_t))?;
    Ok(y * -Logistic.d1(pp.margin))
}

pub fn dfg_domega(y: f64, omega: f64, v: f64, p: f64, eps_t: f64) -> Result<f64> {
    check_v(v)?;
    let pp = prox_with(&Logistic, omega, v, y, shift(p, eps_t))?;
    Ok(pp.dforce(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn z0_reference_values() {
        let ch = ProbitChannel::new(0.0);
        assert_eq!(z0(1.0, 0.0, 2.3, ch).unwrap(), 0.5);
        assert!(z0(-1.0, 60.0, 1.0, ch).unwrap() < 1e-300);
        assert!((z0(1.0, 1.0, 1.0, ch).unwrap() - 0.841_344_746_068_543).abs() < 1e-12);
        assert!(z0(1.0, 0.0, 0.0, ch).is_err());
    }

    #[test]
    fn dz0_reference_and_finite_difference() {
        let ch = ProbitChannel::new(0.0);
        assert!((dz0_domega(1.0, 0.0, 1.0, ch).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(dz0_domega(-1.0, 0.4, 1.0, ch).unwrap(), -dz0_domega(1.0, 0.4, 1.0, ch).unwrap());
        let ch = ProbitChannel::new(0.05);
        let h = 1e-5;
        let fd = (z0(1.0, 0.7 + h, 0.3, ch).unwrap() - z0(1.0, 0.7 - h, 0.3, ch).unwrap()) / (2.0 * h);
        assert!((fd - dz0_domega(1.0, 0.7, 0.3, ch).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn prox_limits() {
        assert!((prox_shifted_logistic(0.37, 1e-14, 1.0, 0.0).unwrap() - 0.37).abs() < 1e-10);
        assert!((prox_shifted_logistic(50.0, 1.0, 1.0, 0.0).unwrap() - 50.0).abs() < 1e-10);
    }

    #[test]
    fn prox_matches_golden_section() {
        let x = prox_shifted_logistic(0.0, 1.0, 1.0, 0.0).unwrap();
        let g = golden_min(|x| x * x / 2.0 + log1p_exp(-x), -5.0, 5.0);
        assert!((x - g).abs() < 1e-8, "{x} {g}");
    }

    #[test]
    fn prox_stationarity_residual() {
        for &(w, v, y, s) in &[(0.3, 0.8, 1.0, 0.2), (-4.0, 7.0, -1.0, 1.3), (1e3, 1e4, 1.0, 0.0), (-30.0, 0.01, 1.0, 5.0)] {
            let x = prox_shifted_logistic(w, v, y, s).unwrap();
            let r = x - w - y * v * sigmoid(-(y * x - s));
            assert!(r.abs() < 1e-12 * w.abs().max(1.0), "{r}");
        }
    }

    #[test]
    fn prox_converges_on_grid() {
        for i in 0..41 {
            let w = -20.0 + i as f64;
            for &v in &[1e-6, 0.1, 1.0, 4.0, 11.6, 50.0, 1e3] {
                for &s in &[0.0, 0.3, 0.83, 3.0] {
                    for &y in &[-1.0, 1.0] {
                        let x = prox_shifted_logistic(w, v, y, s).unwrap();
                        let r = x - w - y * v * sigmoid(-(y * x - s));
                        assert!(r.abs() < 1e-11 * (w.abs() + s).max(1.0), "{w} {v} {s} {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn moreau_shift_property() {
        for &(w, v, y, s) in &[(0.3, 0.8, 1.0, 0.2), (-1.0, 2.0, -1.0, 0.7)] {
            let a = moreau_envelope(w, v, y, s).unwrap();
            let b = moreau_envelope(w - y * s, v, y, 0.0).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fg_examples() {
        assert!(fg(1.0, 50.0, 1.0, 1.0, 0.0).unwrap().abs() < 1e-9);
        let a = fg(-1.0, -0.4, 0.7, 1.0, 0.3).unwrap();
        let b = fg(1.0, 0.4, 0.7, 1.0, 0.3).unwrap();
        assert!((a + b).abs() < 1e-15);
        // y=+1, omega=0, V=1, P=1, eps_t=0.2
        let x = prox_shifted_logistic(0.0, 1.0, 1.0, 0.2).unwrap();
        let f = fg(1.0, 0.0, 1.0, 1.0, 0.2).unwrap();
        assert!((f - (-Logistic.d1(x - 0.2))).abs() < 1e-10);
        assert!((f - (x - 0.0) / 1.0).abs() < 1e-10);
    }

    #[test]
    fn dfg_examples() {
        assert!(dfg_domega(1.0, 50.0, 1.0, 1.0, 0.0).unwrap().abs() < 1e-9);
        // vanishing V: the force derivative tends to -g'' at the unshifted margin
        let lim = -Logistic.d2(0.2);
        assert!((dfg_domega(1.0, 0.2, 1e-14, 1.0, 0.0).unwrap() - lim).abs() < 1e-6);
        let h = 1e-5;
        let fd = (fg(1.0, 0.3 + h, 0.8, 1.0, 0.2).unwrap() - fg(1.0, 0.3 - h, 0.8, 1.0, 0.2).unwrap()) / (2.0 * h);
        let an = dfg_domega(1.0, 0.3, 0.8, 1.0, 0.2).unwrap();
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{fd} {an}");
    }
}
