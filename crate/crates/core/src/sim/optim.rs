//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use super::linalg::{axpy, dot, norm};
use crate::error::{Error, Result};

/// A smooth objective that can evaluate cheaply along a fixed direction.
///
/// The objective tracks a current point. `set_direction` prepares a ray from
/// it, `along` evaluates value and slope on the ray, and `advance` moves the
/// current point and returns the full gradient there.
pub trait LineObjective {
    fn reset(&mut self, x: &[f64], g: &mut [f64]) -> f64;
    fn set_direction(&mut self, p: &[f64]);
    fn along(&self, t: f64) -> (f64, f64);
    fn advance(&mut self, t: f64, x_new: &[f64], g: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong Wolfe search (bracketing then zoom with cubic steps). Returns the
/// accepted step.
fn wolfe<O: LineObjective>(obj: &O, f0: f64, g0: f64, t_init: f64) -> Option<f64> {
    // tolerate rounding in the sufficient-decrease test near the optimum
    let slack = 1e-13 * (1.0 + f0.abs());
    let armijo = |t: f64, f: f64| f <= f0 + C1 * t * g0 + slack;
    let (mut t_prev, mut f_prev, mut g_prev) = (0.0, f0, g0);
    let mut t = t_init;
    for i in 0..40 {
        let (f, g) = obj.along(t);
        if !f.is_finite() {
            t = 0.5 * (t_prev + t);
            continue;
        }
        if !armijo(t, f) || (i > 0 && f >= f_prev) {
            return zoom(obj, f0, g0, slack, (t_prev, f_prev, g_prev), (t, f, g));
        }
        if g.abs() <= -C2 * g0 {
            return Some(t);
        }
        if g >= 0.0 {
            return zoom(obj, f0, g0, slack, (t, f, g), (t_prev, f_prev, g_prev));
        }
        t_prev = t;
        f_prev = f;
        g_prev = g;
        t *= 2.0;
    }
    None
}

fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (ta, fa, ga) = a;
    let (tb, fb, gb) = b;
    let d1 = ga + gb - 3.0 * (fa - fb) / (ta - tb);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return None;
    }
    let d2 = disc.sqrt().copysign(tb - ta);
    let t = tb - (tb - ta) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    t.is_finite().then_some(t)
}

fn zoom<O: LineObjective>(
    obj: &O,
    f0: f64,
    g0: f64,
    slack: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<f64> {
    for _ in 0..40 {
        let (a, b) = (lo.0.min(hi.0), lo.0.max(hi.0));
        let width = b - a;
        if width <= 1e-16 * b.abs().max(1e-300) {
            break;
        }
        let mut t = cubic_min(lo, hi).unwrap_or(0.5 * (a + b));
        if !(t > a + 0.1 * width && t < b - 0.1 * width) {
            t = 0.5 * (a + b);
        }
        let (f, g) = obj.along(t);
        if !f.is_finite() || f > f0 + C1 * t * g0 + slack || f >= lo.1 {
            hi = (t, f, g);
        } else {
            if g.abs() <= -C2 * g0 {
                return Some(t);
            }
            if g * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (t, f, g);
        }
    }
    // accept the best sufficient-decrease point found, if any
    (lo.0 > 0.0).then_some(lo.0)
}

pub fn lbfgs<O: LineObjective>(obj: &mut O, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.reset(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut p = vec![0.0; n];
    let mut alpha = vec![0.0; cfg.memory];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stalls = 0;
    for it in 0..=cfg.max_iter {
        let gn = norm(&g);
        if !gn.is_finite() || !f.is_finite() {
            return Err(Error::Trainer { iterations: it, grad_norm: gn, reason: "non-finite objective".into() });
        }
        if gn < cfg.grad_tol * norm(&x).max(1.0) {
            return Ok(LbfgsResult { x, value: f, iterations: it, grad_norm: gn });
        }
        if it == cfg.max_iter {
            return Err(Error::Trainer { iterations: it, grad_norm: gn, reason: "iteration budget exhausted".into() });
        }
        // periodic refresh bounds drift of cached products
        if it > 0 && it % 200 == 0 {
            f = obj.reset(&x, &mut g);
        }
        // two-loop recursion
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
        for (k, (s, y, r)) in hist.iter().enumerate().rev() {
            alpha[k] = r * dot(s, &p);
            axpy(-alpha[k], y, &mut p);
        }
        let t_init = if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            p.iter_mut().for_each(|v| *v *= gamma);
            1.0
        } else {
            (1.0 / gn).min(1.0)
        };
        for (k, (s, y, r)) in hist.iter().enumerate() {
            let beta = r * dot(y, &p);
            axpy(alpha[k] - beta, s, &mut p);
        }
        let mut slope = dot(&g, &p);
        let mut t_init = t_init;
        if !(slope < 0.0) {
            hist.clear();
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
            slope = -gn * gn;
            t_init = (1.0 / gn).min(1.0);
        }
        obj.set_direction(&p);
        let step = match wolfe(obj, f, slope, t_init) {
            Some(t) => t,
            None if !hist.is_empty() => {
                hist.clear();
                stalls += 1;
                if stalls > 5 {
                    return Err(Error::Trainer { iterations: it, grad_norm: gn, reason: "line search failed".into() });
                }
                continue;
            }
            None => {
                return Err(Error::Trainer { iterations: it, grad_norm: gn, reason: "line search failed".into() });
            }
        };
        for i in 0..n {
            x_new[i] = x[i] + step * p[i];
        }
        let f_new = obj.advance(step, &x_new, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
    }
    unreachable!()
}
