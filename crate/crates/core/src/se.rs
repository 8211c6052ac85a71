//! Fixed-point solver for the overlap equations.

use serde::{Deserialize, Serialize};

use crate::bfm::BlockFeatureModel;
use crate::channel::{dz0_raw, prox_with, z0_raw, Logistic, MarginLoss};
use crate::error::{domain, Error, Result};
use crate::params::ExperimentParams;
use crate::quad::integrate;
use crate::special::npdf;

/// Floor applied to `P` under square roots.
pub const P_FLOOR: f64 = 1e-12;

/// Half-width of the truncated Gaussian integration range.
const XI_MAX: f64 = 10.0;
const MAX_PANELS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlaps {
    pub m: f64,
    pub q: f64,
    pub v: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateOverlaps {
    pub m_hat: f64,
    pub q_hat: f64,
    pub v_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxOverlaps {
    pub a: f64,
    pub f: f64,
    pub n: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Absolute tolerance of the adaptive Gaussian expectations.
    pub quad_tol: f64,
    pub init: Overlaps,
    /// Damping halvings attempted after a failed solve.
    pub retries: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 0.7,
            tol: 1e-8,
            max_iter: 10_000,
            quad_tol: 1e-11,
            init: Overlaps { m: 0.1, q: 1.0, v: 1.0, p: 1.0 },
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub overlaps: Overlaps,
    pub hats: ConjugateOverlaps,
    pub aux: AuxOverlaps,
    pub iterations: usize,
    pub residual: f64,
}

/// Joint law of teacher field and student proxy used by every channel-side
/// expectation: the student field is `sqrt(q) xi`, the teacher field given
/// `xi` is Gaussian with mean `(m / sqrt q) xi` and variance `rho - m^2/q`
/// plus the label noise `tau^2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalFields {
    pub m: f64,
    pub q: f64,
    pub rho: f64,
    pub tau: f64,
}

impl LocalFields {
    fn mean_coef(&self) -> f64 {
        self.m / self.q.sqrt()
    }

    fn var(&self) -> f64 {
        (self.rho - self.m * self.m / self.q).max(0.0) + self.tau * self.tau
    }

    /// `E_xi sum_y h(y, xi, sqrt(q) xi, Z0, dZ0)`, integrated adaptively.
    /// `marks` lists extra student-field locations where `h` changes fast.
    pub fn expect<const N: usize>(
        &self,
        marks: &[f64],
        tol: f64,
        mut h: impl FnMut(f64, f64, f64, f64, f64) -> [f64; N],
    ) -> Result<[f64; N]> {
        let sq = self.q.sqrt();
        let mc = self.mean_coef();
        let var = self.var();
        if !(var > 0.0) {
            return domain("teacher field has zero conditional variance (tau = 0 and perfect alignment)");
        }
        let mut pts = vec![-XI_MAX, 0.0, XI_MAX];
        if mc != 0.0 {
            let w = var.sqrt() / mc.abs();
            for k in [0.5, 2.0, 6.0] {
                if k * w < XI_MAX {
                    pts.push(k * w);
                    pts.push(-k * w);
                }
            }
        }
        for &mk in marks {
            let xi = mk / sq;
            if xi.is_finite() && xi.abs() < XI_MAX {
                pts.push(xi);
                pts.push(-xi);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut failure = None;
        let out = integrate(
            |xi| {
                let w = npdf(xi);
                let mut acc = [0.0; N];
                if w == 0.0 || failure.is_some() {
                    return acc;
                }
                let mu = mc * xi;
                for y in [1.0, -1.0] {
                    let z = z0_raw(y, mu, var);
                    let dz = dz0_raw(y, mu, var);
                    let v = h(y, xi, sq * xi, z, dz);
                    for i in 0..N {
                        acc[i] += w * v[i];
                    }
                }
                if acc.iter().any(|a| !a.is_finite()) {
                    failure = Some(format!("non-finite integrand at xi={xi}"));
                }
                acc
            },
            &pts,
            tol,
            MAX_PANELS,
        );
        if let Some(msg) = failure {
            return Err(Error::Numerical(msg));
        }
        Ok(out.value)
    }
}

fn check_overlaps(ov: &Overlaps) -> Result<()> {
    if !(ov.q > 0.0 && ov.q.is_finite()) {
        return domain(format!("q must be positive, got {}", ov.q));
    }
    if !(ov.v > 0.0 && ov.v.is_finite()) {
        return domain(format!("V must be positive, got {}", ov.v));
    }
    if !(ov.p >= 0.0) || !ov.m.is_finite() {
        return domain("P must be nonnegative and m finite");
    }
    Ok(())
}

/// Channel half of the iteration with the default quadrature tolerance.
pub fn channel_update(ov: Overlaps, params: &ExperimentParams, model: &BlockFeatureModel) -> Result<ConjugateOverlaps> {
    channel_update_with(ov, params, model.rho(), SolverConfig::default().quad_tol)
}

pub fn channel_update_with(ov: Overlaps, params: &ExperimentParams, rho: f64, tol: f64) -> Result<ConjugateOverlaps> {
    check_overlaps(&ov)?;
    let sqrt_p = ov.p.max(P_FLOOR).sqrt();
    let s = if params.eps_t == 0.0 { 0.0 } else { params.eps_t * sqrt_p };
    let fields = LocalFields { m: ov.m, q: ov.q, rho, tau: params.tau };
    let v = ov.v;
    let mut err = None;
    let [mh, qh, vh, ph] = fields.expect(&[s, s - v], tol, |y, _xi, omega, z, dz| {
        match prox_with(&Logistic, omega, v, y, s) {
            Ok(pp) => {
                let force = -Logistic.d1(pp.margin);
                let f = y * force;
                let df = pp.dforce(v);
                [dz * f, z * f * f, -z * df, z * force]
            }
            Err(e) => {
                err.get_or_insert(e);
                [0.0; 4]
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let a = params.alpha;
    Ok(ConjugateOverlaps {
        m_hat: a * mh,
        q_hat: a * qh,
        v_hat: a * vh,
        p_hat: if params.eps_t == 0.0 { 0.0 } else { params.eps_t / sqrt_p * a * ph },
    })
}

struct BlockSums {
    m: f64,
    q: f64,
    v: f64,
    p: f64,
    a: f64,
    f: f64,
    n: f64,
}

fn block_sums(hat: &ConjugateOverlaps, lambda: f64, model: &BlockFeatureModel) -> Result<BlockSums> {
    let mut s = BlockSums { m: 0.0, q: 0.0, v: 0.0, p: 0.0, a: 0.0, f: 0.0, n: 0.0 };
    let (mh, qh) = (hat.m_hat, hat.q_hat);
    for b in model.blocks() {
        let d = lambda + hat.v_hat * b.psi + hat.p_hat * b.delta;
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("nonpositive prior denominator {d}")));
        }
        let d2 = d * d;
        // second moment of the estimator along this block, per unit psi
        let e = (mh * mh * b.psi * b.psi * b.t + qh * b.psi) / d2;
        s.m += b.phi * mh * b.psi * b.psi * b.t / d;
        s.q += b.phi * b.psi * e;
        s.v += b.phi * b.psi / d;
        s.p += b.phi * b.delta * e;
        s.a += b.phi * b.upsilon * e;
        s.f += b.phi * mh * b.psi * b.upsilon * b.t / d;
        s.n += b.phi * e;
    }
    Ok(s)
}

/// Prior half of the iteration.
pub fn prior_update(hat: &ConjugateOverlaps, lambda: f64, model: &BlockFeatureModel) -> Result<Overlaps> {
    let s = block_sums(hat, lambda, model)?;
    Ok(Overlaps { m: s.m, q: s.q, v: s.v, p: s.p })
}

pub fn aux_overlaps(hat: &ConjugateOverlaps, lambda: f64, model: &BlockFeatureModel) -> Result<AuxOverlaps> {
    let s = block_sums(hat, lambda, model)?;
    Ok(AuxOverlaps { a: s.a, f: s.f, n: s.n, rho: model.rho() })
}

fn max_abs_diff(a: &Overlaps, b: &Overlaps) -> f64 {
    (a.m - b.m)
        .abs()
        .max((a.q - b.q).abs())
        .max((a.v - b.v).abs())
        .max((a.p - b.p).abs())
}

fn mix(old: &Overlaps, new: &Overlaps, eta: f64) -> Overlaps {
    let c = |o: f64, n: f64| (1.0 - eta) * o + eta * n;
    Overlaps { m: c(old.m, new.m), q: c(old.q, new.q), v: c(old.v, new.v), p: c(old.p, new.p) }
}

fn iterate(params: &ExperimentParams, model: &BlockFeatureModel, cfg: &SolverConfig, eta: f64) -> Result<FixedPoint> {
    let rho = model.rho();
    let mut x = cfg.init;
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let hats = channel_update_with(x, params, rho, cfg.quad_tol)?;
        let t = prior_update(&hats, params.lambda, model)?;
        residual = max_abs_diff(&t, &x);
        if !residual.is_finite() {
            return Err(Error::Numerical("non-finite overlap update".into()));
        }
        if residual < cfg.tol {
            let hats = channel_update_with(t, params, rho, cfg.quad_tol)?;
            let aux = aux_overlaps(&hats, params.lambda, model)?;
            return Ok(FixedPoint { overlaps: t, hats, aux, iterations: it, residual });
        }
        x = mix(&x, &t, eta);
    }
    Err(Error::Convergence { iterations: cfg.max_iter, residual })
}

/// Damped iteration of the channel and prior maps from `cfg.init`. On failure
/// the damping is halved up to `cfg.retries` times.
pub fn solve_fixed_point(params: &ExperimentParams, model: &BlockFeatureModel, cfg: &SolverConfig) -> Result<FixedPoint> {
    params.validate()?;
    if !(params.lambda > 0.0) {
        return domain("lambda must be positive");
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return domain(format!("damping must lie in (0, 1], got {}", cfg.damping));
    }
    let mut eta = cfg.damping;
    let mut last = None;
    for _ in 0..=cfg.retries {
        match iterate(params, model, cfg, eta) {
            Ok(fp) => return Ok(fp),
            Err(e) => last = Some(e),
        }
        eta *= 0.5;
    }
    Err(last.expect("at least one attempt"))
}

/// Applies one undamped update to `ov` and reports the max-abs change.
pub fn fixed_point_residual(ov: &Overlaps, params: &ExperimentParams, model: &BlockFeatureModel, quad_tol: f64) -> Result<f64> {
    let hats = channel_update_with(*ov, params, model.rho(), quad_tol)?;
    let t = prior_update(&hats, params.lambda, model)?;
    Ok(max_abs_diff(&t, ov))
}
