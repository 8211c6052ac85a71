//! Training objectives: a margin loss summed over samples with a shift and
//! a regularizer that depend on `theta` only through `Q = theta' S_delta theta`
//! and `N = theta' theta`.

use super::dataset::Dataset;
use super::linalg::{dot, matvec, matvec_t};
use super::optim::LineObjective;
use crate::channel::{Logistic, MarginLoss};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Worst-case margin shift `eps_t sqrt(Q / d)`.
    Adversarial { eps_t: f64 },
    /// Single-step attack shift `eps_t Q / (sqrt(d) sqrt(N))`.
    Fgm { eps_t: f64 },
    /// No shift; `l1 sqrt(Q) + l2 Q` added to the regularizer.
    Surrogate { l1: f64, l2: f64 },
}

/// Value and first partials in `(Q, N)`.
#[derive(Debug, Clone, Copy, Default)]
struct Part {
    v: f64,
    dq: f64,
    dn: f64,
}

#[derive(Debug, Clone)]
pub struct MarginObjective<'a> {
    data: &'a Dataset,
    penalty: Penalty,
    lambda: f64,
    scale: f64,
    // current point and ray caches
    cur: Vec<f64>,
    z: Vec<f64>,
    zp: Vec<f64>,
    q0: f64,
    n0: f64,
    qb: f64,
    qc: f64,
    nb: f64,
    nc: f64,
}

impl<'a> MarginObjective<'a> {
    pub fn new(data: &'a Dataset, penalty: Penalty, lambda: f64) -> Self {
        MarginObjective {
            data,
            penalty,
            lambda,
            scale: 1.0 / (data.d as f64).sqrt(),
            cur: Vec::new(),
            z: vec![0.0; data.n],
            zp: vec![0.0; data.n],
            q0: 0.0,
            n0: 0.0,
            qb: 0.0,
            qc: 0.0,
            nb: 0.0,
            nc: 0.0,
        }
    }

    fn shift(&self, q: f64, n: f64) -> Part {
        let d = self.data.d as f64;
        match self.penalty {
            Penalty::Adversarial { eps_t } if eps_t > 0.0 => {
                let r = (q / d).sqrt();
                Part { v: eps_t * r, dq: if r > 0.0 { eps_t / (2.0 * d * r) } else { 0.0 }, dn: 0.0 }
            }
            Penalty::Fgm { eps_t } if eps_t > 0.0 => {
                let sn = n.sqrt();
                let c = eps_t / d.sqrt();
                if sn == 0.0 {
                    return Part::default();
                }
                Part { v: c * q / sn, dq: c / sn, dn: -0.5 * c * q / (n * sn) }
            }
            _ => Part::default(),
        }
    }

    fn reg(&self, q: f64, n: f64) -> Part {
        let mut p = Part { v: 0.5 * self.lambda * n, dq: 0.0, dn: 0.5 * self.lambda };
        if let Penalty::Surrogate { l1, l2 } = self.penalty {
            let sq = q.sqrt();
            p.v += l1 * sq + l2 * q;
            p.dq += l2 + if sq > 0.0 { 0.5 * l1 / sq } else { 0.0 };
        }
        p
    }

    fn store_point(&mut self, x: &[f64]) {
        self.cur.clear();
        self.cur.extend_from_slice(x);
    }

    fn quads(&self, theta: &[f64]) -> (f64, f64) {
        let delta = &self.data.spectra.delta;
        let q = theta.iter().zip(delta).map(|(t, w)| w * t * t).sum();
        (q, dot(theta, theta))
    }

    /// Objective and gradient at `theta`, from scratch.
    pub fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut z = vec![0.0; self.data.n];
        matvec(&self.data.x, self.data.d, theta, self.scale, &mut z);
        let (q, n) = self.quads(theta);
        let mut g = vec![0.0; self.data.d];
        let f = self.finish(theta, &z, q, n, &mut g);
        (f, g)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_grad(theta).0
    }

    fn finish(&self, theta: &[f64], z: &[f64], q: f64, n: f64, g: &mut [f64]) -> f64 {
        let s = self.shift(q, n);
        let r = self.reg(q, n);
        let y = &self.data.y;
        let mut w = vec![0.0; self.data.n];
        let mut f = 0.0;
        let mut gsum = 0.0;
        for i in 0..self.data.n {
            let u = y[i] * z[i] - s.v;
            f += Logistic.value(u);
            let d1 = Logistic.d1(u);
            gsum += d1;
            w[i] = y[i] * d1;
        }
        matvec_t(&self.data.x, self.data.d, &w, self.scale, g);
        let cq = 2.0 * (r.dq - gsum * s.dq);
        let cn = 2.0 * (r.dn - gsum * s.dn);
        let delta = &self.data.spectra.delta;
        for j in 0..self.data.d {
            g[j] += (cq * delta[j] + cn) * theta[j];
        }
        f + r.v
    }
}

impl LineObjective for MarginObjective<'_> {
    fn reset(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
        let mut z = std::mem::take(&mut self.z);
        matvec(&self.data.x, self.data.d, x, self.scale, &mut z);
        let (q, n) = self.quads(x);
        self.q0 = q;
        self.n0 = n;
        let f = self.finish(x, &z, q, n, g);
        self.z = z;
        self.store_point(x);
        f
    }

    fn set_direction(&mut self, p: &[f64]) {
        let mut zp = std::mem::take(&mut self.zp);
        matvec(&self.data.x, self.data.d, p, self.scale, &mut zp);
        self.zp = zp;
        let x = &self.cur;
        let delta = &self.data.spectra.delta;
        let (mut qb, mut qc) = (0.0, 0.0);
        for j in 0..self.data.d {
            qb += delta[j] * x[j] * p[j];
            qc += delta[j] * p[j] * p[j];
        }
        self.qb = qb;
        self.qc = qc;
        self.nb = dot(x, p);
        self.nc = dot(p, p);
    }

    fn along(&self, t: f64) -> (f64, f64) {
        let q = self.q0 + 2.0 * t * self.qb + t * t * self.qc;
        let n = self.n0 + 2.0 * t * self.nb + t * t * self.nc;
        let dq = 2.0 * (self.qb + t * self.qc);
        let dn = 2.0 * (self.nb + t * self.nc);
        let s = self.shift(q, n);
        let r = self.reg(q, n);
        let ds = s.dq * dq + s.dn * dn;
        let y = &self.data.y;
        let (mut f, mut g) = (r.v, r.dq * dq + r.dn * dn);
        for ((yi, zi), zpi) in y.iter().zip(&self.z).zip(&self.zp) {
            let u = yi * (zi + t * zpi) - s.v;
            f += Logistic.value(u);
            g += Logistic.d1(u) * (yi * zpi - ds);
        }
        (f, g)
    }

    fn advance(&mut self, t: f64, x_new: &[f64], g: &mut [f64]) -> f64 {
        for (z, zp) in self.z.iter_mut().zip(&self.zp) {
            *z += t * zp;
        }
        let (q, n) = self.quads(x_new);
        self.q0 = q;
        self.n0 = n;
        let z = std::mem::take(&mut self.z);
        let f = self.finish(x_new, &z, q, n, g);
        self.z = z;
        self.store_point(x_new);
        f
    }
}
