//! Message passing for the adversarial risk.
//!
//! Output nodes solve the shifted-loss prox with per-sample variances; input
//! nodes apply a ridge whose strength on each coordinate is
//! `lambda + p_hat * delta_j`, where `p_hat` tracks the running defence
//! strength. At a fixed point the weights satisfy the first-order condition
//! of the risk minimized by [`super::erm_train`].

use super::dataset::Dataset;
use super::linalg::{matvec, matvec_t, norm};
use super::train::{initial_weights, Estimator, Method};
use crate::channel::{prox_with, Logistic};
use crate::error::{domain, Error, Result};
use crate::se::P_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampConfig {
    /// Weight on the new iterate for `theta` and `s`; 1 disables damping.
    pub damping: f64,
    /// Stop when `|theta_new - theta| / |theta|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight norm treated as divergence.
    pub blowup: f64,
}

impl Default for GampConfig {
    fn default() -> Self {
        GampConfig { damping: 0.5, tol: 1e-7, max_iter: 5000, blowup: 1e6 }
    }
}

/// `theta' S_delta theta / d`.
pub fn defence_overlap(theta: &[f64], delta: &[f64]) -> f64 {
    theta.iter().zip(delta).map(|(t, w)| w * t * t).sum::<f64>() / theta.len() as f64
}

pub fn advgamp_train(data: &Dataset, lambda: f64, eps_t: f64, cfg: &GampConfig) -> Result<Estimator> {
    if !(lambda >= 0.0 && eps_t >= 0.0) || (lambda == 0.0 && eps_t == 0.0) {
        return domain("need lambda >= 0, eps_t >= 0 and not both zero");
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return domain("damping must lie in (0, 1]");
    }
    let (n, d) = (data.n, data.d);
    let scale = 1.0 / (d as f64).sqrt();
    let sq: Vec<f64> = data.x.iter().map(|v| v * v / d as f64).collect();
    let delta = &data.spectra.delta;
    let y = &data.y;

    let mut theta = initial_weights(data);
    let mut tau_x = vec![1.0; d];
    let mut s = vec![0.0; n];
    let mut tau_p = vec![0.0; n];
    let mut omega = vec![0.0; n];
    let mut s_new = vec![0.0; n];
    let mut tau_s = vec![0.0; n];
    let mut tau_r = vec![0.0; d];
    let mut r = vec![0.0; d];
    let mut theta_new = vec![0.0; d];
    let beta = cfg.damping;

    for it in 1..=cfg.max_iter {
        // output nodes
        matvec(&sq, d, &tau_x, 1.0, &mut tau_p);
        matvec(&data.x, d, &theta, scale, &mut omega);
        for i in 0..n {
            omega[i] -= tau_p[i] * s[i];
        }
        let p = defence_overlap(&theta, delta);
        let sqrt_p = p.max(P_FLOOR).sqrt();
        let shift = eps_t * sqrt_p;
        let mut ys = 0.0;
        for i in 0..n {
            let pp = prox_with(&Logistic, omega[i], tau_p[i], y[i], shift)?;
            s_new[i] = (pp.x - omega[i]) / tau_p[i];
            tau_s[i] = -pp.dforce(tau_p[i]);
            ys += y[i] * s_new[i];
        }
        for i in 0..n {
            s[i] = beta * s_new[i] + (1.0 - beta) * s[i];
        }
        let p_hat = if eps_t == 0.0 { 0.0 } else { eps_t / sqrt_p * ys / d as f64 };

        // input nodes
        matvec_t(&sq, d, &tau_s, 1.0, &mut tau_r);
        for v in tau_r.iter_mut() {
            *v = 1.0 / *v;
        }
        matvec_t(&data.x, d, &s, scale, &mut r);
        for j in 0..d {
            r[j] = theta[j] + tau_r[j] * r[j];
            let shrink = 1.0 / (1.0 + tau_r[j] * (lambda + p_hat * delta[j]));
            theta_new[j] = r[j] * shrink;
            tau_x[j] = tau_r[j] * shrink;
        }
        let mut change = 0.0;
        for j in 0..d {
            let t = beta * theta_new[j] + (1.0 - beta) * theta[j];
            change += (t - theta[j]).powi(2);
            theta[j] = t;
        }
        let nt = norm(&theta);
        if !nt.is_finite() || nt > cfg.blowup {
            return Err(Error::Instability { norm: nt });
        }
        let rel = change.sqrt() / nt.max(1e-300);
        if rel < cfg.tol {
            return Ok(Estimator { weights: theta, method: Method::Gamp, iterations: it, residual: rel });
        }
    }
    Err(Error::Convergence { iterations: cfg.max_iter, residual: f64::NAN })
}
