use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::objective::{MarginObjective, Penalty};
use super::optim::{lbfgs, LbfgsConfig};
use crate::error::{domain, Result};
use crate::exec::counter_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Erm,
    Gamp,
    Fgm,
    Surrogate,
}

impl Method {
    pub fn tag(self) -> u64 {
        match self {
            Method::Erm => 1,
            Method::Gamp => 2,
            Method::Fgm => 3,
            Method::Surrogate => 4,
        }
    }

    pub fn from_tag(tag: u64) -> Option<Self> {
        match tag {
            1 => Some(Method::Erm),
            2 => Some(Method::Gamp),
            3 => Some(Method::Fgm),
            4 => Some(Method::Surrogate),
            _ => None,
        }
    }
}

/// A trained weight vector and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub weights: Vec<f64>,
    pub method: Method,
    pub iterations: usize,
    /// Final gradient norm for descent trainers, relative weight change for
    /// message passing.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerConfig {
    /// Stop once `|grad| < grad_tol * max(1, |theta|)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig { grad_tol: 1e-6, max_iter: 20_000, memory: 10 }
    }
}

/// `theta0 ~ N(0, I/d)`, seeded from the dataset. Keeps the square-root
/// penalty away from its kink at the origin.
pub fn initial_weights(data: &Dataset) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(counter_seed(data.seed, 0x1417));
    let s = 1.0 / (data.d as f64).sqrt();
    (0..data.d)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            s * g
        })
        .collect()
}

fn minimize(data: &Dataset, penalty: Penalty, lambda: f64, method: Method, cfg: &TrainerConfig) -> Result<Estimator> {
    let mut obj = MarginObjective::new(data, penalty, lambda);
    let lc = LbfgsConfig { memory: cfg.memory, grad_tol: cfg.grad_tol, max_iter: cfg.max_iter };
    let x0 = initial_weights(data);
    let r = match lbfgs(&mut obj, &x0, &lc) {
        Ok(r) => r,
        Err(first) => {
            // one retry from a smaller start with a fresh memory
            let x1: Vec<f64> = x0.iter().map(|v| 0.1 * v).collect();
            lbfgs(&mut obj, &x1, &lc).map_err(|_| first)?
        }
    };
    Ok(Estimator { weights: r.x, method, iterations: r.iterations, residual: r.grad_norm })
}

fn check(lambda: f64, eps_t: f64) -> Result<()> {
    if !(lambda >= 0.0) || !(eps_t >= 0.0) {
        return domain("lambda and eps_t must be nonnegative");
    }
    if lambda == 0.0 && eps_t == 0.0 {
        return domain("need lambda > 0 or eps_t > 0");
    }
    Ok(())
}

/// Minimizes `sum_i g(y_i theta'x_i / sqrt d - eps_t sqrt(theta' S_delta theta / d)) + lambda/2 |theta|^2`.
pub fn erm_train(data: &Dataset, lambda: f64, eps_t: f64, cfg: &TrainerConfig) -> Result<Estimator> {
    check(lambda, eps_t)?;
    minimize(data, Penalty::Adversarial { eps_t }, lambda, Method::Erm, cfg)
}

/// Same loss with the single-step attack shift `eps_t theta' S_delta theta / (sqrt d |theta|)`.
pub fn fgm_train(data: &Dataset, lambda: f64, eps_t: f64, cfg: &TrainerConfig) -> Result<Estimator> {
    check(lambda, eps_t)?;
    minimize(data, Penalty::Fgm { eps_t }, lambda, Method::Fgm, cfg)
}

/// Plain logistic loss with `l1 sqrt(theta' S_delta theta) + l2 theta' S_delta theta`
/// plus an optional ridge `lambda/2 |theta|^2`.
pub fn surrogate_train(data: &Dataset, lambda: f64, l1: f64, l2: f64, cfg: &TrainerConfig) -> Result<Estimator> {
    if !(l1 >= 0.0 && l2 >= 0.0 && lambda >= 0.0) {
        return domain("surrogate weights must be nonnegative");
    }
    if lambda == 0.0 && l2 == 0.0 && l1 == 0.0 {
        return domain("surrogate needs some regularization");
    }
    minimize(data, Penalty::Surrogate { l1, l2 }, lambda, Method::Surrogate, cfg)
}
