//! Finite-size estimates of overlaps and errors for a trained estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::linalg::{dot, matvec, wdot};
use super::train::Estimator;
use crate::channel::{Logistic, MarginLoss};
use crate::error::{domain, Result};
use crate::exec::{counter_seed, map_indexed};
use crate::metrics::ErrorReport;
use crate::params::ExperimentParams;

/// Block-diagonal quadratic forms of the teacher and the estimate, each
/// divided by `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOverlaps {
    /// `theta0' S_x theta / d`.
    pub m: f64,
    /// `theta' S_x theta / d`.
    pub q: f64,
    /// `theta' S_delta theta / d`.
    pub p: f64,
    /// `theta' S_upsilon theta / d`.
    pub a: f64,
    /// `theta0' S_upsilon theta / d`.
    pub f: f64,
    /// `theta' theta / d`.
    pub n: f64,
    /// `theta0' S_x theta0 / d`.
    pub rho: f64,
}

pub fn empirical_overlaps(est: &Estimator, data: &Dataset) -> EmpiricalOverlaps {
    let (w, t0, s) = (&est.weights, &data.theta0, &data.spectra);
    let d = data.d as f64;
    EmpiricalOverlaps {
        m: wdot(&s.psi, t0, w) / d,
        q: wdot(&s.psi, w, w) / d,
        p: wdot(&s.delta, w, w) / d,
        a: wdot(&s.upsilon, w, w) / d,
        f: wdot(&s.upsilon, t0, w) / d,
        n: dot(w, w) / d,
        rho: wdot(&s.psi, t0, t0) / d,
    }
}

/// How fresh test points are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestSampling {
    /// Draw the teacher and student fields of each test point from their
    /// exact joint Gaussian law given the trained weights. Same distribution
    /// as `Explicit`, at O(1) cost per point.
    #[default]
    LocalField,
    /// Draw full covariate vectors and build the perturbations explicitly.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalErrors {
    pub report: ErrorReport,
    /// Standard error of each entry of `report`.
    pub sem: ErrorReport,
}

/// Per-point outcome counters.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    gen: u64,
    bnd: u64,
    cp: u64,
    total: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.gen += o.gen;
        self.bnd += o.bnd;
        self.cp += o.cp;
        self.total += o.total;
    }
}

/// Classifies one test point from its teacher field `nu`, student field
/// `lam` and label. `reach` is the student margin loss under the full
/// attack and `teacher_drop` the teacher margin loss under it.
#[inline]
fn judge(nu: f64, lam: f64, y: f64, reach: f64, teacher_drop: f64, gamma: f64, t: &mut Tally) {
    let margin = y * lam;
    let wrong = margin <= 0.0;
    t.total += 1;
    if wrong {
        t.gen += 1;
        t.cp += 1;
        return;
    }
    if margin <= reach {
        t.bnd += 1;
    }
    // class-preserving attack: scale the full perturbation by c in [0, 1]
    // so that the teacher margin y nu stays at or above gamma
    let tm = y * nu;
    let c = if tm <= gamma {
        0.0
    } else if teacher_drop <= 0.0 || tm - teacher_drop >= gamma {
        1.0
    } else {
        (tm - gamma) / teacher_drop
    };
    if margin <= c * reach {
        t.cp += 1;
    }
}

const CHUNK: usize = 1 << 16;

/// Test-set errors for `est`, plus training error and loss on `data`.
/// `gamma` enables the class-preserving error.
pub fn empirical_errors(
    est: &Estimator,
    data: &Dataset,
    params: &ExperimentParams,
    gamma: Option<f64>,
    test_size: usize,
    seed: u64,
    sampling: TestSampling,
) -> Result<EmpiricalErrors> {
    if test_size == 0 {
        return domain("test set must be non-empty");
    }
    let ov = empirical_overlaps(est, data);
    let (tau, eps_g) = (params.tau, params.eps_g);
    let reach = eps_g * ov.a.sqrt();
    let teacher_drop = if ov.a > 0.0 { eps_g * ov.f / ov.a.sqrt() } else { 0.0 };
    let g = gamma.unwrap_or(0.0);

    let chunks = test_size.div_ceil(CHUNK);
    let tallies = match sampling {
        TestSampling::LocalField => {
            let sd_nu = ov.rho.sqrt();
            let slope = if ov.rho > 0.0 { ov.m / ov.rho } else { 0.0 };
            let sd_lam = (ov.q - slope * ov.m).max(0.0).sqrt();
            map_indexed(chunks, |c| {
                let mut rng = ChaCha8Rng::seed_from_u64(counter_seed(seed, c as u64));
                let mut t = Tally::default();
                let len = CHUNK.min(test_size - c * CHUNK);
                for _ in 0..len {
                    let g1: f64 = StandardNormal.sample(&mut rng);
                    let g2: f64 = StandardNormal.sample(&mut rng);
                    let g3: f64 = StandardNormal.sample(&mut rng);
                    let nu = sd_nu * g1;
                    let lam = slope * nu + sd_lam * g2;
                    let y = if nu + tau * g3 > 0.0 { 1.0 } else { -1.0 };
                    judge(nu, lam, y, reach, teacher_drop, g, &mut t);
                }
                t
            })
        }
        TestSampling::Explicit => {
            let d = data.d;
            let scale = 1.0 / (d as f64).sqrt();
            let sd: Vec<f64> = data.spectra.psi.iter().map(|p| p.sqrt()).collect();
            // worst-case direction S_upsilon theta / sqrt(theta' S_upsilon theta)
            let norm_u = (ov.a * d as f64).sqrt();
            let dir: Vec<f64> = est
                .weights
                .iter()
                .zip(&data.spectra.upsilon)
                .map(|(w, u)| if norm_u > 0.0 { u * w / norm_u } else { 0.0 })
                .collect();
            let w_dir = scale * dot(&est.weights, &dir);
            let t_dir = scale * dot(&data.theta0, &dir);
            map_indexed(chunks, |c| {
                let mut rng = ChaCha8Rng::seed_from_u64(counter_seed(seed, c as u64));
                let mut t = Tally::default();
                let len = CHUNK.min(test_size - c * CHUNK);
                let mut x = vec![0.0; d];
                for _ in 0..len {
                    for (v, s) in x.iter_mut().zip(&sd) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = s * z;
                    }
                    let g3: f64 = StandardNormal.sample(&mut rng);
                    let nu = scale * dot(&data.theta0, &x);
                    let lam = scale * dot(&est.weights, &x);
                    let y = if nu + tau * g3 > 0.0 { 1.0 } else { -1.0 };
                    // delta = -y eps_g dir moves both fields by these amounts
                    judge(nu, lam, y, eps_g * w_dir, eps_g * t_dir, g, &mut t);
                }
                t
            })
        }
    };
    let mut tot = Tally::default();
    for t in &tallies {
        tot.add(t);
    }
    let nt = tot.total as f64;
    let frac = |k: u64| k as f64 / nt;
    let sem = |p: f64| (p * (1.0 - p) / nt).sqrt();
    let egen = frac(tot.gen);
    let ebnd = frac(tot.bnd);
    let eadv = frac(tot.gen + tot.bnd);
    let ecp = frac(tot.cp);

    // training set
    let mut z = vec![0.0; data.n];
    matvec(&data.x, data.d, &est.weights, 1.0 / (data.d as f64).sqrt(), &mut z);
    let shift = params.eps_t * ov.p.sqrt();
    let mut wrong = 0usize;
    let mut losses = Vec::with_capacity(data.n);
    for (zi, yi) in z.iter().zip(&data.y) {
        if yi * zi <= 0.0 {
            wrong += 1;
        }
        losses.push(Logistic.value(yi * zi - shift));
    }
    let ntr = data.n as f64;
    let etrain = wrong as f64 / ntr;
    let lmean = losses.iter().sum::<f64>() / ntr;
    let lvar = losses.iter().map(|l| (l - lmean).powi(2)).sum::<f64>() / (ntr - 1.0).max(1.0);

    Ok(EmpiricalErrors {
        report: ErrorReport {
            egen,
            ebnd,
            eadv,
            etrain: Some(etrain),
            ltrain: Some(lmean),
            ecp: gamma.map(|_| ecp),
        },
        sem: ErrorReport {
            egen: sem(egen),
            ebnd: sem(ebnd),
            eadv: sem(eadv),
            etrain: Some(sem(etrain) * (nt / ntr).sqrt()),
            ltrain: Some((lvar / ntr).sqrt()),
            ecp: gamma.map(|_| sem(ecp)),
        },
    })
}
