use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bfm::BlockFeatureModel;
use crate::error::{domain, Result};

/// Per-coordinate diagonals of the data, defence, attack and teacher
/// covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    pub psi: Vec<f64>,
    pub delta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub t: Vec<f64>,
}

impl Spectra {
    pub fn from_model(model: &BlockFeatureModel, d: usize) -> Self {
        let sizes = model.block_sizes(d);
        let mut s = Spectra {
            psi: Vec::with_capacity(d),
            delta: Vec::with_capacity(d),
            upsilon: Vec::with_capacity(d),
            t: Vec::with_capacity(d),
        };
        for (b, &k) in model.blocks().iter().zip(&sizes) {
            s.psi.extend(std::iter::repeat_n(b.psi, k));
            s.delta.extend(std::iter::repeat_n(b.delta, k));
            s.upsilon.extend(std::iter::repeat_n(b.upsilon, k));
            s.t.extend(std::iter::repeat_n(b.t, k));
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }
}

/// A finite training sample. Covariates are stored row-major, `n x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub d: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta0: Vec<f64>,
    pub spectra: Spectra,
    pub tau: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Draws a teacher from `N(0, Sigma_theta)`, `round(alpha d)` covariates
/// from `N(0, Sigma_x)` and probit labels. Deterministic in `seed`.
pub fn sample_dataset(model: &BlockFeatureModel, d: usize, alpha: f64, tau: f64, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return domain("dimension must be positive");
    }
    if !(alpha > 0.0 && alpha.is_finite()) || !(tau >= 0.0) {
        return domain("alpha must be positive and tau nonnegative");
    }
    let n = ((alpha * d as f64).round() as usize).max(1);
    let spectra = Spectra::from_model(model, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let theta0: Vec<f64> = spectra.t.iter().map(|t| t.sqrt() * gauss()).collect();
    let sd: Vec<f64> = spectra.psi.iter().map(|p| p.sqrt()).collect();
    let mut x = vec![0.0; n * d];
    for row in x.chunks_exact_mut(d) {
        for (v, s) in row.iter_mut().zip(&sd) {
            *v = s * gauss();
        }
    }
    let scale = 1.0 / (d as f64).sqrt();
    let y = x
        .chunks_exact(d)
        .map(|row| {
            let z = scale * super::linalg::dot(row, &theta0) + tau * gauss();
            if z > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(Dataset { d, n, x, y, theta0, spectra, tau, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfm::{build_bfm, Block};

    #[test]
    fn deterministic_and_noiseless_labels_are_signs() {
        let m = BlockFeatureModel::identity();
        let a = sample_dataset(&m, 60, 1.5, 0.0, 11).unwrap();
        let b = sample_dataset(&m, 60, 1.5, 0.0, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n, 90);
        for i in 0..a.n {
            let z = super::super::linalg::dot(a.row(i), &a.theta0);
            assert_eq!(a.y[i], z.signum());
        }
    }

    #[test]
    fn block_variances_match() {
        let m = build_bfm(
            &[Block::new(0.5, 5.0, 1.0, 1.0, 1.0), Block::new(0.5, 0.2, 1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        let ds = sample_dataset(&m, 2000, 0.5, 0.05, 3).unwrap();
        for (lo, hi, psi) in [(0, 1000, 5.0), (1000, 2000, 0.2)] {
            let mut s = 0.0;
            for i in 0..ds.n {
                s += ds.row(i)[lo..hi].iter().map(|v| v * v).sum::<f64>();
            }
            let mean = s / (ds.n * (hi - lo)) as f64;
            let tol = 5.0 * (2.0 / (ds.n * (hi - lo)) as f64).sqrt() * psi;
            assert!((mean - psi).abs() < tol.max(0.05 * psi), "{mean} {psi}");
        }
    }

    #[test]
    fn label_balance() {
        let ds = sample_dataset(&BlockFeatureModel::identity(), 200, 20.0, 0.5, 5).unwrap();
        let mean = ds.y.iter().sum::<f64>() / ds.n as f64;
        assert!(mean.abs() < 3.0 / (ds.n as f64).sqrt() + 0.02);
    }
}
