//! Block Feature Model: diagonal data, defence, attack and teacher spectra.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// One block of coordinates sharing the same four spectral values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub phi: f64,
    pub psi: f64,
    pub delta: f64,
    pub upsilon: f64,
    pub t: f64,
}

impl Block {
    pub fn new(phi: f64, psi: f64, delta: f64, upsilon: f64, t: f64) -> Self {
        Block { phi, psi, delta, upsilon, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub beta: f64,
    pub modes: usize,
}

/// Serialized form of a model: the blocks as supplied plus optional
/// power-law expansion. With `power_law` set, `blocks` holds a single template
/// whose delta, upsilon and t apply to every mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub power_law: Option<PowerLaw>,
}

/// One point of the joint spectral measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralAtom {
    pub weight: f64,
    pub omega: f64,
    pub zeta: f64,
    pub upsilon: f64,
    pub theta_bar_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockFeatureModel {
    blocks: Vec<Block>,
    normalized: bool,
    spec: ModelSpec,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return domain(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

/// Builds a model, renormalizing fractions and trace-normalizing the
/// defence and attack spectra.
pub fn build_bfm(blocks: &[Block], power_law: Option<PowerLaw>) -> Result<BlockFeatureModel> {
    if blocks.is_empty() {
        return domain("block list is empty");
    }
    for b in blocks {
        check_positive("phi", b.phi)?;
        check_positive("psi", b.psi)?;
        check_positive("delta", b.delta)?;
        check_positive("upsilon", b.upsilon)?;
        check_positive("t", b.t)?;
    }
    let raw: Vec<Block> = match power_law {
        None => blocks.to_vec(),
        Some(pl) => {
            if blocks.len() != 1 {
                return domain("power-law models take exactly one template block");
            }
            if pl.modes == 0 {
                return domain("power-law mode count must be positive");
            }
            if !(pl.beta.is_finite() && pl.beta >= 0.0) {
                return domain(format!("power-law exponent must be nonnegative, got {}", pl.beta));
            }
            let tpl = blocks[0];
            let w = 1.0 / pl.modes as f64;
            (1..=pl.modes)
                .map(|i| Block::new(w, (i as f64).powf(-pl.beta), tpl.delta, tpl.upsilon, tpl.t))
                .collect()
        }
    };
    let mut model = BlockFeatureModel {
        blocks: raw,
        normalized: false,
        spec: ModelSpec { blocks: blocks.to_vec(), power_law },
    };
    model.normalize();
    Ok(model)
}

impl BlockFeatureModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        build_bfm(&spec.blocks, spec.power_law)
    }

    /// Single block with every spectrum equal to one.
    pub fn identity() -> Self {
        build_bfm(&[Block::new(1.0, 1.0, 1.0, 1.0, 1.0)], None).expect("valid")
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn normalize(&mut self) {
        let total: f64 = self.blocks.iter().map(|b| b.phi).sum();
        if total != 1.0 {
            for b in &mut self.blocks {
                b.phi /= total;
            }
        }
        let sd: f64 = self.blocks.iter().map(|b| b.phi * b.delta).sum();
        let su: f64 = self.blocks.iter().map(|b| b.phi * b.upsilon).sum();
        if sd != 1.0 || su != 1.0 {
            for b in &mut self.blocks {
                b.delta /= sd;
                b.upsilon /= su;
            }
        }
        self.normalized = true;
    }

    /// Re-applies trace normalization; a no-op on a built model up to
    /// rounding.
    pub fn renormalized(&self) -> Self {
        let mut m = self.clone();
        m.normalize();
        m
    }

    /// Teacher power in the data metric, `sum phi psi t`.
    pub fn rho(&self) -> f64 {
        self.blocks.iter().map(|b| b.phi * b.psi * b.t).sum()
    }

    /// Teacher power in the attack metric, `sum phi upsilon t`.
    pub fn teacher_attack_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.phi * b.upsilon * b.t).sum()
    }

    /// Largest attack-to-data ratio `sqrt(upsilon / psi)` over blocks.
    pub fn max_attack_ratio(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b.upsilon / b.psi).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn spectral_atoms(&self) -> Vec<SpectralAtom> {
        let rho = self.rho();
        self.blocks
            .iter()
            .map(|b| SpectralAtom {
                weight: b.phi,
                omega: b.psi,
                zeta: b.delta,
                upsilon: b.upsilon,
                theta_bar_sq: b.psi * b.psi * b.t / rho,
            })
            .collect()
    }

    /// Splits `d` coordinates across blocks by largest remainder. Every block
    /// gets its rounded share; the result sums to `d`.
    pub fn block_sizes(&self, d: usize) -> Vec<usize> {
        let exact: Vec<f64> = self.blocks.iter().map(|b| b.phi * d as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let assigned: usize = sizes.iter().sum();
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = exact[i] - exact[i].floor();
            let rj = exact[j] - exact[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &i in order.iter().take(d.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

/// Convenience accessor matching the free-function style used elsewhere.
pub fn rho(model: &BlockFeatureModel) -> f64 {
    model.rho()
}

pub fn spectral_atoms(model: &BlockFeatureModel) -> Vec<SpectralAtom> {
    model.spectral_atoms()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_model() {
        let m = BlockFeatureModel::identity();
        assert_eq!(m.rho(), 1.0);
        let a = m.spectral_atoms();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0], SpectralAtom { weight: 1.0, omega: 1.0, zeta: 1.0, upsilon: 1.0, theta_bar_sq: 1.0 });
        assert!(m.is_normalized());
    }

    #[test]
    fn two_block_delta_normalization() {
        let m = build_bfm(
            &[Block::new(0.5, 1.0, 2.0, 1.0, 1.0), Block::new(0.5, 1.0, 1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        assert!((m.blocks()[0].delta - 4.0 / 3.0).abs() < 1e-15);
        assert!((m.blocks()[1].delta - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn table_two_atom_masses() {
        let m = build_bfm(
            &[Block::new(0.5, 5.0, 1.0, 1.0, 1.0), Block::new(0.5, 0.2, 1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        assert!((m.rho() - 2.6).abs() < 1e-15);
        let a = m.spectral_atoms();
        assert!((a[0].theta_bar_sq - 25.0 / 2.6).abs() < 1e-13);
        assert!((a[1].theta_bar_sq - 0.04 / 2.6).abs() < 1e-15);
    }

    #[test]
    fn single_block_rho_is_psi_t() {
        let m = build_bfm(&[Block::new(1.0, 2.0, 1.0, 1.0, 2.0)], None).unwrap();
        assert_eq!(m.rho(), 4.0);
    }

    #[test]
    fn power_law_rho_matches_direct_sum() {
        let m = build_bfm(
            &[Block::new(1.0, 1.0, 1.0, 1.0, 1.0)],
            Some(PowerLaw { beta: 1.5, modes: 1000 }),
        )
        .unwrap();
        let mut direct = 0.0;
        for i in (1..=1000).rev() {
            direct += (i as f64).powf(-1.5) / 1000.0;
        }
        assert!((m.rho() - direct).abs() < 1e-14);
        assert_eq!(m.len(), 1000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_bfm(&[], None).is_err());
        assert!(build_bfm(&[Block::new(1.0, 0.0, 1.0, 1.0, 1.0)], None).is_err());
        assert!(build_bfm(&[Block::new(1.0, 1.0, -1.0, 1.0, 1.0)], None).is_err());
        assert!(build_bfm(&[Block::new(1.0, 1.0, 1.0, 1.0, f64::NAN)], None).is_err());
    }

    #[test]
    fn fractions_renormalized() {
        let m = build_bfm(
            &[Block::new(1.0, 1.0, 1.0, 1.0, 1.0), Block::new(3.0, 2.0, 1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        assert_eq!(m.blocks()[0].phi, 0.25);
        assert_eq!(m.blocks()[1].phi, 0.75);
    }

    #[test]
    fn block_sizes_sum_to_d() {
        let m = build_bfm(
            &[
                Block::new(1.0, 1.0, 1.0, 1.0, 1.0),
                Block::new(1.0, 2.0, 1.0, 1.0, 1.0),
                Block::new(1.0, 3.0, 1.0, 1.0, 1.0),
            ],
            None,
        )
        .unwrap();
        assert_eq!(m.block_sizes(100), vec![34, 33, 33]);
        assert_eq!(m.block_sizes(1000).iter().sum::<usize>(), 1000);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let m = build_bfm(
            &[Block::new(0.5, 5.0, 2.0, 1.0, 1.0), Block::new(0.5, 0.2, 1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        let s = serde_json::to_string(m.spec()).unwrap();
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(BlockFeatureModel::from_spec(&back).unwrap(), m);
        let pl: ModelSpec = serde_json::from_str(
            r#"{"blocks":[{"phi":1,"psi":1,"delta":1,"upsilon":1,"t":1}],"power_law":{"beta":1.5,"modes":10}}"#,
        )
        .unwrap();
        assert_eq!(BlockFeatureModel::from_spec(&pl).unwrap().len(), 10);
    }
}
