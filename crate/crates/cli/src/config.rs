//! Experiment configuration: presets, grids and JSON files.

use std::fmt;
use std::path::PathBuf;

use advse::{Block, BlockFeatureModel, ModelSpec, PowerLaw};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "ADV_SE_SEED";
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Se,
    Asymptotic,
    Simulate,
    Compare,
    Surrogate,
    Fgm,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Se => "se",
            Mode::Asymptotic => "asymptotic",
            Mode::Simulate => "simulate",
            Mode::Compare => "compare",
            Mode::Surrogate => "surrogate",
            Mode::Fgm => "fgm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub preset: Option<String>,
    pub model: ModelSpec,
    pub alpha: Vec<f64>,
    pub eps_t: Vec<f64>,
    pub lambda: f64,
    pub tau: f64,
    pub eps_g: f64,
    pub d: usize,
    pub seeds: usize,
    pub base_seed: u64,
    /// Fresh test points per trained model.
    pub test_size: usize,
    /// Teacher-margin threshold of the class-preserving error; `None` skips it.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Weights of the square-root and quadratic defence penalties in
    /// surrogate mode.
    #[serde(default)]
    pub surrogate: (f64, f64),
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Named parameter sets. Every figure preset uses `tau = 0.05`,
/// `lambda = 1e-3` unless noted.
pub struct Preset {
    pub name: &'static str,
    pub blocks: &'static [Block],
    pub power_law: Option<PowerLaw>,
    pub eps_g: f64,
    pub lambda: f64,
    pub tau: f64,
    pub alpha: &'static [f64],
}

const fn block(phi: f64, psi: f64, delta: f64, upsilon: f64, t: f64) -> Block {
    Block { phi, psi, delta, upsilon, t }
}

const FIG1_ALPHA: &[f64] = &[0.5, 1.0, 2.0, 4.0, 8.0];
const FIG2_ALPHA: &[f64] = &[1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

pub const PRESETS: &[Preset] = &[
    Preset { name: "fig1-lr-lu", blocks: &[block(1.0, 0.5, 1.0, 1.0, 2.0)], power_law: None, eps_g: 0.2, lambda: 1e-3, tau: 0.05, alpha: FIG1_ALPHA },
    Preset { name: "fig1-lr-hu", blocks: &[block(1.0, 0.5, 1.0, 1.0, 8.0)], power_law: None, eps_g: 0.2, lambda: 1e-3, tau: 0.05, alpha: FIG1_ALPHA },
    Preset { name: "fig1-hr-lu", blocks: &[block(1.0, 2.0, 1.0, 1.0, 0.5)], power_law: None, eps_g: 0.2, lambda: 1e-3, tau: 0.05, alpha: FIG1_ALPHA },
    Preset { name: "fig1-hr-hu", blocks: &[block(1.0, 2.0, 1.0, 1.0, 2.0)], power_law: None, eps_g: 0.2, lambda: 1e-3, tau: 0.05, alpha: FIG1_ALPHA },
    Preset {
        name: "fig2-left-robust",
        blocks: &[block(0.5, 5.0, 2.0, 1.0, 1.0), block(0.5, 0.2, 1.0, 1.0, 1.0)],
        power_law: None,
        eps_g: 0.2,
        lambda: 1e-3,
        tau: 0.05,
        alpha: FIG2_ALPHA,
    },
    Preset {
        name: "fig2-left-uniform",
        blocks: &[block(0.5, 5.0, 1.0, 1.0, 1.0), block(0.5, 0.2, 1.0, 1.0, 1.0)],
        power_law: None,
        eps_g: 0.2,
        lambda: 1e-3,
        tau: 0.05,
        alpha: FIG2_ALPHA,
    },
    Preset {
        name: "fig2-left-nonrobust",
        blocks: &[block(0.5, 5.0, 1.0, 1.0, 1.0), block(0.5, 0.2, 2.0, 1.0, 1.0)],
        power_law: None,
        eps_g: 0.2,
        lambda: 1e-3,
        tau: 0.05,
        alpha: FIG2_ALPHA,
    },
    // one mode per coordinate at d = 1000, data variance i^-1.5
    Preset {
        name: "fig2-power-law",
        blocks: &[block(1.0, 1.0, 1.0, 1.0, 1.0)],
        power_law: Some(PowerLaw { beta: 1.5, modes: 1000 }),
        eps_g: 0.2,
        lambda: 1e-3,
        tau: 0.05,
        alpha: FIG2_ALPHA,
    },
    Preset { name: "fig4-isotropic", blocks: &[block(1.0, 1.0, 1.0, 1.0, 1.0)], power_law: None, eps_g: 0.2, lambda: 1e-3, tau: 0.05, alpha: FIG1_ALPHA },
    Preset {
        name: "fig4-right-top",
        blocks: &[block(0.01, 1.0, 1.0, 1.0, 1.0), block(0.99, 1.0, 1e3, 1e3, 1e3)],
        power_law: None,
        eps_g: 0.006,
        lambda: 1e-3,
        tau: 0.05,
        alpha: &[100.0],
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec { blocks: self.blocks.to_vec(), power_law: self.power_law }
    }
}

/// Parses `a,b,c` or `log:lo:hi:count` (log-spaced, endpoints included).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, UsageError> {
    let s = s.trim();
    if s.is_empty() {
        return usage("empty grid");
    }
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return usage(format!("log grid needs lo:hi:count, got '{s}'"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| UsageError(format!("bad grid bound '{}'", parts[0])))?;
        let hi: f64 = parts[1].parse().map_err(|_| UsageError(format!("bad grid bound '{}'", parts[1])))?;
        let n: usize = parts[2].parse().map_err(|_| UsageError(format!("bad grid count '{}'", parts[2])))?;
        if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) || n == 0 {
            return usage(format!("log grid needs positive bounds and count, got '{s}'"));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        return Ok((0..n)
            .map(|i| match i {
                0 => lo,
                _ if i == n - 1 => hi,
                _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect());
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => usage(format!("bad grid value '{t}'")),
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Defaults for `mode` with the given preset applied.
    pub fn from_preset(mode: Mode, p: &Preset) -> Self {
        ExperimentConfig {
            mode,
            preset: Some(p.name.to_string()),
            model: p.model_spec(),
            alpha: p.alpha.to_vec(),
            eps_t: vec![0.2],
            lambda: p.lambda,
            tau: p.tau,
            eps_g: p.eps_g,
            d: 1000,
            seeds: 20,
            base_seed: DEFAULT_SEED,
            test_size: 1_000_000,
            gamma: None,
            surrogate: (0.0, 0.0),
            out: None,
            format: Format::Csv,
        }
    }

    pub fn model(&self) -> Result<BlockFeatureModel, UsageError> {
        BlockFeatureModel::from_spec(&self.model).map_err(|e| UsageError(format!("invalid model: {e}")))
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.alpha.is_empty() {
            return usage("alpha grid is empty");
        }
        if self.eps_t.is_empty() {
            return usage("eps_t grid is empty");
        }
        if self.mode != Mode::Asymptotic && self.alpha.iter().any(|a| !(*a > 0.0)) {
            return usage("alpha values must be positive");
        }
        if self.eps_t.iter().any(|e| !(*e >= 0.0)) {
            return usage("eps_t values must be nonnegative");
        }
        for (name, v) in [("lambda", self.lambda), ("tau", self.tau), ("eps_g", self.eps_g)] {
            if !(v >= 0.0 && v.is_finite()) {
                return usage(format!("{name} must be nonnegative, got {v}"));
            }
        }
        let sim = matches!(self.mode, Mode::Simulate | Mode::Compare | Mode::Surrogate | Mode::Fgm);
        if sim && (self.d == 0 || self.seeds == 0 || self.test_size == 0) {
            return usage("d, seeds and test size must be positive");
        }
        if self.mode == Mode::Compare && self.seeds < 2 {
            return usage("compare mode needs at least two seeds");
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0) {
                return usage("gamma must be nonnegative");
            }
        }
        if !(self.surrogate.0 >= 0.0 && self.surrogate.1 >= 0.0) {
            return usage("surrogate weights must be nonnegative");
        }
        self.model()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, UsageError> {
        let c: Self = serde_json::from_str(s).map_err(|e| UsageError(format!("bad config: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}
