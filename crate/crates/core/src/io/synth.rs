//! Deterministic synthetic detector scores.
//!
//! Random stream: ChaCha8 seeded with `ChaCha8Rng::seed_from_u64(seed)`
//! (rand_core's PCG32-based seed expansion). Every draw consumes whole
//! 64-bit words:
//!
//! * uniform `U = (word >> 11) * 2^-53`, in `[0, 1)`
//! * normal: Box-Muller cosine branch, `sqrt(-2 ln(1 - U1)) cos(2 pi U2)`
//! * gamma(a >= 1): Marsaglia-Tsang with the normal above and `1 - U` for
//!   the acceptance uniform; gamma(a < 1) = gamma(a + 1) * (1 - U)^(1/a)
//! * beta(a, b) = X / (X + Y), X ~ gamma(a) then Y ~ gamma(b)
//!
//! Draw order: naturals first (`nat-NNNNNN`, detectors 0..K), then each
//! attacked sample (`adv-NNNNNN`) walks every cell and member in config
//! order, drawing the fooled flag (`U < fool_rate`) before the K scores.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::groups::{expand_cells, toml_error, CellEntry};
use crate::error::{Error, Result};
use crate::types::{AttackGroup, Loss, Role, ScoreRecord};

pub const SYNTHETIC_TOML: &str = include_str!("../../data/synthetic.toml");

/// Human-readable description written at the top of generated score files.
pub const PRNG_DESCRIPTION: &str =
    "prng: ChaCha8 (rand_chacha, seed_from_u64); uniform = (u64 >> 11) * 2^-53; beta = gamma ratio, Marsaglia-Tsang over Box-Muller";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorProfile {
    /// Attacks crafted with this loss draw from `on_specialty`.
    pub specialty: Loss,
    pub on_specialty: BetaParams,
    pub off_specialty: BetaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_natural: usize,
    /// Number of clean samples attacked; each spawns every member of every cell.
    pub n_adversarial_per_attack: usize,
    pub fool_rate: f64,
    pub natural_profile: BetaParams,
    pub detectors: Vec<DetectorProfile>,
    #[serde(rename = "cell")]
    pub cells: Vec<CellEntry>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let specialist = |specialty| DetectorProfile {
            specialty,
            on_specialty: BetaParams {
                alpha: 8.0,
                beta: 2.0,
            },
            off_specialty: BetaParams {
                alpha: 2.0,
                beta: 8.0,
            },
        };
        SyntheticConfig {
            seed: 7,
            n_natural: 500,
            n_adversarial_per_attack: 500,
            fool_rate: 0.9,
            natural_profile: BetaParams {
                alpha: 2.0,
                beta: 8.0,
            },
            detectors: Loss::ALL.iter().copied().map(specialist).collect(),
            cells: vec![CellEntry {
                norm: "Linf".into(),
                epsilon: Some(0.125),
                attacks: ["PGDi*", "FGSM*", "BIM*", "SA"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            }],
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidConfig(reason));
        if self.n_natural == 0 || self.n_adversarial_per_attack == 0 {
            return bad("sample counts must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.fool_rate) {
            return bad(format!("fool_rate {} outside [0, 1]", self.fool_rate));
        }
        if self.detectors.is_empty() {
            return bad("at least one detector profile is required".into());
        }
        let params = std::iter::once(&self.natural_profile).chain(
            self.detectors
                .iter()
                .flat_map(|d| [&d.on_specialty, &d.off_specialty]),
        );
        for p in params {
            if !(p.alpha > 0.0 && p.beta > 0.0 && p.alpha.is_finite() && p.beta.is_finite()) {
                return bad(format!(
                    "Beta parameters must be positive, got ({}, {})",
                    p.alpha, p.beta
                ));
            }
        }
        if self.cells.is_empty() {
            return bad("at least one attack cell is required".into());
        }
        Ok(())
    }

    pub fn groups(&self) -> Result<Vec<AttackGroup>> {
        expand_cells(&self.cells)
    }
}

pub fn parse_synthetic_config(text: &str) -> Result<SyntheticConfig> {
    let config: SyntheticConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    config.validate()?;
    Ok(config)
}

pub fn read_synthetic_config(path: &Path) -> Result<SyntheticConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_synthetic_config(&text)
}

/// Portable sampler over a ChaCha8 word stream.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            let u = 1.0 - self.uniform();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = 1.0 - self.uniform();
            if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
                return d * v;
            }
        }
    }

    pub fn beta(&mut self, p: BetaParams) -> f64 {
        let x = self.gamma(p.alpha);
        let y = self.gamma(p.beta);
        (x / (x + y)).clamp(0.0, 1.0)
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<ScoreRecord>> {
    config.validate()?;
    let groups = config.groups()?;
    let mut rng = Sampler::new(config.seed);
    let mut records = Vec::new();

    for i in 0..config.n_natural {
        let scores = config
            .detectors
            .iter()
            .map(|_| rng.beta(config.natural_profile))
            .collect();
        records.push(ScoreRecord {
            sample_id: format!("nat-{i:06}"),
            role: Role::Natural,
            attack: None,
            fooled: false,
            scores,
        });
    }

    for j in 0..config.n_adversarial_per_attack {
        for group in &groups {
            for key in &group.members {
                let fooled = rng.uniform() < config.fool_rate;
                let scores = config
                    .detectors
                    .iter()
                    .map(|d| {
                        let profile = if key.loss == Some(d.specialty) {
                            d.on_specialty
                        } else {
                            d.off_specialty
                        };
                        rng.beta(profile)
                    })
                    .collect();
                records.push(ScoreRecord {
                    sample_id: format!("adv-{j:06}"),
                    role: Role::Adversarial,
                    attack: Some(key.clone()),
                    fooled,
                    scores,
                });
            }
        }
    }
    Ok(records)
}
