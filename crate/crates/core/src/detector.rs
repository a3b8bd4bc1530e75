//! The aggregated soft-detector and its thresholded decision rule.

use serde::Serialize;

use crate::capacity::{solve_capacity, SolverConfig};
use crate::error::{Error, Result};
use crate::infotheory::{marginal, Nats};
use crate::types::{Channel, ScoreRecord, WeightVector};

/// Output of the capacity-weighted mixture for one input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureScore {
    pub p_adversarial: f64,
    pub weights: WeightVector,
    pub capacity: Nats,
}

/// Solves for the capacity-achieving weights and mixes the detector rows.
///
/// When every detector agrees the capacity is zero and the weights are the
/// solver's starting point (uniform by default); the mixture is then the
/// common row whatever the weights are.
pub fn aggregate(channel: &Channel, config: &SolverConfig) -> Result<MixtureScore> {
    let solution = solve_capacity(channel, config)?;
    let p = marginal(&solution.weights, channel)?[1];
    Ok(MixtureScore {
        p_adversarial: p.clamp(0.0, 1.0),
        weights: solution.weights,
        capacity: solution.capacity,
    })
}

/// Hard decision: adversarial iff `p_adversarial > gamma`.
pub fn detect(score: &MixtureScore, gamma: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(score.p_adversarial > gamma)
}

pub fn score_record(record: &ScoreRecord, config: &SolverConfig) -> Result<MixtureScore> {
    aggregate(&record.channel()?, config)
}

/// How a record's K detector scores become one `P(adversarial)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    /// Per-input capacity-optimal weights.
    Mixture(SolverConfig),
    /// A fixed weight vector; one-hot weights reproduce a single detector.
    Fixed(WeightVector),
}

impl Scorer {
    pub fn single(k: usize, detector: usize) -> Scorer {
        Scorer::Fixed(WeightVector::one_hot(k, detector))
    }

    pub fn score(&self, record: &ScoreRecord) -> Result<MixtureScore> {
        match self {
            Scorer::Mixture(config) => score_record(record, config),
            Scorer::Fixed(weights) => {
                let channel = record.channel()?;
                let p = marginal(weights, &channel)?[1];
                Ok(MixtureScore {
                    p_adversarial: p.clamp(0.0, 1.0),
                    weights: weights.clone(),
                    capacity: 0.0,
                })
            }
        }
    }
}
