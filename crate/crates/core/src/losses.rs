//! Attacker objectives over class-probability vectors.
//!
//! These are plain formula implementations: nothing here crafts perturbations.

use crate::error::{Error, Result};
use crate::infotheory::PROB_CLAMP;
use crate::types::{Loss, STOCHASTIC_TOL};

/// Classifier soft-probabilities over C >= 2 classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(ClassDistribution { probs })
    }

    pub fn one_hot(classes: usize, index: usize) -> Result<Self> {
        if index >= classes {
            return Err(Error::InvalidDistribution(format!(
                "class {index} out of range for C = {classes}"
            )));
        }
        let mut probs = vec![0.0; classes];
        probs[index] = 1.0;
        Self::new(probs)
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0 / classes as f64; classes.max(1)])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }
}

fn same_len(a: &ClassDistribution, b: &ClassDistribution) -> Result<()> {
    if a.classes() != b.classes() {
        return Err(Error::LengthMismatch {
            expected: a.classes(),
            actual: b.classes(),
        });
    }
    Ok(())
}

/// Adversarial cross-entropy: `sum_y truth_y * (-ln adv_y)`.
pub fn ace_loss(truth: &ClassDistribution, adv: &ClassDistribution) -> Result<f64> {
    same_len(truth, adv)?;
    Ok(truth
        .probs
        .iter()
        .zip(&adv.probs)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, a)| -t * a.max(PROB_CLAMP).ln())
        .sum::<f64>()
        .max(0.0))
}

/// `D_KL(clean || adv)`.
pub fn kl_loss(clean: &ClassDistribution, adv: &ClassDistribution) -> Result<f64> {
    same_len(clean, adv)?;
    Ok(crate::infotheory::kl_unchecked(&clean.probs, &adv.probs).max(0.0))
}

/// Fisher-Rao distance `2 arccos(E)`, `E = sum_y sqrt(clean_y adv_y)`.
///
/// Evaluated as `4 asin(|sqrt(clean) - sqrt(adv)| / 2)`, which equals the
/// arccos form for normalized inputs but does not lose half the digits when
/// `E` is close to 1.
pub fn fr_loss(clean: &ClassDistribution, adv: &ClassDistribution) -> Result<f64> {
    same_len(clean, adv)?;
    let sq: f64 = clean
        .probs
        .iter()
        .zip(&adv.probs)
        .map(|(c, a)| (c.sqrt() - a.sqrt()).powi(2))
        .sum();
    Ok(4.0 * (0.5 * sq.sqrt()).min(1.0).asin())
}

/// Gini impurity score `1 - sqrt(sum_y adv_y^2)`; independent of the clean input.
pub fn gini_loss(adv: &ClassDistribution) -> f64 {
    let s: f64 = adv.probs.iter().map(|p| p * p).sum();
    (1.0 - s.sqrt()).max(0.0)
}

/// Evaluates `loss` on a (clean or ground-truth, adversarial) pair.
pub fn evaluate_loss(
    loss: Loss,
    clean: &ClassDistribution,
    adv: &ClassDistribution,
) -> Result<f64> {
    match loss {
        Loss::Ace => ace_loss(clean, adv),
        Loss::Kl => kl_loss(clean, adv),
        Loss::Fr => fr_loss(clean, adv),
        Loss::Gini => {
            same_len(clean, adv)?;
            Ok(gini_loss(adv))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn d(v: &[f64]) -> ClassDistribution {
        ClassDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(ClassDistribution::new(vec![1.0]).is_err());
        assert!(ClassDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ClassDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(ClassDistribution::one_hot(3, 3).is_err());
    }

    #[test]
    fn length_mismatch() {
        let err = kl_loss(&d(&[0.5, 0.5]), &d(&[0.2, 0.3, 0.5])).unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                expected: 2,
                actual: 3
            }
        );
        assert!(ace_loss(&d(&[0.5, 0.5]), &d(&[0.2, 0.3, 0.5])).is_err());
        assert!(fr_loss(&d(&[0.5, 0.5]), &d(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn ace_on_zero_probability_is_finite() {
        let v = ace_loss(
            &ClassDistribution::one_hot(2, 0).unwrap(),
            &ClassDistribution::one_hot(2, 1).unwrap(),
        )
        .unwrap();
        assert!((v - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn losses_vanish_at_agreement() {
        let p = d(&[0.1, 0.6, 0.3]);
        let hot = ClassDistribution::one_hot(3, 1).unwrap();
        assert_eq!(ace_loss(&hot, &hot).unwrap(), 0.0);
        assert_eq!(kl_loss(&p, &p).unwrap(), 0.0);
        assert_eq!(fr_loss(&p, &p).unwrap(), 0.0);
        assert_eq!(gini_loss(&hot), 0.0);
        assert!(
            (fr_loss(&hot, &ClassDistribution::one_hot(3, 0).unwrap()).unwrap() - PI).abs() < 1e-15
        );
        assert!((kl_loss(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn evaluate_dispatch() {
        let (a, b) = (d(&[0.5, 0.5]), d(&[0.9, 0.1]));
        assert_eq!(
            evaluate_loss(Loss::Kl, &a, &b).unwrap(),
            kl_loss(&a, &b).unwrap()
        );
        assert_eq!(evaluate_loss(Loss::Gini, &a, &b).unwrap(), gini_loss(&b));
    }
}
