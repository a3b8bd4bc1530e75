//! Domain types shared across the crate.
//!
//! Everything here is immutable once constructed: constructors validate and
//! the fields are only reachable through accessors, so a `Channel` or a
//! `WeightVector` in hand always satisfies its invariants.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row sums and simplex membership.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A distribution over the binary detector output `(P(natural), P(adversarial))`.
pub type Binary = [f64; 2];

fn check_binary(row: usize, pair: &Binary) -> Result<()> {
    for (col, &value) in pair.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRangeEntry { row, col, value });
        }
    }
    let sum = pair[0] + pair[1];
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NonStochasticRow { row, sum });
    }
    Ok(())
}

/// K x 2 row-stochastic matrix: row k is detector k's soft output for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Binary>,
}

impl Channel {
    pub fn rows(&self) -> &[Binary] {
        &self.rows
    }

    /// Number of detectors.
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Builds the channel from per-detector `P(adversarial)` scores, complementing
    /// each into a binary row.
    pub fn from_scores(scores: &[f64]) -> Result<Channel> {
        let rows: Vec<Binary> = scores.iter().map(|&s| [1.0 - s, s]).collect();
        for (k, &s) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::OutOfRangeEntry {
                    row: k,
                    col: 1,
                    value: s,
                });
            }
        }
        validate_channel(&rows)
    }

    /// Reorders the detectors: row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Channel {
        Channel {
            rows: perm.iter().map(|&i| self.rows[i]).collect(),
        }
    }
}

/// Checks every row for range and stochasticity.
pub fn validate_channel(rows: &[Binary]) -> Result<Channel> {
    if rows.is_empty() {
        return Err(Error::EmptyChannel);
    }
    for (i, row) in rows.iter().enumerate() {
        check_binary(i, row)?;
    }
    Ok(Channel {
        rows: rows.to_vec(),
    })
}

/// A point on the (K-1)-simplex: the mixing distribution over detectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<WeightVector> {
        if weights.is_empty() {
            return Err(Error::NotOnSimplex("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::NotOnSimplex(format!("weight {i} is {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotOnSimplex(format!("weights sum to {sum}")));
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(k: usize) -> WeightVector {
        assert!(k >= 1, "uniform weights need k >= 1");
        WeightVector {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn one_hot(k: usize, index: usize) -> WeightVector {
        assert!(index < k, "one-hot index {index} out of range for k = {k}");
        let mut weights = vec![0.0; k];
        weights[index] = 1.0;
        WeightVector { weights }
    }

    /// Used by the solver after normalization, where the sum is exact up to rounding.
    pub(crate) fn from_normalized(weights: Vec<f64>) -> WeightVector {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        WeightVector { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The four attacker objectives used to diversify attack variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Loss {
    #[serde(rename = "ACE")]
    Ace,
    #[serde(rename = "KL")]
    Kl,
    #[serde(rename = "FR")]
    Fr,
    #[serde(rename = "Gini")]
    Gini,
}

impl Loss {
    pub const ALL: [Loss; 4] = [Loss::Ace, Loss::Kl, Loss::Fr, Loss::Gini];

    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Ace => "ACE",
            Loss::Kl => "KL",
            Loss::Fr => "FR",
            Loss::Gini => "Gini",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ace" => Ok(Loss::Ace),
            "kl" => Ok(Loss::Kl),
            "fr" => Ok(Loss::Fr),
            "gini" => Ok(Loss::Gini),
            _ => Err(format!("unknown loss '{s}' (expected ACE, KL, FR or Gini)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
    #[serde(rename = "none")]
    Unconstrained,
}

impl Norm {
    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
            Norm::Linf => "Linf",
            Norm::Unconstrained => "none",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" | "l_inf" | "inf" => Ok(Norm::Linf),
            "none" | "" => Ok(Norm::Unconstrained),
            _ => Err(format!(
                "unknown norm '{s}' (expected L1, L2, Linf or none)"
            )),
        }
    }
}

/// Identity of one attack variant. Equality on `epsilon` is bitwise so keys
/// can be hashed; serialized epsilons round-trip exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackKey {
    pub algorithm: String,
    pub loss: Option<Loss>,
    pub norm: Norm,
    pub epsilon: Option<f64>,
}

impl AttackKey {
    fn eps_bits(&self) -> Option<u64> {
        // +0.0 and -0.0 are the same budget
        self.epsilon.map(|e| if e == 0.0 { 0 } else { e.to_bits() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm.trim().is_empty() {
            return Err(Error::InvalidRecord("attack algorithm is empty".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidRecord(format!(
                    "epsilon {e} must be a nonnegative number"
                )));
            }
        }
        Ok(())
    }
}

impl PartialEq for AttackKey {
    fn eq(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.loss == other.loss
            && self.norm == other.norm
            && self.eps_bits() == other.eps_bits()
    }
}

impl Eq for AttackKey {}

impl Hash for AttackKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.algorithm.hash(state);
        self.loss.hash(state);
        self.norm.hash(state);
        self.eps_bits().hash(state);
    }
}

impl fmt::Display for AttackKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.algorithm)?;
        if let Some(loss) = self.loss {
            write!(f, "-{loss}")?;
        }
        write!(f, "-{}", self.norm)?;
        if let Some(eps) = self.epsilon {
            write!(f, "-{eps}")?;
        }
        Ok(())
    }
}

/// One algorithm entry of a group cell; starred entries run once per loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackTag {
    pub algorithm: String,
    pub starred: bool,
}

impl FromStr for AttackTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (algorithm, starred) = match s.strip_suffix('*').or_else(|| s.strip_suffix('⋆')) {
            Some(rest) => (rest.trim(), true),
            None => (s, false),
        };
        if algorithm.is_empty() {
            return Err(format!("empty attack tag '{s}'"));
        }
        Ok(AttackTag {
            algorithm: algorithm.to_string(),
            starred,
        })
    }
}

/// A group cell as written in the configuration, before expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub norm: Norm,
    pub epsilon: Option<f64>,
    pub attacks: Vec<AttackTag>,
}

/// Attacks executed simultaneously against the same clean sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackGroup {
    pub norm: Norm,
    pub epsilon: Option<f64>,
    pub members: Vec<AttackKey>,
}

impl AttackGroup {
    pub fn label(&self) -> String {
        match self.epsilon {
            Some(eps) => format!("{}/{}", self.norm, eps),
            None => format!("{}/-", self.norm),
        }
    }

    pub fn contains(&self, key: &AttackKey) -> bool {
        self.members.iter().any(|m| m == key)
    }
}

/// Expands starred algorithms into one variant per loss.
pub fn expand_group(cell: &CellSpec) -> Result<AttackGroup> {
    if cell.attacks.is_empty() {
        return Err(Error::EmptyCell);
    }
    let mut members = Vec::new();
    for tag in &cell.attacks {
        let losses: Vec<Option<Loss>> = if tag.starred {
            Loss::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for loss in losses {
            let key = AttackKey {
                algorithm: tag.algorithm.clone(),
                loss,
                norm: cell.norm,
                epsilon: cell.epsilon,
            };
            if !members.contains(&key) {
                members.push(key);
            }
        }
    }
    Ok(AttackGroup {
        norm: cell.norm,
        epsilon: cell.epsilon,
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Natural,
    Adversarial,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Natural => "natural",
            Role::Adversarial => "adversarial",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "natural" => Ok(Role::Natural),
            "adversarial" => Ok(Role::Adversarial),
            _ => Err(format!(
                "unknown role '{s}' (expected natural or adversarial)"
            )),
        }
    }
}

/// One (sample, variant) row of detector outputs. `scores[k]` is detector k's
/// probability that the input is adversarial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub role: Role,
    pub attack: Option<AttackKey>,
    pub fooled: bool,
    pub scores: Vec<f64>,
}

impl ScoreRecord {
    pub fn validate(&self) -> Result<()> {
        if self.sample_id.is_empty() {
            return Err(Error::InvalidRecord("empty sample_id".into()));
        }
        if self.scores.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "{}: no detector scores",
                self.sample_id
            )));
        }
        if let Some((k, s)) = self
            .scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::InvalidRecord(format!(
                "{}: score det_{k} = {s} outside [0, 1]",
                self.sample_id
            )));
        }
        match (self.role, &self.attack) {
            (Role::Natural, Some(_)) => Err(Error::InvalidRecord(format!(
                "{}: natural record carries an attack",
                self.sample_id
            ))),
            (Role::Adversarial, None) => Err(Error::InvalidRecord(format!(
                "{}: adversarial record has no attack",
                self.sample_id
            ))),
            (Role::Adversarial, Some(key)) => key.validate(),
            (Role::Natural, None) => Ok(()),
        }
    }

    pub fn channel(&self) -> Result<Channel> {
        Channel::from_scores(&self.scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_uniform_row() {
        let c = validate_channel(&[[0.5, 0.5]]).unwrap();
        assert_eq!(c.k(), 1);
    }

    #[test]
    fn symmetric_rows() {
        let c = validate_channel(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        assert_eq!(c.k(), 2);
    }

    #[test]
    fn non_stochastic_row() {
        let err = validate_channel(&[[0.7, 0.4]]).unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { row: 0, .. }));
    }

    #[test]
    fn out_of_range_entry() {
        let err = validate_channel(&[[0.5, 0.5], [1.2, -0.2]]).unwrap_err();
        assert!(matches!(err, Error::OutOfRangeEntry { row: 1, col: 0, .. }));
        assert!(validate_channel(&[[f64::NAN, 0.5]]).is_err());
        assert_eq!(validate_channel(&[]).unwrap_err(), Error::EmptyChannel);
    }

    #[test]
    fn weights_must_be_on_simplex() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
    }

    fn cell(norm: Norm, eps: Option<f64>, tags: &[&str]) -> CellSpec {
        CellSpec {
            norm,
            epsilon: eps,
            attacks: tags.iter().map(|t| t.parse().unwrap()).collect(),
        }
    }

    #[test]
    fn linf_0125_cell_has_13_members() {
        let g = expand_group(&cell(
            Norm::Linf,
            Some(0.125),
            &["PGDi*", "FGSM*", "BIM*", "SA"],
        ))
        .unwrap();
        assert_eq!(g.members.len(), 13);
        assert!(g
            .members
            .iter()
            .all(|m| m.norm == Norm::Linf && m.epsilon == Some(0.125)));
    }

    #[test]
    fn starred_single_algorithm_has_four_members() {
        let g = expand_group(&cell(Norm::L1, Some(5.0), &["PGD1⋆"])).unwrap();
        assert_eq!(g.members.len(), 4);
        let losses: Vec<_> = g.members.iter().map(|m| m.loss.unwrap()).collect();
        assert_eq!(losses, Loss::ALL);
    }

    #[test]
    fn empty_cell_is_rejected() {
        assert_eq!(
            expand_group(&cell(Norm::L2, Some(1.0), &[])).unwrap_err(),
            Error::EmptyCell
        );
    }

    #[test]
    fn attack_key_equality_ignores_zero_sign() {
        let a = AttackKey {
            algorithm: "X".into(),
            loss: None,
            norm: Norm::L2,
            epsilon: Some(0.0),
        };
        let b = AttackKey {
            epsilon: Some(-0.0),
            ..a.clone()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn record_role_attack_consistency() {
        let mut r = ScoreRecord {
            sample_id: "s".into(),
            role: Role::Adversarial,
            attack: None,
            fooled: true,
            scores: vec![0.2, 0.3],
        };
        assert!(r.validate().is_err());
        r.role = Role::Natural;
        assert!(r.validate().is_ok());
        r.scores[1] = 1.5;
        assert!(r.validate().is_err());
    }
}
