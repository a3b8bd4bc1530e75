//! Multi-armed evaluation.
//!
//! A clean sample attacked by every member of a group counts as a true
//! positive at threshold `gamma` only if every fooling variant is flagged.
//! Since `min_i s_i > gamma` holds exactly when every `s_i > gamma`, each
//! (sample, group) pair reduces to the minimum of its member scores, and one
//! ROC sweep over those minima covers all thresholds.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::SolverConfig;
use crate::detector::{MixtureScore, Scorer};
use crate::error::{Error, Result};
use crate::types::{AttackGroup, AttackKey, Norm, Role, ScoreRecord};

/// Natural vs. group-aggregated adversarial scores for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedScores {
    pub group: AttackGroup,
    /// `(sample_id, min over the sample's fooling member attacks)`.
    pub positives: Vec<(String, f64)>,
    /// Natural records, shared by every group.
    pub negatives: Vec<(String, f64)>,
    /// Adversarial records of this group in the input, fooling or not.
    pub n_records: usize,
    /// Record indices of the fooling member attacks that entered a minimum.
    pub included: Vec<usize>,
}

fn attack_index(groups: &[AttackGroup]) -> Result<HashMap<&AttackKey, usize>> {
    let mut index = HashMap::new();
    for (gi, group) in groups.iter().enumerate() {
        for key in &group.members {
            if let Some(prev) = index.insert(key, gi) {
                if prev != gi {
                    return Err(Error::OverlappingGroups(key.to_string()));
                }
            }
        }
    }
    Ok(index)
}

/// Groups records by attack cell and min-aggregates each sample's fooling
/// variants. `scores[i]` is the aggregated `P(adversarial)` of `records[i]`.
pub fn build_groups(
    records: &[ScoreRecord],
    groups: &[AttackGroup],
    scores: &[f64],
) -> Result<Vec<GroupedScores>> {
    if scores.len() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            actual: scores.len(),
        });
    }
    let index = attack_index(groups)?;

    let mut negatives = Vec::new();
    // (positives, sample index, record count, included records) per group
    type Acc<'r> = (
        Vec<(String, f64)>,
        HashMap<&'r str, usize>,
        usize,
        Vec<usize>,
    );
    let mut per_group: Vec<Acc> = groups.iter().map(|_| Default::default()).collect();
    let mut seen: HashSet<(&str, Option<&AttackKey>)> = HashSet::new();

    for (i, (record, &score)) in records.iter().zip(scores).enumerate() {
        if !seen.insert((record.sample_id.as_str(), record.attack.as_ref())) {
            return Err(Error::DuplicateRecord {
                sample_id: record.sample_id.clone(),
                what: record
                    .attack
                    .as_ref()
                    .map_or_else(|| "natural".to_string(), |k| k.to_string()),
            });
        }
        match (&record.role, &record.attack) {
            (Role::Natural, _) => negatives.push((record.sample_id.clone(), score)),
            (Role::Adversarial, None) => {
                return Err(Error::InvalidRecord(format!(
                    "{}: adversarial record has no attack",
                    record.sample_id
                )))
            }
            (Role::Adversarial, Some(key)) => {
                let gi = *index
                    .get(key)
                    .ok_or_else(|| Error::UnknownAttack(key.to_string()))?;
                let (positives, slot, n_records, included) = &mut per_group[gi];
                *n_records += 1;
                if !record.fooled {
                    continue;
                }
                included.push(i);
                match slot.get(record.sample_id.as_str()) {
                    Some(&at) => {
                        let current = &mut positives[at].1;
                        *current = current.min(score);
                    }
                    None => {
                        slot.insert(record.sample_id.as_str(), positives.len());
                        positives.push((record.sample_id.clone(), score));
                    }
                }
            }
        }
    }

    Ok(groups
        .iter()
        .zip(per_group)
        .map(
            |(group, (positives, _, n_records, included))| GroupedScores {
                group: group.clone(),
                positives,
                negatives: negatives.clone(),
                n_records,
                included,
            },
        )
        .collect())
}

fn nonempty(positives: &[f64], negatives: &[f64]) -> Result<()> {
    if positives.is_empty() {
        return Err(Error::EmptyClass("no positive (adversarial) scores".into()));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyClass("no negative (natural) scores".into()));
    }
    Ok(())
}

/// Mann-Whitney AUROC from midranks: the fraction of (positive, negative)
/// pairs where the positive scores higher, ties counting one half.
pub fn auroc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    nonempty(positives, negatives)?;
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // twice the positive rank sum, kept integral
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank (i + 1 + j) / 2
        let doubled_midrank = (i + 1 + j) as u128;
        let tied_pos = all[i..j].iter().filter(|(_, p)| *p).count() as u128;
        doubled_rank_sum += doubled_midrank * tied_pos;
        i = j;
    }
    let (np, nn) = (positives.len() as u128, negatives.len() as u128);
    // 2U = 2R - np(np+1)
    let doubled_u = doubled_rank_sum - np * (np + 1);
    Ok(doubled_u as f64 / (2 * np * nn) as f64)
}

/// One operating point: inputs are flagged when their score is strictly above
/// `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Empirical ROC over every candidate threshold: each observed score, plus
/// negative infinity. Points go from (0, 0) to (1, 1).
pub fn roc_curve(positives: &[f64], negatives: &[f64]) -> Result<Vec<RocPoint>> {
    nonempty(positives, negatives)?;
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    let point = |threshold: f64, tp: usize, fp: usize| RocPoint {
        threshold,
        fpr: fp as f64 / nn,
        tpr: tp as f64 / np,
        true_positives: tp,
        false_positives: fp,
    };
    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < all.len() {
        let v = all[i].0;
        // everything counted so far is strictly above v
        curve.push(point(v, tp, fp));
        while i < all.len() && all[i].0 == v {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    curve.push(point(f64::NEG_INFINITY, tp, fp));
    Ok(curve)
}

/// Area under [`roc_curve`] by the trapezoid rule.
pub fn auroc_trapezoid(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    let curve = roc_curve(positives, negatives)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

/// FPR at the largest candidate threshold whose TPR reaches `target_tpr`.
/// Returns `(fpr, threshold)`; the threshold is negative infinity when only
/// flagging everything reaches the target.
pub fn fpr_at_tpr(positives: &[f64], negatives: &[f64], target_tpr: f64) -> Result<(f64, f64)> {
    if !(target_tpr > 0.0 && target_tpr <= 1.0) {
        return Err(Error::InvalidTarget(target_tpr));
    }
    let needed = (target_tpr * positives.len() as f64 - 1e-9).ceil() as usize;
    let curve = roc_curve(positives, negatives)?;
    let hit = curve
        .iter()
        .find(|p| p.true_positives >= needed)
        .expect("last ROC point flags every positive");
    Ok((hit.fpr, hit.threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub group: String,
    pub norm: Norm,
    pub epsilon: Option<f64>,
    pub n_members: usize,
    pub auroc: f64,
    pub fpr_at_95_tpr: f64,
    /// Serialized as `null` when negative infinity.
    pub threshold_at_95: f64,
    pub n_positives: usize,
    pub n_negatives: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_capacity: Option<f64>,
    #[serde(skip)]
    pub roc: Option<Vec<RocPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorReport {
    pub detector: String,
    pub groups: Vec<GroupMetrics>,
    pub mean_auroc: f64,
    pub mean_fpr_at_95_tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub n_records: usize,
    pub n_detectors: usize,
    pub mixture: DetectorReport,
    pub baselines: Vec<DetectorReport>,
    /// Configured groups with no adversarial records in the input.
    pub skipped_groups: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluateOptions {
    /// Also evaluate each detector alone (one-hot weights).
    pub baselines: bool,
    /// Keep ROC points on each [`GroupMetrics`].
    pub roc: bool,
}

pub const TARGET_TPR: f64 = 0.95;

/// Checks every record and that all records carry the same number of detectors.
pub fn validate_records(records: &[ScoreRecord]) -> Result<usize> {
    let k = records.first().map(|r| r.scores.len()).unwrap_or(0);
    for record in records {
        record.validate()?;
        if record.scores.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                actual: record.scores.len(),
            });
        }
    }
    Ok(k)
}

/// Scores every record with `scorer`, in parallel, preserving input order.
pub fn score_all(records: &[ScoreRecord], scorer: &Scorer) -> Result<Vec<MixtureScore>> {
    records.par_iter().map(|r| scorer.score(r)).collect()
}

fn detector_report(
    name: String,
    records: &[ScoreRecord],
    groups: &[AttackGroup],
    scores: &[MixtureScore],
    with_capacity: bool,
    options: &EvaluateOptions,
) -> Result<(DetectorReport, Vec<String>)> {
    let p: Vec<f64> = scores.iter().map(|s| s.p_adversarial).collect();
    let grouped = build_groups(records, groups, &p)?;
    let mut metrics = Vec::new();
    let mut skipped = Vec::new();
    for g in &grouped {
        let label = g.group.label();
        if g.n_records == 0 {
            skipped.push(label);
            continue;
        }
        let pos: Vec<f64> = g.positives.iter().map(|x| x.1).collect();
        let neg: Vec<f64> = g.negatives.iter().map(|x| x.1).collect();
        let context = |e: Error| match e {
            Error::EmptyClass(why) => Error::EmptyClass(format!("group {label}: {why}")),
            other => other,
        };
        let auc = auroc(&pos, &neg).map_err(context)?;
        let (fpr, threshold) = fpr_at_tpr(&pos, &neg, TARGET_TPR).map_err(context)?;
        let mean_capacity = (with_capacity && !g.included.is_empty()).then(|| {
            g.included.iter().map(|&i| scores[i].capacity).sum::<f64>() / g.included.len() as f64
        });
        let roc = if options.roc {
            Some(roc_curve(&pos, &neg)?)
        } else {
            None
        };
        metrics.push(GroupMetrics {
            group: label.clone(),
            norm: g.group.norm,
            epsilon: g.group.epsilon,
            n_members: g.group.members.len(),
            auroc: auc,
            fpr_at_95_tpr: fpr,
            threshold_at_95: threshold,
            n_positives: pos.len(),
            n_negatives: neg.len(),
            mean_capacity,
            roc,
        });
    }
    let n = metrics.len().max(1) as f64;
    let mean_auroc = metrics.iter().map(|m| m.auroc).sum::<f64>() / n;
    let mean_fpr = metrics.iter().map(|m| m.fpr_at_95_tpr).sum::<f64>() / n;
    Ok((
        DetectorReport {
            detector: name,
            groups: metrics,
            mean_auroc,
            mean_fpr_at_95_tpr: mean_fpr,
        },
        skipped,
    ))
}

/// Scores every record with the capacity mixture and computes AUROC and
/// FPR at 95% TPR for every group that has adversarial records.
pub fn evaluate(
    records: &[ScoreRecord],
    groups: &[AttackGroup],
    config: &SolverConfig,
    options: &EvaluateOptions,
) -> Result<EvaluationReport> {
    config.validate()?;
    let k = validate_records(records)?;
    if k == 0 {
        return Err(Error::EmptyClass("no records".into()));
    }

    let scores = score_all(records, &Scorer::Mixture(config.clone()))?;
    let (mixture, skipped_groups) =
        detector_report("mixture".into(), records, groups, &scores, true, options)?;

    let mut baselines = Vec::new();
    if options.baselines {
        for d in 0..k {
            let scores = score_all(records, &Scorer::single(k, d))?;
            let (report, _) =
                detector_report(format!("det_{d}"), records, groups, &scores, false, options)?;
            baselines.push(report);
        }
    }

    Ok(EvaluationReport {
        n_records: records.len(),
        n_detectors: k,
        mixture,
        baselines,
        skipped_groups,
    })
}
