//! Entropy, KL divergence and mutual information for a K-input, binary-output
//! channel. All quantities are in nats.

use crate::error::{Error, Result};
use crate::types::{Binary, Channel, WeightVector};

/// Natural-log units.
pub type Nats = f64;

/// Floor and ceiling applied to the second argument of a KL divergence.
pub const PROB_CLAMP: f64 = 1e-12;

const NEG_TOL: f64 = 1e-12;

/// Rounds values within tolerance below zero up to exactly zero.
#[inline]
fn nonneg(v: f64) -> Nats {
    if (-NEG_TOL..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

#[inline]
pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pz, &qz) in p.iter().zip(q) {
        if pz > 0.0 {
            let qz = qz.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            acc += pz * (pz / qz).ln();
        }
    }
    acc
}

/// `D_KL(p || q)` with `0 ln(0/.) = 0` and `q` clamped to `[1e-12, 1 - 1e-12]`.
pub fn kl_divergence(p: &Binary, q: &Binary) -> Nats {
    nonneg(kl_unchecked(p, q))
}

/// Binary entropy `H_b(p)` in nats.
pub fn binary_entropy(p: f64) -> Nats {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

fn check_len(weights: &WeightVector, channel: &Channel) -> Result<()> {
    if weights.len() != channel.k() {
        return Err(Error::LengthMismatch {
            expected: channel.k(),
            actual: weights.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn marginal_unchecked(weights: &[f64], rows: &[Binary]) -> Binary {
    let mut q = [0.0, 0.0];
    for (w, row) in weights.iter().zip(rows) {
        q[0] += w * row[0];
        q[1] += w * row[1];
    }
    q
}

/// Output distribution of the mixture: `P(z) = sum_k w_k rows[k][z]`.
pub fn marginal(weights: &WeightVector, channel: &Channel) -> Result<Binary> {
    check_len(weights, channel)?;
    Ok(marginal_unchecked(weights.as_slice(), channel.rows()))
}

pub(crate) fn mutual_information_unchecked(weights: &[f64], rows: &[Binary]) -> f64 {
    let q = marginal_unchecked(weights, rows);
    let mi: f64 = weights
        .iter()
        .zip(rows)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, row)| w * kl_unchecked(row, &q))
        .sum();
    nonneg(mi)
}

/// `I(Omega; Z)` where `Omega ~ weights` selects the detector.
pub fn mutual_information(weights: &WeightVector, channel: &Channel) -> Result<Nats> {
    check_len(weights, channel)?;
    Ok(mutual_information_unchecked(
        weights.as_slice(),
        channel.rows(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretDecomposition {
    /// `E_Omega[ D_KL(rows[Omega] || q) ]`
    pub expected_regret: Nats,
    pub mi: Nats,
    /// `D_KL(marginal || q)`
    pub gap: Nats,
}

/// Splits the expected regret of predicting with `q` into the mutual
/// information plus the divergence of the marginal from `q`.
pub fn regret_decomposition(
    weights: &WeightVector,
    channel: &Channel,
    q: &Binary,
) -> Result<RegretDecomposition> {
    check_len(weights, channel)?;
    let expected_regret: f64 = weights
        .as_slice()
        .iter()
        .zip(channel.rows())
        .map(|(w, row)| w * kl_divergence(row, q))
        .sum();
    let mi = mutual_information(weights, channel)?;
    let p = marginal(weights, channel)?;
    Ok(RegretDecomposition {
        expected_regret: nonneg(expected_regret),
        mi,
        gap: kl_divergence(&p, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_channel;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn ch(rows: &[Binary]) -> Channel {
        validate_channel(rows).unwrap()
    }

    // 0.9 ln 9 + 0.1 ln(1/9) = 0.8 ln 9
    const KL_09_01: f64 = 1.757_779_661_868_975_6;
    // ln 2 - H_b(0.1)
    const BSC_01: f64 = 0.368_064_207_168_497;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) - LN_2).abs() < 1e-15);
        let expected = 0.9 * 9f64.ln() + 0.1 * (1.0f64 / 9.0).ln();
        assert!((expected - KL_09_01).abs() < 1e-15);
        assert!((kl_divergence(&[0.9, 0.1], &[0.1, 0.9]) - KL_09_01).abs() < 1e-12);
    }

    #[test]
    fn kl_is_finite_on_zero_denominator() {
        let d = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]);
        assert!(d.is_finite() && d > 10.0);
    }

    #[test]
    fn marginal_examples() {
        let m = marginal(&w(&[0.5, 0.5]), &ch(&[[0.8, 0.2], [0.4, 0.6]])).unwrap();
        assert!((m[0] - 0.6).abs() < 1e-15 && (m[1] - 0.4).abs() < 1e-15);
        let m = marginal(&w(&[1.0, 0.0]), &ch(&[[0.8, 0.2], [0.4, 0.6]])).unwrap();
        assert_eq!(m, [0.8, 0.2]);
        let m = marginal(&WeightVector::uniform(4), &ch(&[[0.3, 0.7]; 4])).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        let err = marginal(&WeightVector::uniform(3), &ch(&[[0.5, 0.5]])).unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                expected: 1,
                actual: 3
            }
        );
        assert!(mutual_information(&WeightVector::uniform(2), &ch(&[[0.5, 0.5]])).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        assert_eq!(
            mutual_information(&WeightVector::uniform(3), &ch(&[[0.2, 0.8]; 3])).unwrap(),
            0.0
        );
        let mi = mutual_information(&w(&[0.5, 0.5]), &ch(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert!((mi - LN_2).abs() < 1e-15);
        // per-row term 0.9 ln(0.9/0.5) + 0.1 ln(0.1/0.5)
        let row_term = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((row_term - BSC_01).abs() < 1e-15);
        assert!((LN_2 - binary_entropy(0.1) - BSC_01).abs() < 1e-15);
        let mi = mutual_information(&w(&[0.5, 0.5]), &ch(&[[0.9, 0.1], [0.1, 0.9]])).unwrap();
        assert!((mi - BSC_01).abs() < 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let weights = w(&[0.3, 0.7]);
        let channel = ch(&[[0.8, 0.2], [0.25, 0.75]]);
        let q = marginal(&weights, &channel).unwrap();
        let d = regret_decomposition(&weights, &channel, &q).unwrap();
        assert!(d.gap <= 1e-15);
        assert!((d.expected_regret - d.mi).abs() < 1e-15);

        let d = regret_decomposition(
            &WeightVector::uniform(2),
            &ch(&[[0.4, 0.6]; 2]),
            &[0.4, 0.6],
        )
        .unwrap();
        assert_eq!((d.expected_regret, d.mi, d.gap), (0.0, 0.0, 0.0));

        let d = regret_decomposition(&w(&[0.5, 0.5]), &ch(&[[0.9, 0.1], [0.1, 0.9]]), &[0.5, 0.5])
            .unwrap();
        assert!((d.expected_regret - BSC_01).abs() < 1e-12);
        assert!((d.mi - BSC_01).abs() < 1e-12);
        assert_eq!(d.gap, 0.0);
    }

    fn arb_binary() -> impl Strategy<Value = Binary> {
        (0.0..=1.0f64).prop_map(|p| [1.0 - p, p])
    }

    fn arb_weights_channel() -> impl Strategy<Value = (WeightVector, Channel)> {
        (1usize..6).prop_flat_map(|k| {
            (
                prop::collection::vec(0.001..1.0f64, k),
                prop::collection::vec(arb_binary(), k),
            )
                .prop_map(|(raw, rows)| {
                    let s: f64 = raw.iter().sum();
                    (
                        WeightVector::new(raw.iter().map(|x| x / s).collect()).unwrap(),
                        validate_channel(&rows).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_self(p in arb_binary(), q in arb_binary()) {
            prop_assert!(kl_divergence(&p, &q) >= 0.0);
            prop_assert!(kl_divergence(&p, &p) <= 1e-15);
        }

        #[test]
        fn mi_bounded_by_ln2((weights, channel) in arb_weights_channel()) {
            let mi = mutual_information(&weights, &channel).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= LN_2 + 1e-12);
        }

        #[test]
        fn mi_equals_regret_at_marginal((weights, channel) in arb_weights_channel()) {
            let q = marginal(&weights, &channel).unwrap();
            let d = regret_decomposition(&weights, &channel, &q).unwrap();
            prop_assert!((d.expected_regret - d.mi).abs() <= 1e-12);
        }

        #[test]
        fn mi_is_concave(
            rows in prop::collection::vec(arb_binary(), 3),
            a in prop::collection::vec(0.001..1.0f64, 3),
            b in prop::collection::vec(0.001..1.0f64, 3),
        ) {
            let channel = validate_channel(&rows).unwrap();
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
            let (a, b) = (norm(&a), norm(&b));
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
            let mi = |v: &[f64]| mutual_information_unchecked(v, channel.rows());
            prop_assert!(mi(&mid) >= 0.5 * mi(&a) + 0.5 * mi(&b) - 1e-10);
        }
    }
}
