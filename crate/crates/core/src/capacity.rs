//! Per-input weight optimization: maximize `I(Omega; Z)` over the simplex.
//!
//! The objective is the capacity of a K-input, binary-output channel, so the
//! solver is the classical multiplicative fixed-point iteration
//!
//! ```text
//! q     = sum_k w_k rows[k]
//! D_k   = KL(rows[k] || q)
//! w_k  <- w_k exp(D_k) / Z
//! ```
//!
//! Each step does not decrease the mutual information, and
//! `max_k D_k - sum_k w_k D_k` bounds the distance to capacity from above,
//! which gives the stopping rule. [`grid_oracle`] enumerates a simplex lattice
//! for small K and is used to cross-check the iteration.

use crate::error::{Error, Result};
use crate::infotheory::{kl_unchecked, marginal_unchecked, mutual_information_unchecked, Nats};
use crate::types::{Channel, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the duality gap is at most this many nats.
    pub tolerance: Nats,
    pub max_iterations: usize,
    /// Starting point; uniform when absent. Entries must be strictly positive.
    pub initial_weights: Option<WeightVector>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 10_000,
            initial_weights: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub weights: WeightVector,
    /// Mutual information at `weights`.
    pub capacity: Nats,
    pub iterations: usize,
    pub converged: bool,
    /// `max_k KL(rows[k] || marginal) - capacity` at termination.
    pub final_gap: Nats,
}

/// State after one evaluation of the fixed-point map.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub iteration: usize,
    pub weights: Vec<f64>,
    /// Mutual information at `weights`.
    pub capacity: Nats,
    /// `max_k D_k`, an upper bound on the true capacity.
    pub upper_bound: Nats,
    pub gap: Nats,
}

/// Iterator over the multiplicative updates. Each item reports the objective
/// at the current weights; the weights are updated after the item is produced.
/// Runs forever unless the caller stops it.
pub struct CapacityIterations<'a> {
    rows: &'a [[f64; 2]],
    weights: Vec<f64>,
    divergences: Vec<f64>,
    iteration: usize,
}

impl<'a> CapacityIterations<'a> {
    pub fn new(channel: &'a Channel, initial: Option<&WeightVector>) -> Result<Self> {
        let weights = match initial {
            Some(w) => {
                if w.len() != channel.k() {
                    return Err(Error::LengthMismatch {
                        expected: channel.k(),
                        actual: w.len(),
                    });
                }
                if let Some(index) = w.as_slice().iter().position(|&x| x <= 0.0) {
                    return Err(Error::ZeroInitialWeight { index });
                }
                w.as_slice().to_vec()
            }
            None => WeightVector::uniform(channel.k()).as_slice().to_vec(),
        };
        Ok(CapacityIterations {
            rows: channel.rows(),
            divergences: vec![0.0; weights.len()],
            weights,
            iteration: 0,
        })
    }

    fn evaluate(&mut self) -> IterationState {
        let q = marginal_unchecked(&self.weights, self.rows);
        for (d, row) in self.divergences.iter_mut().zip(self.rows) {
            *d = kl_unchecked(row, &q);
        }
        let capacity: f64 = self
            .weights
            .iter()
            .zip(&self.divergences)
            .map(|(w, d)| w * d)
            .sum::<f64>()
            .max(0.0);
        let upper_bound = self
            .divergences
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        IterationState {
            iteration: self.iteration,
            weights: self.weights.clone(),
            capacity,
            upper_bound,
            gap: (upper_bound - capacity).max(0.0),
        }
    }

    fn update(&mut self) {
        // shift by the max divergence so exp() never overflows
        let shift = self
            .divergences
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (w, d) in self.weights.iter_mut().zip(&self.divergences) {
            *w *= (d - shift).exp();
            z += *w;
        }
        for w in &mut self.weights {
            *w /= z;
        }
    }
}

impl Iterator for CapacityIterations<'_> {
    type Item = IterationState;

    fn next(&mut self) -> Option<IterationState> {
        if self.iteration > 0 {
            self.update();
        }
        self.iteration += 1;
        Some(self.evaluate())
    }
}

/// Maximizes the mutual information between the detector index and the
/// binary output.
pub fn solve_capacity(channel: &Channel, config: &SolverConfig) -> Result<SolverResult> {
    config.validate()?;
    let mut steps = CapacityIterations::new(channel, config.initial_weights.as_ref())?;
    let mut last = steps.next().expect("capacity iteration is unbounded");
    let mut converged = last.gap <= config.tolerance;
    while !converged && last.iteration < config.max_iterations {
        last = steps.next().expect("capacity iteration is unbounded");
        converged = last.gap <= config.tolerance;
    }
    Ok(SolverResult {
        weights: WeightVector::from_normalized(last.weights),
        capacity: last.capacity,
        iterations: last.iteration,
        converged,
        final_gap: last.gap,
    })
}

const MAX_ORACLE_DETECTORS: usize = 4;

/// Exhaustive search over the lattice `{0, 1/R, ..., 1}^K` intersected with
/// the simplex. Ties go to the lexicographically smallest weight vector.
pub fn grid_oracle(channel: &Channel, resolution: usize) -> Result<SolverResult> {
    let k = channel.k();
    if k > MAX_ORACLE_DETECTORS {
        return Err(Error::TooManyDetectors(k));
    }
    if resolution < 2 {
        return Err(Error::ResolutionTooSmall(resolution));
    }

    let rows = channel.rows();
    let r = resolution as f64;
    let mut counts = vec![0usize; k];
    let mut weights = vec![0.0; k];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut visited = 0usize;

    // odometer over compositions of `resolution` into k parts, in lexicographic order
    loop {
        let used: usize = counts[..k - 1].iter().sum();
        if used <= resolution {
            counts[k - 1] = resolution - used;
            for (w, &c) in weights.iter_mut().zip(&counts) {
                *w = c as f64 / r;
            }
            visited += 1;
            let mi = mutual_information_unchecked(&weights, rows);
            let better = match &best {
                None => true,
                Some((b, _)) => mi > *b + 1e-14,
            };
            if better {
                best = Some((mi, weights.clone()));
            }
        }
        // advance the first k-1 digits, last digit fastest
        let mut pos = k - 1;
        loop {
            if pos == 0 {
                let (capacity, w) = best.expect("lattice has at least one point");
                let gap = oracle_gap(&w, rows, capacity);
                return Ok(SolverResult {
                    weights: WeightVector::from_normalized(w),
                    capacity,
                    iterations: visited,
                    converged: true,
                    final_gap: gap,
                });
            }
            pos -= 1;
            counts[pos] += 1;
            if counts[..=pos].iter().sum::<usize>() <= resolution {
                break;
            }
            counts[pos] = 0;
        }
    }
}

fn oracle_gap(weights: &[f64], rows: &[[f64; 2]], capacity: f64) -> f64 {
    let q = marginal_unchecked(weights, rows);
    let max_d = rows
        .iter()
        .map(|row| kl_unchecked(row, &q))
        .fold(f64::NEG_INFINITY, f64::max);
    (max_d - capacity).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::{binary_entropy, mutual_information};
    use crate::types::validate_channel;
    use std::f64::consts::LN_2;

    fn ch(rows: &[[f64; 2]]) -> Channel {
        validate_channel(rows).unwrap()
    }

    #[test]
    fn identical_rows_converge_immediately() {
        let r = solve_capacity(&ch(&[[0.3, 0.7]; 3]), &SolverConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.capacity, 0.0);
        assert_eq!(r.weights, WeightVector::uniform(3));
    }

    #[test]
    fn single_detector() {
        let r = solve_capacity(&ch(&[[0.2, 0.8]]), &SolverConfig::default()).unwrap();
        assert_eq!(r.weights.as_slice(), &[1.0]);
        assert_eq!(r.capacity, 0.0);
    }

    #[test]
    fn symmetric_channel() {
        let channel = ch(&[[0.9, 0.1], [0.1, 0.9]]);
        let r = solve_capacity(&channel, &SolverConfig::default()).unwrap();
        let expected = LN_2 - binary_entropy(0.1);
        assert!((r.capacity - expected).abs() < 1e-10);
        assert!((r.weights.as_slice()[0] - 0.5).abs() < 1e-9);
        let oracle = grid_oracle(&channel, 10_000).unwrap();
        assert!((oracle.capacity - r.capacity).abs() < 1e-8);
        assert!((oracle.weights.as_slice()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_initial_weight_rejected() {
        let cfg = SolverConfig {
            initial_weights: Some(WeightVector::new(vec![1.0, 0.0]).unwrap()),
            ..SolverConfig::default()
        };
        let err = solve_capacity(&ch(&[[0.9, 0.1], [0.1, 0.9]]), &cfg).unwrap_err();
        assert_eq!(err, Error::ZeroInitialWeight { index: 1 });
    }

    #[test]
    fn invalid_config_rejected() {
        let channel = ch(&[[0.5, 0.5]]);
        let cfg = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_capacity(&channel, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_capacity(&channel, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let cfg = SolverConfig {
            max_iterations: 3,
            tolerance: 1e-300,
            ..SolverConfig::default()
        };
        let r = solve_capacity(&ch(&[[0.9, 0.1], [0.6, 0.4], [0.2, 0.8]]), &cfg).unwrap();
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);
    }

    #[test]
    fn capacity_matches_weights() {
        let channel = ch(&[[0.95, 0.05], [0.6, 0.4], [0.3, 0.7], [0.02, 0.98]]);
        let r = solve_capacity(&channel, &SolverConfig::default()).unwrap();
        let mi = mutual_information(&r.weights, &channel).unwrap();
        assert!((mi - r.capacity).abs() < 1e-9);
        assert!(r.converged);
        assert!(r.final_gap <= 1e-10);
    }

    #[test]
    fn oracle_noiseless_and_trivial() {
        let r = grid_oracle(&ch(&[[1.0, 0.0], [0.0, 1.0]]), 100).unwrap();
        assert_eq!(r.weights.as_slice(), &[0.5, 0.5]);
        assert!((r.capacity - LN_2).abs() < 1e-15);
        let r = grid_oracle(&ch(&[[0.4, 0.6]]), 10).unwrap();
        assert_eq!(r.weights.as_slice(), &[1.0]);
        assert_eq!(r.capacity, 0.0);
    }

    #[test]
    fn oracle_point_count() {
        // C(R + K - 1, K - 1)
        let r = grid_oracle(&ch(&[[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]]), 10).unwrap();
        assert_eq!(r.iterations, 66);
        let r = grid_oracle(&ch(&[[0.9, 0.1], [0.5, 0.5], [0.2, 0.8], [0.1, 0.9]]), 6).unwrap();
        assert_eq!(r.iterations, 84);
    }

    #[test]
    fn oracle_tie_breaks_lexicographically() {
        // identical rows: every lattice point ties at 0
        let r = grid_oracle(&ch(&[[0.3, 0.7]; 3]), 4).unwrap();
        assert_eq!(r.weights.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn oracle_guards() {
        assert_eq!(
            grid_oracle(&ch(&[[0.5, 0.5]; 5]), 10).unwrap_err(),
            Error::TooManyDetectors(5)
        );
        assert_eq!(
            grid_oracle(&ch(&[[0.5, 0.5]; 2]), 1).unwrap_err(),
            Error::ResolutionTooSmall(1)
        );
    }
}
