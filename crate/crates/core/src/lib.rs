//! Minimax aggregation of adversarial-example detectors.
//!
//! Given K soft-detectors evaluated on one input, the aggregated detector is
//! the mixture `sum_k w_k q_k` whose weights maximize the mutual information
//! between the detector index and the binary output, i.e. the
//! capacity-achieving input distribution of the K x 2 channel formed by the
//! detector outputs. This minimizes the worst-case expected regret over the
//! detectors.
//!
//! The crate also implements the multi-armed evaluation protocol, where a
//! clean sample attacked by several simultaneous attacks counts as detected
//! only if all of its successful attacks are flagged, and the four attacker
//! objectives (ACE, KL, Fisher-Rao, Gini) used to diversify those attacks.
//!
//! ```
//! use capmix::{aggregate, validate_channel, SolverConfig};
//!
//! let channel = validate_channel(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
//! let mix = aggregate(&channel, &SolverConfig::default()).unwrap();
//! assert!((mix.p_adversarial - 0.5).abs() < 1e-9);
//! ```

pub mod capacity;
pub mod cli;
pub mod detector;
pub mod error;
pub mod infotheory;
pub mod io;
pub mod losses;
pub mod mead;
pub mod types;

pub use capacity::{grid_oracle, solve_capacity, CapacityIterations, SolverConfig, SolverResult};
pub use detector::{aggregate, detect, score_record, MixtureScore, Scorer};
pub use error::{Error, Result};
pub use infotheory::{
    kl_divergence, marginal, mutual_information, regret_decomposition, Nats, RegretDecomposition,
};
pub use losses::{ace_loss, fr_loss, gini_loss, kl_loss, ClassDistribution};
pub use mead::{
    auroc, build_groups, evaluate, fpr_at_tpr, EvaluateOptions, EvaluationReport, GroupedScores,
};
pub use types::{
    expand_group, validate_channel, AttackGroup, AttackKey, AttackTag, Binary, CellSpec, Channel,
    Loss, Norm, Role, ScoreRecord, WeightVector,
};
