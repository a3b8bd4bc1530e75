//! Python bindings for the capmix crate.

use std::path::PathBuf;

use capmix::io::{self, ScoreFormat, SyntheticConfig};
use capmix::mead::EvaluateOptions;
use capmix::types::{CellSpec, Norm};
use capmix::{Binary, ClassDistribution, Error, WeightVector};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(msg) => PyOSError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn channel(rows: Vec<Binary>) -> PyResult<capmix::Channel> {
    capmix::validate_channel(&rows).map_err(py_err)
}

fn solver_config(
    tol: f64,
    max_iter: usize,
    initial: Option<Vec<f64>>,
) -> PyResult<capmix::SolverConfig> {
    let initial_weights = initial.map(WeightVector::new).transpose().map_err(py_err)?;
    let config = capmix::SolverConfig {
        tolerance: tol,
        max_iterations: max_iter,
        initial_weights,
    };
    config.validate().map_err(py_err)?;
    Ok(config)
}

fn distribution(p: Vec<f64>) -> PyResult<ClassDistribution> {
    ClassDistribution::new(p).map_err(py_err)
}

#[pyclass(frozen, get_all, module = "pycapmix")]
pub struct SolverResult {
    weights: Vec<f64>,
    capacity: f64,
    iterations: usize,
    converged: bool,
    final_gap: f64,
}

#[pymethods]
impl SolverResult {
    fn __repr__(&self) -> String {
        format!(
            "SolverResult(weights={:?}, capacity={}, iterations={}, converged={})",
            self.weights, self.capacity, self.iterations, self.converged
        )
    }
}

impl From<capmix::SolverResult> for SolverResult {
    fn from(r: capmix::SolverResult) -> Self {
        SolverResult {
            weights: r.weights.as_slice().to_vec(),
            capacity: r.capacity,
            iterations: r.iterations,
            converged: r.converged,
            final_gap: r.final_gap,
        }
    }
}

#[pyclass(frozen, get_all, module = "pycapmix")]
pub struct MixtureScore {
    p_adversarial: f64,
    weights: Vec<f64>,
    capacity: f64,
}

#[pymethods]
impl MixtureScore {
    /// True when `p_adversarial > gamma`.
    fn detect(&self, gamma: f64) -> PyResult<bool> {
        let score = capmix::MixtureScore {
            p_adversarial: self.p_adversarial,
            weights: WeightVector::uniform(1),
            capacity: self.capacity,
        };
        capmix::detect(&score, gamma).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "MixtureScore(p_adversarial={}, weights={:?}, capacity={})",
            self.p_adversarial, self.weights, self.capacity
        )
    }
}

/// Checks a K x 2 channel and returns it unchanged.
#[pyfunction]
fn validate_channel(rows: Vec<Binary>) -> PyResult<Vec<Binary>> {
    Ok(channel(rows)?.rows().to_vec())
}

#[pyfunction]
#[pyo3(signature = (rows, tol = 1e-10, max_iter = 10_000, initial_weights = None))]
fn solve_capacity(
    rows: Vec<Binary>,
    tol: f64,
    max_iter: usize,
    initial_weights: Option<Vec<f64>>,
) -> PyResult<SolverResult> {
    let config = solver_config(tol, max_iter, initial_weights)?;
    capmix::solve_capacity(&channel(rows)?, &config)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn grid_oracle(rows: Vec<Binary>, resolution: usize) -> PyResult<SolverResult> {
    capmix::grid_oracle(&channel(rows)?, resolution)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn mutual_information(weights: Vec<f64>, rows: Vec<Binary>) -> PyResult<f64> {
    let w = WeightVector::new(weights).map_err(py_err)?;
    capmix::mutual_information(&w, &channel(rows)?).map_err(py_err)
}

#[pyfunction]
fn kl_divergence(p: Binary, q: Binary) -> PyResult<f64> {
    for d in [&p, &q] {
        channel(vec![*d])?;
    }
    Ok(capmix::kl_divergence(&p, &q))
}

/// Returns `(expected_regret, mi, gap)`.
#[pyfunction]
fn regret_decomposition(
    weights: Vec<f64>,
    rows: Vec<Binary>,
    q: Binary,
) -> PyResult<(f64, f64, f64)> {
    let w = WeightVector::new(weights).map_err(py_err)?;
    channel(vec![q])?;
    let d = capmix::regret_decomposition(&w, &channel(rows)?, &q).map_err(py_err)?;
    Ok((d.expected_regret, d.mi, d.gap))
}

/// Mixture detector for one input given each detector's P(adversarial).
#[pyfunction]
#[pyo3(signature = (scores, tol = 1e-10, max_iter = 10_000))]
fn aggregate(scores: Vec<f64>, tol: f64, max_iter: usize) -> PyResult<MixtureScore> {
    let config = solver_config(tol, max_iter, None)?;
    let c = capmix::Channel::from_scores(&scores).map_err(py_err)?;
    let m = capmix::aggregate(&c, &config).map_err(py_err)?;
    Ok(MixtureScore {
        p_adversarial: m.p_adversarial,
        weights: m.weights.as_slice().to_vec(),
        capacity: m.capacity,
    })
}

#[pyfunction]
fn detect(score: &MixtureScore, gamma: f64) -> PyResult<bool> {
    score.detect(gamma)
}

#[pyfunction]
fn ace_loss(truth: Vec<f64>, adv: Vec<f64>) -> PyResult<f64> {
    capmix::ace_loss(&distribution(truth)?, &distribution(adv)?).map_err(py_err)
}

#[pyfunction]
fn kl_loss(clean: Vec<f64>, adv: Vec<f64>) -> PyResult<f64> {
    capmix::kl_loss(&distribution(clean)?, &distribution(adv)?).map_err(py_err)
}

#[pyfunction]
fn fr_loss(clean: Vec<f64>, adv: Vec<f64>) -> PyResult<f64> {
    capmix::fr_loss(&distribution(clean)?, &distribution(adv)?).map_err(py_err)
}

#[pyfunction]
fn gini_loss(adv: Vec<f64>) -> PyResult<f64> {
    Ok(capmix::gini_loss(&distribution(adv)?))
}

#[pyfunction]
fn auroc(positives: Vec<f64>, negatives: Vec<f64>) -> PyResult<f64> {
    capmix::auroc(&positives, &negatives).map_err(py_err)
}

/// Returns `(fpr, threshold)`; the threshold is `-inf` when every sample
/// must be flagged.
#[pyfunction]
#[pyo3(signature = (positives, negatives, target_tpr = 0.95))]
fn fpr_at_tpr(positives: Vec<f64>, negatives: Vec<f64>, target_tpr: f64) -> PyResult<(f64, f64)> {
    capmix::fpr_at_tpr(&positives, &negatives, target_tpr).map_err(py_err)
}

/// Expands one attack cell into attack keys such as `PGDi-KL-Linf-0.125`.
#[pyfunction]
#[pyo3(signature = (norm, epsilon, attacks))]
fn expand_group(norm: &str, epsilon: Option<f64>, attacks: Vec<String>) -> PyResult<Vec<String>> {
    let norm: Norm = norm.parse().map_err(PyValueError::new_err)?;
    let attacks = attacks
        .iter()
        .map(|a| a.parse())
        .collect::<Result<Vec<_>, String>>()
        .map_err(PyValueError::new_err)?;
    let group = capmix::expand_group(&CellSpec {
        norm,
        epsilon,
        attacks,
    })
    .map_err(py_err)?;
    Ok(group.members.iter().map(|k| k.to_string()).collect())
}

/// `(label, member count)` for each cell of the shipped attack table.
#[pyfunction]
fn default_groups() -> Vec<(String, usize)> {
    io::default_groups()
        .iter()
        .map(|g| (g.label(), g.members.len()))
        .collect()
}

/// Writes a synthetic score file and returns the number of records.
#[pyfunction]
#[pyo3(signature = (path, seed = None, config = None))]
fn generate_synthetic(
    path: PathBuf,
    seed: Option<u64>,
    config: Option<PathBuf>,
) -> PyResult<usize> {
    let mut cfg = match config {
        Some(p) => io::read_synthetic_config(&p).map_err(py_err)?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let records = io::generate_synthetic(&cfg).map_err(py_err)?;
    let comments = vec![
        format!("capmix synthetic scores; seed = {}", cfg.seed),
        io::PRNG_DESCRIPTION.to_string(),
    ];
    io::write_scores(&path, &records, ScoreFormat::from_path(&path), &comments).map_err(py_err)?;
    Ok(records.len())
}

/// Evaluates a score file and returns the JSON report. `groups=None` uses
/// the shipped attack table.
#[pyfunction]
#[pyo3(signature = (scores, groups = None, baselines = false, tol = 1e-10, max_iter = 10_000))]
fn evaluate(
    py: Python<'_>,
    scores: PathBuf,
    groups: Option<PathBuf>,
    baselines: bool,
    tol: f64,
    max_iter: usize,
) -> PyResult<String> {
    let config = solver_config(tol, max_iter, None)?;
    let groups = match groups {
        Some(p) => io::read_groups(&p).map_err(py_err)?,
        None => io::default_groups(),
    };
    let records = io::read_scores(&scores, ScoreFormat::from_path(&scores)).map_err(py_err)?;
    let options = EvaluateOptions {
        baselines,
        roc: false,
    };
    let report = py
        .detach(|| capmix::evaluate(&records, &groups, &config, &options))
        .map_err(py_err)?;
    Ok(io::report_json(&report))
}

#[pymodule]
fn pycapmix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SolverResult>()?;
    m.add_class::<MixtureScore>()?;
    m.add_function(wrap_pyfunction!(validate_channel, m)?)?;
    m.add_function(wrap_pyfunction!(solve_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(grid_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(regret_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(ace_loss, m)?)?;
    m.add_function(wrap_pyfunction!(kl_loss, m)?)?;
    m.add_function(wrap_pyfunction!(fr_loss, m)?)?;
    m.add_function(wrap_pyfunction!(gini_loss, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(fpr_at_tpr, m)?)?;
    m.add_function(wrap_pyfunction!(expand_group, m)?)?;
    m.add_function(wrap_pyfunction!(default_groups, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
