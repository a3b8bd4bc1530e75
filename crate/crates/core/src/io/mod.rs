//! File formats: score matrices, group configs, synthetic scenarios, reports.

mod groups;
mod scores;
mod synth;

use std::fs;
use std::path::Path;

pub use groups::{default_groups, expand_cells, parse_groups, read_groups, CellEntry, ATTACK_TABLE_TOML};
pub use scores::{
    format_csv, format_jsonl, parse_csv, parse_jsonl, read_scores, write_scores, ScoreFormat,
};
pub use synth::{
    generate_synthetic, parse_synthetic_config, read_synthetic_config, BetaParams, DetectorProfile,
    Sampler, SyntheticConfig, PRNG_DESCRIPTION, SYNTHETIC_TOML,
};

use crate::error::{Error, Result};
use crate::mead::{EvaluationReport, RocPoint};
use crate::types::Binary;

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn report_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(path: &Path, report: &EvaluationReport) -> Result<()> {
    fs::write(path, report_json(report)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// `threshold,fpr,tpr,true_positives,false_positives` rows.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr,true_positives,false_positives\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.threshold, p.fpr, p.tpr, p.true_positives, p.false_positives
        ));
    }
    out
}

/// Parses a comma-separated list of numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: 1,
                reason: format!("invalid number '{}'", t.trim()),
            })
        })
        .collect()
}

/// Parses channel rows written as `a,b;c,d` or one `a,b` pair per line.
/// Blank lines and `#` comments are ignored.
pub fn parse_rows(text: &str) -> Result<Vec<Binary>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for chunk in line.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let values = parse_vector(chunk).map_err(|e| match e {
                Error::Parse { reason, .. } => Error::Parse {
                    line: i + 1,
                    reason,
                },
                other => other,
            })?;
            match values.as_slice() {
                [a, b] => rows.push([*a, *b]),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        reason: format!("row '{chunk}' must have exactly two entries"),
                    })
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "no channel rows".into(),
        });
    }
    Ok(rows)
}
