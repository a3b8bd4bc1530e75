//! Attack-group configuration (TOML).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{expand_group, AttackGroup, AttackTag, CellSpec, Norm};

/// The multi-armed attack table: 24 (norm, epsilon) cells, 134 variants.
pub const ATTACK_TABLE_TOML: &str = include_str!("../../data/attack_table.toml");

/// One `[[cell]]` entry as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub norm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub attacks: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupsFile {
    #[serde(default)]
    cell: Vec<CellEntry>,
}

pub(crate) fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        reason: err.message().to_string(),
    }
}

impl CellEntry {
    pub fn to_spec(&self) -> std::result::Result<CellSpec, String> {
        let norm: Norm = self.norm.parse()?;
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(format!("epsilon {eps} must be a nonnegative number"));
            }
        }
        let attacks = self
            .attacks
            .iter()
            .map(|a| a.parse::<AttackTag>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(CellSpec {
            norm,
            epsilon: self.epsilon,
            attacks,
        })
    }
}

/// Expands a list of cells; each must have at least one attack.
pub fn expand_cells(cells: &[CellEntry]) -> Result<Vec<AttackGroup>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let spec = cell.to_spec().map_err(|reason| Error::Parse {
                line: 0,
                reason: format!("cell {i}: {reason}"),
            })?;
            expand_group(&spec)
        })
        .collect()
}

pub fn parse_groups(text: &str) -> Result<Vec<AttackGroup>> {
    let file: GroupsFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if file.cell.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "no [[cell]] entries".into(),
        });
    }
    expand_cells(&file.cell)
}

pub fn read_groups(path: &Path) -> Result<Vec<AttackGroup>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_groups(&text)
}

pub fn default_groups() -> Vec<AttackGroup> {
    parse_groups(ATTACK_TABLE_TOML).expect("shipped group table is valid")
}
