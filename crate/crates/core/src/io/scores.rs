//! Detector score files.
//!
//! `csv_wide` columns, in order:
//! `sample_id, role, algorithm, loss, norm, epsilon, fooled, det_0 .. det_{K-1}`.
//! Absent optional fields are empty strings. Lines starting with `#` are
//! comments. `jsonl` holds one object per line with the same field names,
//! absent fields as `null`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{AttackKey, Loss, Norm, Role, ScoreRecord};

const FIXED_COLUMNS: [&str; 7] = [
    "sample_id",
    "role",
    "algorithm",
    "loss",
    "norm",
    "epsilon",
    "fooled",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    CsvWide,
    Jsonl,
}

impl ScoreFormat {
    /// Picks the format from a file extension: `.jsonl` / `.ndjson`, else CSV.
    pub fn from_path(path: &Path) -> ScoreFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => ScoreFormat::Jsonl,
            _ => ScoreFormat::CsvWide,
        }
    }
}

impl FromStr for ScoreFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv_wide" | "csv" => Ok(ScoreFormat::CsvWide),
            "jsonl" => Ok(ScoreFormat::Jsonl),
            _ => Err(format!(
                "unknown score format '{s}' (expected csv_wide or jsonl)"
            )),
        }
    }
}

impl fmt::Display for ScoreFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreFormat::CsvWide => "csv_wide",
            ScoreFormat::Jsonl => "jsonl",
        })
    }
}

/// Raw field values of one row, before typing.
struct RawRow<'a> {
    sample_id: &'a str,
    role: &'a str,
    algorithm: Option<&'a str>,
    loss: Option<&'a str>,
    norm: Option<&'a str>,
    epsilon: Option<f64>,
    fooled: Option<bool>,
    scores: Vec<f64>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn build_record(line: usize, raw: RawRow<'_>) -> Result<ScoreRecord> {
    let role = Role::from_str(raw.role).map_err(|e| parse_err(line, e))?;
    let loss = raw
        .loss
        .map(Loss::from_str)
        .transpose()
        .map_err(|e| parse_err(line, e))?;
    let norm = raw
        .norm
        .map(Norm::from_str)
        .transpose()
        .map_err(|e| parse_err(line, e))?;

    let has_attack_fields =
        raw.algorithm.is_some() || loss.is_some() || norm.is_some() || raw.epsilon.is_some();
    let invalid = |reason: String| Error::Validation { line, reason };
    let attack = match raw.algorithm {
        Some(algorithm) => Some(AttackKey {
            algorithm: algorithm.to_string(),
            loss,
            norm: norm.unwrap_or(Norm::Unconstrained),
            epsilon: raw.epsilon,
        }),
        None if has_attack_fields => {
            return Err(invalid("attack fields given without an algorithm".into()))
        }
        None => None,
    };
    let fooled = match (role, raw.fooled) {
        (Role::Adversarial, None) => {
            return Err(invalid("adversarial record needs a fooled flag".into()))
        }
        (_, f) => f.unwrap_or(false),
    };
    let record = ScoreRecord {
        sample_id: raw.sample_id.to_string(),
        role,
        attack,
        fooled,
        scores: raw.scores,
    };
    record.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(record)
}

fn parse_bool(line: usize, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(parse_err(line, format!("invalid boolean '{s}'"))),
    }
}

fn parse_f64(line: usize, field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("{field}: invalid number '{s}'")))
}

fn non_empty(s: &str) -> Option<&str> {
    let s = s.trim();
    (!s.is_empty()).then_some(s)
}

pub fn parse_csv(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let header_line = reader.position().line().max(1) as usize;
    if header.len() < FIXED_COLUMNS.len() + 1 {
        return Err(parse_err(
            header_line,
            "header needs the 7 fixed columns and at least one det_k column",
        ));
    }
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *name {
            return Err(parse_err(
                header_line,
                format!("column {i} must be '{name}', found '{}'", &header[i]),
            ));
        }
    }
    for (k, name) in header.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if name != format!("det_{k}") {
            return Err(parse_err(
                header_line,
                format!("expected column 'det_{k}', found '{name}'"),
            ));
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let epsilon = non_empty(&row[5])
            .map(|s| parse_f64(line, "epsilon", s))
            .transpose()?;
        let fooled = non_empty(&row[6])
            .map(|s| parse_bool(line, s))
            .transpose()?;
        let scores = (FIXED_COLUMNS.len()..row.len())
            .map(|i| parse_f64(line, &header[i], &row[i]))
            .collect::<Result<Vec<_>>>()?;
        records.push(build_record(
            line,
            RawRow {
                sample_id: &row[0],
                role: &row[1],
                algorithm: non_empty(&row[2]),
                loss: non_empty(&row[3]),
                norm: non_empty(&row[4]),
                epsilon,
                fooled,
                scores,
            },
        )?);
    }
    Ok(records)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut records = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw_line).map_err(|e| parse_err(line, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err(line, "expected a JSON object"))?;

        let string = |key: &str| -> Result<Option<&str>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(non_empty(s)),
                Some(other) => Err(parse_err(
                    line,
                    format!("{key}: expected string, got {other}"),
                )),
            }
        };
        let sample_id = string("sample_id")?.ok_or_else(|| parse_err(line, "missing sample_id"))?;
        let role = string("role")?.ok_or_else(|| parse_err(line, "missing role"))?;
        let epsilon = match obj.get("epsilon") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_f64()
                    .ok_or_else(|| parse_err(line, format!("epsilon: invalid number {v}")))?,
            ),
        };
        let fooled = match obj.get("fooled") {
            None | Some(Value::Null) => None,
            Some(Value::Bool(b)) => Some(*b),
            Some(v) => {
                return Err(parse_err(
                    line,
                    format!("fooled: expected boolean, got {v}"),
                ))
            }
        };
        let mut scores = Vec::new();
        while let Some(v) = obj.get(&format!("det_{}", scores.len())) {
            let k = scores.len();
            scores.push(
                v.as_f64()
                    .ok_or_else(|| parse_err(line, format!("det_{k}: invalid number {v}")))?,
            );
        }
        if let Some(extra) = obj
            .keys()
            .find(|key| !FIXED_COLUMNS.contains(&key.as_str()) && !is_det_key(key, scores.len()))
        {
            return Err(parse_err(line, format!("unexpected field '{extra}'")));
        }
        records.push(build_record(
            line,
            RawRow {
                sample_id,
                role,
                algorithm: string("algorithm")?,
                loss: string("loss")?,
                norm: string("norm")?,
                epsilon,
                fooled,
                scores,
            },
        )?);
    }
    Ok(records)
}

fn is_det_key(key: &str, k: usize) -> bool {
    key.strip_prefix("det_")
        .and_then(|n| n.parse::<usize>().ok())
        .is_some_and(|n| n < k)
}

pub fn read_scores(path: &Path, format: ScoreFormat) -> Result<Vec<ScoreRecord>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format {
        ScoreFormat::CsvWide => parse_csv(&text),
        ScoreFormat::Jsonl => parse_jsonl(&text),
    }
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn detector_count(records: &[ScoreRecord]) -> Result<usize> {
    let k = records.first().map_or(0, |r| r.scores.len());
    if let Some(r) = records.iter().find(|r| r.scores.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: r.scores.len(),
        });
    }
    Ok(k)
}

/// CSV text; every `comment` line is written first, prefixed with `# `.
pub fn format_csv(records: &[ScoreRecord], comments: &[String]) -> Result<String> {
    let k = detector_count(records)?;
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let header: Vec<String> = FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..k).map(|i| format!("det_{i}")))
        .collect();
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(&header).map_err(io_err)?;
    for r in records {
        let key = r.attack.as_ref();
        let mut row = vec![
            r.sample_id.clone(),
            r.role.as_str().to_string(),
            opt_str(key.map(|a| a.algorithm.as_str())),
            opt_str(key.and_then(|a| a.loss)),
            opt_str(key.map(|a| a.norm)),
            opt_str(key.and_then(|a| a.epsilon)),
            match r.role {
                Role::Adversarial => r.fooled.to_string(),
                Role::Natural => String::new(),
            },
        ];
        row.extend(r.scores.iter().map(|s| s.to_string()));
        writer.write_record(&row).map_err(io_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn format_jsonl(records: &[ScoreRecord]) -> Result<String> {
    detector_count(records)?;
    let mut out = String::new();
    for r in records {
        let key = r.attack.as_ref();
        let s = |v: Option<String>| v.map_or(Value::Null, Value::String);
        let mut obj = Map::new();
        obj.insert("sample_id".into(), Value::String(r.sample_id.clone()));
        obj.insert("role".into(), Value::String(r.role.as_str().into()));
        obj.insert("algorithm".into(), s(key.map(|a| a.algorithm.clone())));
        obj.insert(
            "loss".into(),
            s(key.and_then(|a| a.loss).map(|l| l.to_string())),
        );
        obj.insert("norm".into(), s(key.map(|a| a.norm.to_string())));
        obj.insert(
            "epsilon".into(),
            key.and_then(|a| a.epsilon).map_or(Value::Null, Value::from),
        );
        obj.insert(
            "fooled".into(),
            match r.role {
                Role::Adversarial => Value::Bool(r.fooled),
                Role::Natural => Value::Null,
            },
        );
        for (k, score) in r.scores.iter().enumerate() {
            obj.insert(format!("det_{k}"), Value::from(*score));
        }
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn write_scores(
    path: &Path,
    records: &[ScoreRecord],
    format: ScoreFormat,
    comments: &[String],
) -> Result<()> {
    let text = match format {
        ScoreFormat::CsvWide => format_csv(records, comments)?,
        ScoreFormat::Jsonl => format_jsonl(records)?,
    };
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
