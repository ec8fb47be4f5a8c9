//! CSV loading and run configuration.
//!
//! A [`Dataset`] holds the selected source columns (in configured order) and
//! the target column, all aligned and free of missing cells. Rows where any
//! selected cell is blank, non-numeric or non-finite are dropped and counted.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the target column is turned into symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Discrete when every value is an integer and there are at most
    /// `target_alphabet` distinct values, continuous otherwise.
    #[default]
    Auto,
    /// Nominal labels, used as-is.
    Discrete,
    /// Real-valued target, discretized by maximum entropy partitioning.
    Continuous,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(TargetKind::Auto),
            "discrete" => Ok(TargetKind::Discrete),
            "continuous" => Ok(TargetKind::Continuous),
            other => Err(Error::Config(format!(
                "target_kind must be auto, discrete or continuous, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TargetKind::Auto => "auto",
            TargetKind::Discrete => "discrete",
            TargetKind::Continuous => "continuous",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub target_column: String,
    pub source_columns: Vec<String>,
    /// Symbols per source series.
    pub alphabet: usize,
    /// Symbols for a continuous target.
    pub target_alphabet: usize,
    pub target_kind: TargetKind,
    /// Embedding depth k.
    pub depth: usize,
    /// Symbols kept after repartitioning a fused pair; `None` means `alphabet`.
    pub fused_alphabet: Option<usize>,
    /// Stop once this many supernodes remain.
    pub stop_at: usize,
    pub train_fraction: f64,
    /// Seed for noise injection.
    pub seed: u64,
    pub timestamp_column: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            target_column: String::new(),
            source_columns: Vec::new(),
            alphabet: 5,
            target_alphabet: 10,
            target_kind: TargetKind::Auto,
            depth: 3,
            fused_alphabet: None,
            stop_at: 1,
            train_fraction: 0.7,
            seed: 0,
            timestamp_column: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn fused_alphabet(&self) -> usize {
        self.fused_alphabet.unwrap_or(self.alphabet)
    }

    /// Sets one field from a `key=value` pair. Dashes and underscores in keys
    /// are interchangeable so file keys can mirror CLI flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "target" | "target_column" => self.target_column = value.to_string(),
            "sources" | "source_columns" => {
                self.source_columns = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "alphabet" => self.alphabet = parse_value(&key, value)?,
            "target_alphabet" => self.target_alphabet = parse_value(&key, value)?,
            "target_kind" => self.target_kind = value.parse()?,
            "depth" => self.depth = parse_value(&key, value)?,
            "fused_alphabet" => self.fused_alphabet = Some(parse_value(&key, value)?),
            "stop_at" => self.stop_at = parse_value(&key, value)?,
            "train_fraction" => self.train_fraction = parse_value(&key, value)?,
            "seed" => self.seed = parse_value(&key, value)?,
            "timestamp" | "timestamp_column" => {
                self.timestamp_column = Some(value.to_string()).filter(|s| !s.is_empty())
            }
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a plain-text `key=value` file. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_column.is_empty() {
            return Err(Error::Config("missing --target".into()));
        }
        if self.source_columns.is_empty() {
            return Err(Error::Config("missing --sources".into()));
        }
        if self.source_columns.contains(&self.target_column) {
            return Err(Error::Config(format!(
                "target column `{}` is also listed in --sources",
                self.target_column
            )));
        }
        let mut seen = HashSet::new();
        for name in &self.source_columns {
            if !seen.insert(name) {
                return Err(Error::Config(format!("source column `{name}` listed twice")));
            }
        }
        if self.alphabet < 2 {
            return Err(Error::Config(format!(
                "--alphabet must be >= 2, got {}",
                self.alphabet
            )));
        }
        if self.target_alphabet < 2 {
            return Err(Error::Config(format!(
                "--target-alphabet must be >= 2, got {}",
                self.target_alphabet
            )));
        }
        if self.fused_alphabet() < 2 {
            return Err(Error::Config(format!(
                "--fused-alphabet must be >= 2, got {}",
                self.fused_alphabet()
            )));
        }
        if self.stop_at < 1 {
            return Err(Error::Config("--stop-at must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "--train-fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Length of the contiguous training prefix for a series of `n` rows.
    pub fn train_len(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64).ceil() as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Source columns in `RunConfig::source_columns` order.
    pub sources: Vec<Column>,
    pub target: Column,
    pub timestamps: Option<Vec<String>>,
    /// Rows removed because a selected cell was missing or not numeric.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.target.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of selected columns, target included.
    pub fn n_columns(&self) -> usize {
        self.sources.len() + 1
    }

    pub fn source_names(&self) -> Vec<String> {
        self.sources.iter().map(|c| c.name.clone()).collect()
    }

    /// Appends an extra source column (used for noise channels).
    pub fn push_source(&mut self, column: Column) -> Result<()> {
        if column.values.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: column.values.len(),
            });
        }
        if column.name == self.target.name || self.sources.iter().any(|c| c.name == column.name) {
            return Err(Error::Config(format!("column `{}` already exists", column.name)));
        }
        self.sources.push(column);
        Ok(())
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let v: f64 = cell.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

pub fn load_csv(path: impl AsRef<Path>, config: &RunConfig) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    load_csv_bytes(&bytes, config)
}

/// Parses CSV bytes. Rows with one more field than the header are treated as
/// carrying an unnamed leading row index (as written by R's `write.csv`).
pub fn load_csv_bytes(bytes: &[u8], config: &RunConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::UnparseableHeader(e.to_string()))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::UnparseableHeader("empty header row".into()));
    }

    let index_of = |name: &str| -> Result<usize> {
        let mut hits = header.iter().enumerate().filter(|(_, h)| h.as_str() == name);
        let (idx, _) = hits
            .next()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        if hits.next().is_some() {
            return Err(Error::UnparseableHeader(format!("duplicate column `{name}`")));
        }
        Ok(idx)
    };
    let source_idx: Vec<usize> = config
        .source_columns
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let target_idx = index_of(&config.target_column)?;
    let ts_idx = config.timestamp_column.as_deref().map(index_of).transpose()?;

    let mut sources: Vec<Vec<f64>> = vec![Vec::new(); source_idx.len()];
    let mut target = Vec::new();
    let mut timestamps = Vec::new();
    let mut dropped = 0usize;
    let mut row_values = vec![0.0; source_idx.len()];

    for record in reader.records() {
        let record = record?;
        let offset = usize::from(record.len() == header.len() + 1);
        let cell = |i: usize| record.get(i + offset);

        let mut ok = true;
        for (slot, &i) in row_values.iter_mut().zip(&source_idx) {
            match cell(i).and_then(parse_cell) {
                Some(v) => *slot = v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        let target_value = if ok {
            cell(target_idx).and_then(parse_cell)
        } else {
            None
        };
        let ts = match ts_idx {
            Some(i) => cell(i).map(|s| Some(s.to_string())),
            None => Some(None),
        };
        match (target_value, ts) {
            (Some(t), Some(ts)) => {
                for (col, &v) in sources.iter_mut().zip(&row_values) {
                    col.push(v);
                }
                target.push(t);
                timestamps.extend(ts);
            }
            _ => dropped += 1,
        }
    }

    if target.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing or non-numeric cells");
    }

    Ok(Dataset {
        sources: config
            .source_columns
            .iter()
            .zip(sources)
            .map(|(name, values)| Column {
                name: name.clone(),
                values,
            })
            .collect(),
        target: Column {
            name: config.target_column.clone(),
            values: target,
        },
        timestamps: ts_idx.map(|_| timestamps),
        dropped_rows: dropped,
    })
}
