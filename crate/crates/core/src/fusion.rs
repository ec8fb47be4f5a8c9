//! Pairwise fusion of symbol sequences.
//!
//! Two aligned sequences are merged into one integer sequence
//! `x · b_y + y` (x major) and the merged values are then repartitioned
//! down to a working alphabet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdf::{self, Partition, Symbol, SymbolSequence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedSequence {
    pub values: Vec<u64>,
    pub bx: usize,
    pub by: usize,
    pub parents: (String, String),
}

impl MergedSequence {
    pub fn alphabet_size(&self) -> usize {
        self.bx * self.by
    }

    pub fn decode(&self, value: u64) -> (Symbol, Symbol) {
        (
            (value / self.by as u64) as Symbol,
            (value % self.by as u64) as Symbol,
        )
    }

    pub fn name(&self) -> String {
        fused_name(&self.parents.0, &self.parents.1)
    }

    /// The raw merged sequence as symbols over the full `b_x · b_y` alphabet.
    pub fn to_symbols(&self) -> SymbolSequence {
        SymbolSequence {
            name: self.name(),
            symbols: self.values.iter().map(|&v| v as Symbol).collect(),
            alphabet_size: self.alphabet_size(),
        }
    }
}

pub fn fused_name(x: &str, y: &str) -> String {
    format!("({x}+{y})")
}

pub fn merge_pair(x: &SymbolSequence, y: &SymbolSequence) -> Result<MergedSequence> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let by = y.alphabet_size as u64;
    Ok(MergedSequence {
        values: x
            .symbols
            .iter()
            .zip(&y.symbols)
            .map(|(&a, &b)| a as u64 * by + b as u64)
            .collect(),
        bx: x.alphabet_size,
        by: y.alphabet_size,
        parents: (x.name.clone(), y.name.clone()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub sequence: SymbolSequence,
    /// Partition over merged values; replays the fusion on unseen rows.
    pub partition: Partition,
    pub relabeled: bool,
    pub merged_alphabet: usize,
}

pub fn fuse(x: &SymbolSequence, y: &SymbolSequence, fused_alphabet: usize) -> Result<Fusion> {
    let merged = merge_pair(x, y)?;
    let r = sdf::repartition(&merged.values, fused_alphabet, merged.name())?;
    Ok(Fusion {
        sequence: r.sequence,
        partition: r.partition,
        relabeled: r.relabeled,
        merged_alphabet: merged.alphabet_size(),
    })
}

/// Applies a previously fitted fusion partition to new aligned rows.
pub fn apply_fusion(x: &SymbolSequence, y: &SymbolSequence, partition: &Partition) -> Result<SymbolSequence> {
    let merged = merge_pair(x, y)?;
    let values: Vec<f64> = merged.values.iter().map(|&v| v as f64).collect();
    Ok(sdf::symbolize(&values, partition, merged.name()))
}
