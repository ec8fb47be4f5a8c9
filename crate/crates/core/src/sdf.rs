//! Symbolic dynamic filtering: partitioning real-valued series into symbols.
//!
//! A [`Partition`] holds `b - 1` strictly increasing edges. A value `v` maps
//! to the number of edges strictly below it, so a value sitting exactly on an
//! edge falls into the lower bin and the two extreme bins are unbounded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    MaxEntropy,
    Uniform,
    /// One bin per distinct training value (lossless fallback).
    Relabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub edges: Vec<f64>,
    pub alphabet_size: usize,
    pub kind: PartitionKind,
}

impl Partition {
    pub fn new(edges: Vec<f64>, kind: PartitionKind) -> Result<Self> {
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateInput(
                "partition edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(Partition {
            alphabet_size: edges.len() + 1,
            edges,
            kind,
        })
    }

    #[inline]
    pub fn symbol(&self, value: f64) -> Symbol {
        self.edges.partition_point(|&e| e < value) as Symbol
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub name: String,
    pub symbols: Vec<Symbol>,
    pub alphabet_size: usize,
}

impl SymbolSequence {
    pub fn new(name: impl Into<String>, symbols: Vec<Symbol>, alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::InvalidAlphabet(0));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(Error::DegenerateInput(format!(
                "symbol {bad} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(SymbolSequence {
            name: name.into(),
            symbols,
            alphabet_size,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> SymbolSequence {
        SymbolSequence {
            name: self.name.clone(),
            symbols: self.symbols[range].to_vec(),
            alphabet_size: self.alphabet_size,
        }
    }

    pub fn distinct_count(&self) -> usize {
        let mut seen = vec![false; self.alphabet_size];
        self.symbols.iter().for_each(|&s| seen[s as usize] = true);
        seen.into_iter().filter(|&x| x).count()
    }
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in series".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Quantile (maximum entropy) partition.
///
/// Edge `i` is the `⌊i·n/b⌋`-th order statistic (1-based). When ties make two
/// quantiles coincide, the later edge is moved up to the next distinct value so
/// that every bin stays non-empty on the training data.
pub fn fit_mep_partition(values: &[f64], b: usize) -> Result<Partition> {
    if b < 2 {
        return Err(Error::InvalidAlphabet(b));
    }
    let sorted = sorted_finite(values)?;
    let mut distinct = sorted.clone();
    distinct.dedup();
    let (n, m) = (sorted.len(), distinct.len());
    if m < b {
        return Err(Error::DegenerateInput(format!(
            "{m} distinct values cannot fill {b} bins"
        )));
    }

    let mut edges = Vec::with_capacity(b - 1);
    let mut prev: Option<usize> = None;
    for i in 1..b {
        let quantile = sorted[i * n / b - 1];
        let mut idx = distinct.partition_point(|&d| d < quantile);
        if let Some(p) = prev {
            idx = idx.max(p + 1);
        }
        // leave room for the remaining edges and a non-empty top bin
        idx = idx.min(m - b + i - 1);
        edges.push(distinct[idx]);
        prev = Some(idx);
    }
    Partition::new(edges, PartitionKind::MaxEntropy)
}

/// Equal-width partition over `[min, max]`.
pub fn fit_uniform_partition(values: &[f64], b: usize) -> Result<Partition> {
    if b < 2 {
        return Err(Error::InvalidAlphabet(b));
    }
    let sorted = sorted_finite(values)?;
    let (min, max) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        (Some(_), Some(_)) => return Err(Error::DegenerateInput("constant series".into())),
        _ => return Err(Error::EmptySequence),
    };
    let width = (max - min) / b as f64;
    let edges = (1..b).map(|i| min + i as f64 * width).collect();
    Partition::new(edges, PartitionKind::Uniform)
        .map_err(|_| Error::DegenerateInput("range too narrow for uniform bins".into()))
}

/// Partition that gives every distinct value its own symbol, in sorted order.
pub fn fit_relabel_partition(values: &[f64]) -> Result<Partition> {
    let mut distinct = sorted_finite(values)?;
    distinct.dedup();
    if distinct.is_empty() {
        return Err(Error::EmptySequence);
    }
    distinct.pop();
    Partition::new(distinct, PartitionKind::Relabel)
}

pub fn symbolize(values: &[f64], partition: &Partition, name: impl Into<String>) -> SymbolSequence {
    SymbolSequence {
        name: name.into(),
        symbols: values.iter().map(|&v| partition.symbol(v)).collect(),
        alphabet_size: partition.alphabet_size,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repartitioned {
    pub sequence: SymbolSequence,
    pub partition: Partition,
    /// True when there were fewer distinct values than requested symbols and
    /// the values were relabelled instead.
    pub relabeled: bool,
}

/// Re-symbolizes integer-valued merged values down to `target_b` symbols by
/// maximum entropy partitioning of the ordinal values.
pub fn repartition(values: &[u64], target_b: usize, name: impl Into<String>) -> Result<Repartitioned> {
    if target_b < 2 {
        return Err(Error::InvalidAlphabet(target_b));
    }
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    let reals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let (partition, relabeled) = match fit_mep_partition(&reals, target_b) {
        Ok(p) => (p, false),
        Err(Error::DegenerateInput(_)) => {
            let p = fit_relabel_partition(&reals)?;
            log::debug!(
                "repartition fell back to relabelling {} distinct values",
                p.alphabet_size
            );
            (p, true)
        }
        Err(e) => return Err(e),
    };
    Ok(Repartitioned {
        sequence: symbolize(&reals, &partition, name),
        partition,
        relabeled,
    })
}
