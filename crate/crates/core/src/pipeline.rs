//! End-to-end glue: fit symbolizers on the training prefix, cluster, and
//! evaluate every level on the held-out rows.

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, ClusterOptions, MergeTree};
use crate::error::{Error, Result};
use crate::estimate::{
    discretize_target, encode_discrete_target, evaluate_levels, EvaluationReport, FrequencyEstimator,
    LevelData, Predictions, TargetEncoding, TargetType,
};
use crate::ingest::{Dataset, RunConfig, TargetKind};
use crate::sdf::{self, Partition, SymbolSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSymbolizer {
    pub name: String,
    pub partition: Partition,
}

/// Everything needed to turn raw rows into the symbols a tree was built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbolization {
    pub sources: Vec<SourceSymbolizer>,
    pub target: TargetEncoding,
}

fn fit_source(name: &str, values: &[f64], b: usize, warnings: &mut Vec<String>) -> Result<Partition> {
    match sdf::fit_mep_partition(values, b) {
        Ok(p) => Ok(p),
        Err(Error::DegenerateInput(_)) => {
            let p = sdf::fit_relabel_partition(values)?;
            if p.alphabet_size < 2 {
                return Err(Error::DegenerateInput(format!(
                    "source `{name}` is constant over the training rows"
                )));
            }
            warnings.push(format!(
                "source `{name}` has only {} distinct training values; using {} symbols instead of {b}",
                p.alphabet_size, p.alphabet_size
            ));
            Ok(p)
        }
        Err(e) => Err(e),
    }
}

fn resolve_target_type(values: &[f64], config: &RunConfig) -> TargetType {
    match config.target_kind {
        TargetKind::Discrete => TargetType::Discrete,
        TargetKind::Continuous => TargetType::Continuous,
        TargetKind::Auto => {
            let integral = values.iter().all(|v| v.fract() == 0.0);
            let mut distinct = values.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if integral && distinct.len() <= config.target_alphabet {
                TargetType::Discrete
            } else {
                TargetType::Continuous
            }
        }
    }
}

impl Symbolization {
    /// Fits every partition on rows `0..train_len`. Returns warnings about
    /// sources that could not fill the requested alphabet.
    pub fn fit(dataset: &Dataset, config: &RunConfig, train_len: usize) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        let sources = dataset
            .sources
            .iter()
            .map(|c| {
                let partition = fit_source(&c.name, &c.values[..train_len], config.alphabet, &mut warnings)?;
                Ok(SourceSymbolizer {
                    name: c.name.clone(),
                    partition,
                })
            })
            .collect::<Result<_>>()?;

        let train_target = &dataset.target.values[..train_len];
        let kind = resolve_target_type(train_target, config);
        let (_, partition, representatives) = match kind {
            TargetType::Discrete => encode_discrete_target(train_target)?,
            TargetType::Continuous => {
                discretize_target(train_target, config.target_alphabet).map_err(|e| match e {
                    Error::DegenerateInput(m) => {
                        Error::DegenerateInput(format!("target `{}`: {m}", dataset.target.name))
                    }
                    other => other,
                })?
            }
        };
        let target = TargetEncoding {
            kind,
            partition,
            representatives,
        };
        Ok((Symbolization { sources, target }, warnings))
    }

    pub fn source_sequences(
        &self,
        dataset: &Dataset,
        rows: std::ops::Range<usize>,
    ) -> Result<Vec<SymbolSequence>> {
        if dataset.sources.len() != self.sources.len() {
            return Err(Error::TreeDatasetMismatch(format!(
                "expected {} sources, dataset has {}",
                self.sources.len(),
                dataset.sources.len()
            )));
        }
        dataset
            .sources
            .iter()
            .zip(&self.sources)
            .map(|(col, sym)| {
                if col.name != sym.name {
                    return Err(Error::TreeDatasetMismatch(format!(
                        "expected source `{}`, found `{}`",
                        sym.name, col.name
                    )));
                }
                Ok(sdf::symbolize(
                    &col.values[rows.clone()],
                    &sym.partition,
                    col.name.clone(),
                ))
            })
            .collect()
    }

    pub fn target_sequence(&self, dataset: &Dataset, rows: std::ops::Range<usize>) -> SymbolSequence {
        self.target
            .symbolize(&dataset.target.values[rows], &dataset.target.name)
    }
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub tree: MergeTree,
    pub symbolization: Symbolization,
    pub train_len: usize,
    pub warnings: Vec<String>,
}

pub fn cluster_options(config: &RunConfig) -> ClusterOptions {
    ClusterOptions {
        depth: config.depth,
        fused_alphabet: config.fused_alphabet(),
        stop_at: config.stop_at,
    }
}

/// Symbolizes the training prefix of `dataset` and clusters its sources.
pub fn cluster_dataset(dataset: &Dataset, config: &RunConfig) -> Result<ClusterRun> {
    config.validate()?;
    let n = dataset.len();
    let train_len = config.train_len(n);
    if train_len <= config.depth + 1 {
        return Err(Error::SequenceTooShort {
            len: train_len,
            depth: config.depth + 1,
        });
    }
    let (symbolization, warnings) = Symbolization::fit(dataset, config, train_len)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let sources = symbolization.source_sequences(dataset, 0..train_len)?;
    let target = symbolization.target_sequence(dataset, 0..train_len);
    let tree = cluster(&sources, &target, cluster_options(config))?;
    Ok(ClusterRun {
        tree,
        symbolization,
        train_len,
        warnings,
    })
}

/// Replays the tree over all rows and scores each level on the rows after the
/// training prefix.
pub fn evaluate_dataset(
    tree: &MergeTree,
    symbolization: &Symbolization,
    dataset: &Dataset,
    config: &RunConfig,
) -> Result<(EvaluationReport, Predictions)> {
    let n = dataset.len();
    let leaves = symbolization.source_sequences(dataset, 0..n)?;
    let nodes = tree.replay(&leaves)?;
    let data = LevelData {
        nodes: &nodes,
        target_values: &dataset.target.values,
        target: &symbolization.target,
        train_len: config.train_len(n),
    };
    evaluate_levels::<FrequencyEstimator>(tree, &data, serde_json::to_value(config)?)
}
