//! Target estimation at every level of a merge tree.
//!
//! The default estimator is a conditional-frequency table: for each observed
//! joint state it stores the empirical distribution of the next target symbol
//! and predicts its mode, falling back to the global mode for unseen states.
//! Other classifiers can be plugged in through [`Estimator`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::MergeTree;
use crate::embedding::{embed, State, StateSequence};
use crate::error::{Error, Result};
use crate::sdf::{self, Partition, Symbol, SymbolSequence};

/// Tuple of per-node states at one time step.
pub type JointState = Vec<State>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetType {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    Rmse,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Rmse => "rmse",
        })
    }
}

/// How target values map to symbols and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEncoding {
    pub kind: TargetType,
    pub partition: Partition,
    /// Value reported for each symbol: the label itself for discrete targets,
    /// the median training value of the bin for continuous ones.
    pub representatives: Vec<f64>,
}

impl TargetEncoding {
    pub fn metric(&self) -> MetricKind {
        match self.kind {
            TargetType::Discrete => MetricKind::Accuracy,
            TargetType::Continuous => MetricKind::Rmse,
        }
    }

    pub fn symbolize(&self, values: &[f64], name: &str) -> SymbolSequence {
        sdf::symbolize(values, &self.partition, name)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Maximum entropy discretization of a continuous target. Returns the symbols,
/// the partition and the median of the values in each bin.
pub fn discretize_target(values: &[f64], b: usize) -> Result<(SymbolSequence, Partition, Vec<f64>)> {
    let partition = sdf::fit_mep_partition(values, b)?;
    let symbols = sdf::symbolize(values, &partition, "target");
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); b];
    for (&v, &s) in values.iter().zip(&symbols.symbols) {
        bins[s as usize].push(v);
    }
    let representatives = bins
        .iter_mut()
        .map(|bin| {
            bin.sort_by(f64::total_cmp);
            median(bin)
        })
        .collect();
    Ok((symbols, partition, representatives))
}

/// Encodes nominal labels: one symbol per distinct training label, in
/// ascending label order.
pub fn encode_discrete_target(values: &[f64]) -> Result<(SymbolSequence, Partition, Vec<f64>)> {
    let partition = sdf::fit_relabel_partition(values)?;
    let mut labels = values.to_vec();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    Ok((sdf::symbolize(values, &partition, "target"), partition, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDistribution {
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

impl SymbolDistribution {
    fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        SymbolDistribution {
            counts,
            probabilities,
        }
    }

    /// Most frequent symbol, lowest symbol on ties.
    pub fn mode(&self) -> Symbol {
        let mut best = 0;
        for (s, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = s;
            }
        }
        best as Symbol
    }
}

/// A state-to-target classifier that can be trained per level.
pub trait Estimator: Sized {
    fn fit(states: &[JointState], labels: &[Symbol], alphabet_size: usize) -> Result<Self>;
    fn predict(&self, states: &[JointState]) -> Vec<Symbol>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEstimator<K: Ord = JointState> {
    pub table: BTreeMap<K, SymbolDistribution>,
    pub prior: SymbolDistribution,
    pub representatives: Option<Vec<f64>>,
}

impl<K: Ord + Clone> FrequencyEstimator<K> {
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a K, Symbol)>,
        alphabet_size: usize,
    ) -> Result<Self>
    where
        K: 'a,
    {
        let mut raw: BTreeMap<K, Vec<u64>> = BTreeMap::new();
        let mut prior = vec![0u64; alphabet_size];
        for (key, label) in pairs {
            let slot = label as usize;
            if slot >= alphabet_size {
                return Err(Error::DegenerateInput(format!(
                    "label {label} outside alphabet of size {alphabet_size}"
                )));
            }
            raw.entry(key.clone()).or_insert_with(|| vec![0; alphabet_size])[slot] += 1;
            prior[slot] += 1;
        }
        if prior.iter().all(|&c| c == 0) {
            return Err(Error::EmptySequence);
        }
        Ok(FrequencyEstimator {
            table: raw
                .into_iter()
                .map(|(k, c)| (k, SymbolDistribution::from_counts(c)))
                .collect(),
            prior: SymbolDistribution::from_counts(prior),
            representatives: None,
        })
    }

    pub fn with_representatives(mut self, representatives: Vec<f64>) -> Self {
        self.representatives = Some(representatives);
        self
    }

    pub fn predict_one(&self, state: &K) -> Symbol {
        self.table.get(state).unwrap_or(&self.prior).mode()
    }

    /// Real-valued predictions via bin representatives, when configured.
    pub fn predict_values(&self, states: &[K]) -> Option<Vec<f64>> {
        let reps = self.representatives.as_ref()?;
        Some(
            states
                .iter()
                .map(|s| reps[self.predict_one(s) as usize])
                .collect(),
        )
    }
}

impl Estimator for FrequencyEstimator<JointState> {
    fn fit(states: &[JointState], labels: &[Symbol], alphabet_size: usize) -> Result<Self> {
        if states.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: states.len(),
                right: labels.len(),
            });
        }
        Self::from_pairs(states.iter().zip(labels.iter().copied()), alphabet_size)
    }

    fn predict(&self, states: &[JointState]) -> Vec<Symbol> {
        states.iter().map(|s| self.predict_one(s)).collect()
    }
}

/// Trains on a single state sequence, pairing the state ending at `t` with
/// the target symbol at `t + 1`.
pub fn train(states: &StateSequence, target: &SymbolSequence) -> Result<FrequencyEstimator<State>> {
    let expected = states.len() + states.depth;
    if target.len() != expected {
        return Err(Error::LengthMismatch {
            left: expected,
            right: target.len(),
        });
    }
    let labels = &target.symbols[states.depth + 1..];
    let n = states.len() - 1;
    FrequencyEstimator::from_pairs(
        states.states[..n].iter().zip(labels.iter().copied()),
        target.alphabet_size,
    )
}

/// Predicts the target symbol following each state.
pub fn predict(est: &FrequencyEstimator<State>, states: &StateSequence) -> Vec<Symbol> {
    states.states.iter().map(|s| est.predict_one(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub metric: MetricKind,
    pub value: f64,
    pub n_test: usize,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_level: Vec<LevelResult>,
    pub config: serde_json::Value,
}

impl EvaluationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,metric,value,n_test\n");
        for r in &self.per_level {
            out.push_str(&format!("{},{},{},{}\n", r.level, r.metric, r.value, r.n_test));
        }
        out
    }
}

/// Test-row predictions for every level.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// Row index in the dataset of each predicted target value.
    pub rows: Vec<usize>,
    pub truth: Vec<f64>,
    /// One column per level.
    pub levels: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn to_csv(&self, timestamps: Option<&[String]>) -> String {
        let mut out = String::from("row");
        if timestamps.is_some() {
            out.push_str(",timestamp");
        }
        out.push_str(",truth");
        for h in 0..self.levels.len() {
            out.push_str(&format!(",level_{h}"));
        }
        out.push('\n');
        for (i, &row) in self.rows.iter().enumerate() {
            out.push_str(&row.to_string());
            if let Some(ts) = timestamps {
                out.push_str(&format!(",\"{}\"", ts[row].replace('"', "\"\"")));
            }
            out.push_str(&format!(",{}", self.truth[i]));
            for level in &self.levels {
                out.push_str(&format!(",{}", level[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Inputs for [`evaluate_levels`]: node sequences over all rows, the target
/// over all rows, and where the training prefix ends.
#[derive(Debug, Clone)]
pub struct LevelData<'a> {
    pub nodes: &'a [SymbolSequence],
    pub target_values: &'a [f64],
    pub target: &'a TargetEncoding,
    pub train_len: usize,
}

/// Trains and scores one estimator per tree level. Level 0 tuples all leaf
/// states; later levels tuple the active (partially fused) nodes.
pub fn evaluate_levels<E: Estimator>(
    tree: &MergeTree,
    data: &LevelData<'_>,
    config: serde_json::Value,
) -> Result<(EvaluationReport, Predictions)> {
    let k = tree.depth;
    let n = data.target_values.len();
    if data.train_len < k + 2 {
        return Err(Error::SequenceTooShort {
            len: data.train_len,
            depth: k + 1,
        });
    }
    if data.train_len >= n {
        return Err(Error::Config("no held-out rows: lower --train-fraction".into()));
    }
    if data.nodes.len() != tree.nodes.len() {
        return Err(Error::TreeDatasetMismatch(format!(
            "tree has {} nodes, got {} sequences",
            tree.nodes.len(),
            data.nodes.len()
        )));
    }
    let target = data.target.symbolize(data.target_values, "target");
    let states: Vec<StateSequence> = data.nodes.iter().map(|s| embed(s, k)).collect::<Result<_>>()?;

    // state index i ends at t = i + k and predicts row t + 1
    let train_idx = 0..data.train_len - k - 1;
    let test_idx = data.train_len - k - 1..n - k - 1;
    let rows: Vec<usize> = test_idx.clone().map(|i| i + k + 1).collect();
    let truth: Vec<f64> = rows.iter().map(|&r| data.target_values[r]).collect();
    let metric = data.target.metric();

    let mut per_level = Vec::with_capacity(tree.levels.len());
    let mut columns = Vec::with_capacity(tree.levels.len());
    for (level, active) in tree.levels.iter().enumerate() {
        let joint = |i: usize| -> JointState { active.iter().map(|&id| states[id].states[i]).collect() };
        let train_states: Vec<JointState> = train_idx.clone().map(joint).collect();
        let train_labels: Vec<Symbol> = train_idx.clone().map(|i| target.symbols[i + k + 1]).collect();
        let est = E::fit(&train_states, &train_labels, target.alphabet_size)?;

        let test_states: Vec<JointState> = test_idx.clone().map(joint).collect();
        let predicted: Vec<f64> = est
            .predict(&test_states)
            .into_iter()
            .map(|s| data.target.representatives[s as usize])
            .collect();
        let value = match metric {
            MetricKind::Accuracy => {
                let hits = predicted.iter().zip(&truth).filter(|(p, t)| p == t).count();
                hits as f64 / truth.len() as f64
            }
            MetricKind::Rmse => {
                let sse: f64 = predicted.iter().zip(&truth).map(|(p, t)| (p - t) * (p - t)).sum();
                (sse / truth.len() as f64).sqrt()
            }
        };
        per_level.push(LevelResult {
            level,
            metric,
            value,
            n_test: truth.len(),
            nodes: active.iter().map(|&id| tree.nodes[id].name.clone()).collect(),
        });
        columns.push(predicted);
    }
    Ok((
        EvaluationReport { per_level, config },
        Predictions {
            rows,
            truth,
            levels: columns,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{cluster, ClusterOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn discretize_one_to_hundred() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let (symbols, partition, reps) = discretize_target(&values, 10).unwrap();
        assert_eq!(partition.edges.len(), 9);
        let mut counts = [0; 10];
        symbols.symbols.iter().for_each(|&s| counts[s as usize] += 1);
        assert_eq!(counts, [10; 10]);
        assert_eq!(reps[0], 5.5);
        assert_eq!(reps[9], 95.5);
    }

    #[test]
    fn discretize_symmetric_data() {
        let values: Vec<f64> = (-50..50).map(|i| i as f64 + 0.5).collect();
        let (_, _, reps) = discretize_target(&values, 2).unwrap();
        // data median is 0
        assert!((reps[0] + reps[1]).abs() < 1e-12, "{reps:?}");
        assert!(discretize_target(&[1.0; 20], 2).is_err());
    }

    #[test]
    fn discrete_labels_are_kept() {
        let (s, p, labels) = encode_discrete_target(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.symbols, vec![0, 1, 1, 0]);
        assert_eq!(labels, vec![0.0, 1.0]);
        assert_eq!(p.alphabet_size, 2);
    }

    fn states(v: Vec<u64>, depth: usize, base: u64) -> StateSequence {
        StateSequence {
            states: v,
            depth,
            base,
        }
    }

    #[test]
    fn deterministic_mapping_gives_point_masses() {
        // depth 0: state t predicts target t+1
        let target = SymbolSequence::new("z", vec![0, 1, 2, 0, 1, 2, 0], 3).unwrap();
        let st = states(vec![2, 0, 1, 2, 0, 1, 2], 0, 3);
        let est = train(&st, &target).unwrap();
        for dist in est.table.values() {
            assert_eq!(dist.probabilities.iter().filter(|&&p| p == 1.0).count(), 1);
        }
        let pred = predict(&est, &st);
        assert_eq!(&pred[..6], &target.symbols[1..]);
    }

    #[test]
    fn single_row_and_counts() {
        let est = FrequencyEstimator::from_pairs([(&7u64, 2u32)], 3).unwrap();
        assert_eq!(est.prior.probabilities, vec![0.0, 0.0, 1.0]);
        assert_eq!(est.table[&7].probabilities, vec![0.0, 0.0, 1.0]);

        let keys = [1u64, 1, 1, 1];
        let est = FrequencyEstimator::from_pairs(keys.iter().zip([0, 0, 1, 0]), 2).unwrap();
        assert_eq!(est.table[&1].probabilities, vec![0.75, 0.25]);
        for d in est.table.values().chain(std::iter::once(&est.prior)) {
            assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unseen_state_uses_prior_and_ties_go_low() {
        let keys = [0u64, 0, 5, 5, 5, 5];
        let est = FrequencyEstimator::from_pairs(keys.iter().zip([3, 1, 2, 2, 2, 1]), 4).unwrap();
        assert_eq!(est.predict_one(&0), 1);
        assert_eq!(est.predict_one(&99), 2);
        let est = est.with_representatives(vec![10.0, 11.0, 12.0, 13.0]);
        assert_eq!(est.predict_values(&[0, 99]).unwrap(), vec![11.0, 12.0]);
    }

    #[test]
    fn train_rejects_misaligned_target() {
        let target = SymbolSequence::new("z", vec![0, 1, 0], 2).unwrap();
        assert!(train(&states(vec![0, 1, 0], 1, 2), &target).is_err());
    }

    fn synthetic(n: usize, seed: u64, informative: bool) -> (Vec<SymbolSequence>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sources: Vec<SymbolSequence> = (0..3)
            .map(|i| {
                SymbolSequence::new(
                    format!("s{i}"),
                    (0..n).map(|_| rng.random_range(0..3)).collect(),
                    3,
                )
                .unwrap()
            })
            .collect();
        let mut target = vec![0.0];
        for t in 0..n - 1 {
            let label = if informative {
                u32::from(sources[0].symbols[t] + sources[1].symbols[t] >= 2)
            } else {
                u32::from(rng.random::<f64>() < 0.3)
            };
            target.push(label as f64);
        }
        (sources, target)
    }

    fn run(sources: &[SymbolSequence], target: &[f64], train_len: usize) -> (EvaluationReport, Predictions) {
        let (tsym, partition, reps) = encode_discrete_target(&target[..train_len]).unwrap();
        let train_sources: Vec<_> = sources.iter().map(|s| s.slice(0..train_len)).collect();
        let opts = ClusterOptions {
            depth: 0,
            fused_alphabet: 9,
            stop_at: 1,
        };
        let tree = cluster(&train_sources, &tsym, opts).unwrap();
        let nodes = tree.replay(sources).unwrap();
        let enc = TargetEncoding {
            kind: TargetType::Discrete,
            partition,
            representatives: reps,
        };
        let data = LevelData {
            nodes: &nodes,
            target_values: target,
            target: &enc,
            train_len,
        };
        evaluate_levels::<FrequencyEstimator>(&tree, &data, serde_json::Value::Null).unwrap()
    }

    #[test]
    fn informative_sources_predict_well_at_every_level() {
        let (sources, target) = synthetic(4000, 1, true);
        let (report, preds) = run(&sources, &target, 2800);
        assert_eq!(report.per_level.len(), 3);
        assert_eq!(report.per_level[0].nodes.len(), 3);
        assert!(report
            .per_level
            .iter()
            .all(|r| r.n_test == 1200 && r.metric == MetricKind::Accuracy));
        assert!(report.per_level[0].value > 0.99, "{report:?}");
        assert_eq!(preds.rows.first(), Some(&2800));
        assert_eq!(preds.levels.len(), 3);
        let csv = report.to_csv();
        assert!(csv.starts_with("level,metric,value,n_test\n0,accuracy,"));
    }

    #[test]
    fn independent_target_tracks_majority_rate() {
        let (sources, target) = synthetic(6000, 2, false);
        let (report, _) = run(&sources, &target, 4200);
        let test = &target[4200..];
        let majority = test.iter().filter(|&&v| v == 0.0).count() as f64 / test.len() as f64;
        for r in &report.per_level {
            assert!(
                r.value <= majority + 0.02 && r.value >= majority - 0.08,
                "{r:?} vs {majority}"
            );
            assert!((0.0..=1.0).contains(&r.value));
        }
    }

    #[test]
    fn rmse_for_continuous_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3000;
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let src_partition = sdf::fit_mep_partition(&raw[..2100], 5).unwrap();
        let src = sdf::symbolize(&raw, &src_partition, "x");
        let other = sdf::symbolize(
            &(0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>(),
            &src_partition,
            "y",
        );
        let mut target = vec![5.0];
        target.extend(raw[..n - 1].iter().map(|v| 20.0 + v));
        let (tsym, partition, reps) = discretize_target(&target[..2100], 5).unwrap();
        let sources = [src.clone(), other.clone()];
        let train: Vec<_> = sources.iter().map(|s| s.slice(0..2100)).collect();
        let tree = cluster(
            &train,
            &tsym,
            ClusterOptions {
                depth: 0,
                fused_alphabet: 5,
                stop_at: 1,
            },
        )
        .unwrap();
        let nodes = tree.replay(&sources).unwrap();
        let enc = TargetEncoding {
            kind: TargetType::Continuous,
            partition,
            representatives: reps,
        };
        let data = LevelData {
            nodes: &nodes,
            target_values: &target,
            target: &enc,
            train_len: 2100,
        };
        let (report, _) =
            evaluate_levels::<FrequencyEstimator>(&tree, &data, serde_json::Value::Null).unwrap();
        assert_eq!(report.per_level[0].metric, MetricKind::Rmse);
        // one bin spans ~2 units, so error stays well below the target spread
        assert!(report.per_level[0].value < 1.0, "{report:?}");
        assert!(report.per_level.iter().all(|r| r.value >= 0.0));
        let again = evaluate_levels::<FrequencyEstimator>(&tree, &data, serde_json::Value::Null).unwrap();
        assert_eq!(again.0, report);
    }
}
