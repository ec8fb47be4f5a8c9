//! Agglomerative clustering of source sequences by transfer-entropy loss.
//!
//! At every level all pairs of active nodes are scored with
//!
//! ```text
//! score(X, Y) = (T(X → Z) - T(XY → Z)) + (T(Y → Z) - T(XY → Z))
//! ```
//!
//! where `XY` is the raw merged sequence over the full `b_x · b_y` alphabet.
//! The lowest-scoring pair is fused, repartitioned to the working alphabet and
//! replaces its two parents. Ties go to the lexicographically smallest pair of
//! node ids. Pair scoring runs in parallel but the reduction happens only after
//! all scores exist, so results do not depend on the thread count.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{apply_fusion, fuse, merge_pair};
use crate::infotheory::{transfer_entropy, TargetHistory};
use crate::sdf::{Partition, SymbolSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterOptions {
    pub depth: usize,
    pub fused_alphabet: usize,
    /// Stop once this many nodes remain active.
    pub stop_at: usize,
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: NodeId,
    pub name: String,
    pub alphabet_size: usize,
    /// `(major, minor)` parents for fused nodes.
    pub children: Option<(NodeId, NodeId)>,
    /// First level at which this node is active.
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pair: (NodeId, NodeId),
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTransfer {
    pub node: NodeId,
    pub te: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    /// Level whose active nodes were scored; the fused node is active from
    /// `level + 1`.
    pub level: usize,
    pub pair: (NodeId, NodeId),
    pub score: f64,
    pub candidates: Vec<Candidate>,
    pub te_to_target: Vec<NodeTransfer>,
    /// Pair scorings actually performed at this level.
    pub evaluations: usize,
    pub fused: NodeId,
    /// Parent used as the most significant digit of the merged encoding.
    pub major: NodeId,
    pub partition: Partition,
    pub relabeled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub leaves: Vec<String>,
    pub depth: usize,
    pub fused_alphabet: usize,
    pub nodes: Vec<TreeNode>,
    pub merges: Vec<MergeRecord>,
    /// Active node ids at each level, level 0 being the leaves.
    pub levels: Vec<Vec<NodeId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Json,
    Dot,
}

/// Score of fusing `x` and `y` with respect to target `z`. Negative values mean
/// the pair carries information about `z` jointly that neither has alone.
pub fn score_pair(x: &SymbolSequence, y: &SymbolSequence, z: &SymbolSequence, k: usize) -> Result<f64> {
    let merged = merge_pair(x, y)?.to_symbols();
    let te_xy = transfer_entropy(&merged, z, k)?;
    Ok(transfer_entropy(x, z, k)? + transfer_entropy(y, z, k)? - 2.0 * te_xy)
}

/// Orders a pair so the node with the smaller name comes first. Names do not
/// depend on the order sources were listed in, so neither does the fusion.
fn orient<'a>(a: (NodeId, &'a str), b: (NodeId, &'a str)) -> (NodeId, NodeId) {
    if a.1 <= b.1 {
        (a.0, b.0)
    } else {
        (b.0, a.0)
    }
}

pub fn cluster(
    sources: &[SymbolSequence],
    target: &SymbolSequence,
    options: ClusterOptions,
) -> Result<MergeTree> {
    if sources.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 sources, got {}",
            sources.len()
        )));
    }
    if options.stop_at < 1 {
        return Err(Error::Config("stop_at must be at least 1".into()));
    }
    if options.fused_alphabet < 2 {
        return Err(Error::InvalidAlphabet(options.fused_alphabet));
    }
    for s in sources {
        if s.len() != target.len() {
            return Err(Error::LengthMismatch {
                left: s.len(),
                right: target.len(),
            });
        }
    }
    let history = TargetHistory::new(target, options.depth)?;

    let mut seqs: Vec<SymbolSequence> = sources.to_vec();
    let mut nodes: Vec<TreeNode> = sources
        .iter()
        .enumerate()
        .map(|(id, s)| TreeNode {
            id,
            name: s.name.clone(),
            alphabet_size: s.alphabet_size,
            children: None,
            level: 0,
        })
        .collect();
    let mut te_cache: Vec<Option<f64>> = vec![None; seqs.len()];
    let mut active: Vec<NodeId> = (0..seqs.len()).collect();
    let mut levels = vec![active.clone()];
    let mut merges = Vec::new();

    while active.len() > options.stop_at {
        let level = merges.len();

        let missing: Vec<NodeId> = active
            .iter()
            .copied()
            .filter(|&id| te_cache[id].is_none())
            .collect();
        let fresh: Vec<f64> = missing
            .par_iter()
            .map(|&id| history.transfer_entropy_from(&seqs[id]))
            .collect::<Result<_>>()?;
        for (id, te) in missing.into_iter().zip(fresh) {
            te_cache[id] = Some(te);
        }
        let te = |id: NodeId| te_cache[id].expect("marginal computed above");

        let pairs: Vec<(NodeId, NodeId)> = active
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| active[i + 1..].iter().map(move |&b| (a, b)))
            .collect();
        let evaluations = AtomicUsize::new(0);
        let scores: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| {
                evaluations.fetch_add(1, Ordering::Relaxed);
                let (major, minor) = orient((a, &nodes[a].name), (b, &nodes[b].name));
                let merged = merge_pair(&seqs[major], &seqs[minor])?.to_symbols();
                let te_xy = history.transfer_entropy_from(&merged)?;
                Ok(te(a) + te(b) - 2.0 * te_xy)
            })
            .collect::<Result<_>>()?;

        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = i;
            }
        }
        let (a, b) = pairs[best];
        let (major, minor) = orient((a, &nodes[a].name), (b, &nodes[b].name));
        let fusion = fuse(&seqs[major], &seqs[minor], options.fused_alphabet)?;

        #[cfg(debug_assertions)]
        {
            let (cx, cy) =
                crate::infotheory::causation_entropy_pair_with(&history, &seqs[major], &seqs[minor])?;
            debug_assert!(
                (scores[best] + cx + cy).abs() <= 1e-10,
                "score {} disagrees with causation entropies {cx} + {cy}",
                scores[best]
            );
        }

        let fused_id = seqs.len();
        nodes.push(TreeNode {
            id: fused_id,
            name: fusion.sequence.name.clone(),
            alphabet_size: fusion.sequence.alphabet_size,
            children: Some((major, minor)),
            level: level + 1,
        });
        log::debug!(
            "level {level}: fused {} and {} (score {:.6})",
            nodes[major].name,
            nodes[minor].name,
            scores[best]
        );
        merges.push(MergeRecord {
            level,
            pair: (a, b),
            score: scores[best],
            candidates: pairs
                .iter()
                .zip(&scores)
                .map(|(&pair, &score)| Candidate { pair, score })
                .collect(),
            te_to_target: active
                .iter()
                .map(|&node| NodeTransfer { node, te: te(node) })
                .collect(),
            evaluations: evaluations.into_inner(),
            fused: fused_id,
            major,
            partition: fusion.partition,
            relabeled: fusion.relabeled,
        });
        seqs.push(fusion.sequence);
        te_cache.push(None);
        active.retain(|&id| id != a && id != b);
        active.push(fused_id);
        levels.push(active.clone());
    }

    Ok(MergeTree {
        leaves: sources.iter().map(|s| s.name.clone()).collect(),
        depth: options.depth,
        fused_alphabet: options.fused_alphabet,
        nodes,
        merges,
        levels,
    })
}

impl MergeTree {
    /// Rebuilds the sequence of every node from leaf sequences over any rows,
    /// reusing the fusion partitions fitted during clustering.
    pub fn replay(&self, leaves: &[SymbolSequence]) -> Result<Vec<SymbolSequence>> {
        if leaves.len() != self.leaves.len() {
            return Err(Error::TreeDatasetMismatch(format!(
                "tree has {} leaves, got {} sequences",
                self.leaves.len(),
                leaves.len()
            )));
        }
        for (want, got) in self.leaves.iter().zip(leaves) {
            if *want != got.name {
                return Err(Error::TreeDatasetMismatch(format!(
                    "leaf `{want}` does not match sequence `{}`",
                    got.name
                )));
            }
        }
        let mut seqs = leaves.to_vec();
        for m in &self.merges {
            let (major, minor) = self.nodes[m.fused]
                .children
                .ok_or_else(|| Error::TreeDatasetMismatch(format!("node {} has no parents", m.fused)))?;
            let fused = apply_fusion(&seqs[major], &seqs[minor], &m.partition)?;
            seqs.push(fused);
        }
        Ok(seqs)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Graphviz dendrogram: leaves at the bottom rank, one rank per level,
    /// merge scores on the edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph merge_tree {\n  rankdir=BT;\n  node [shape=ellipse];\n");
        for node in &self.nodes {
            let shape = if node.children.is_some() {
                ", shape=box"
            } else {
                ""
            };
            let _ = writeln!(out, "  n{} [label=\"{}\"{shape}];", node.id, escape(&node.name));
        }
        for m in &self.merges {
            for parent in [m.pair.0, m.pair.1] {
                let _ = writeln!(out, "  n{parent} -> n{} [label=\"{:.4}\"];", m.fused, m.score);
            }
        }
        let max_level = self.nodes.iter().map(|n| n.level).max().unwrap_or(0);
        for level in 0..=max_level {
            let ids: Vec<String> = self
                .nodes
                .iter()
                .filter(|n| n.level == level)
                .map(|n| format!("n{}", n.id))
                .collect();
            if !ids.is_empty() {
                let _ = writeln!(out, "  {{ rank=same; {}; }}", ids.join("; "));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_tree(tree: &MergeTree, format: TreeFormat) -> Result<Vec<u8>> {
    match format {
        TreeFormat::Json => tree.to_json(),
        TreeFormat::Dot => Ok(tree.to_dot().into_bytes()),
    }
}
