//! Plug-in (empirical frequency) entropy estimators, in bits.
//!
//! Histograms are built by sorting keys, so every sum is accumulated in key
//! order and results are bit-identical however the calls are scheduled.
//!
//! Transfer entropy follows the lag-1 convention: the target symbol at `t + 1`
//! is paired with the depth-`k` states ending at `t`, for `t = k ..= n - 2`.

use std::collections::BTreeMap;

use crate::embedding::{embed, State};
use crate::error::{Error, Result};
use crate::sdf::{Symbol, SymbolSequence};

/// Values in `[-TINY_NEGATIVE, 0)` are floating-point noise and clamp to zero.
pub const TINY_NEGATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram<K> {
    counts: Vec<(K, u64)>,
    total: u64,
}

impl<K: Ord> JointHistogram<K> {
    pub fn from_keys(mut keys: Vec<K>) -> Self {
        keys.sort_unstable();
        let total = keys.len() as u64;
        let mut counts: Vec<(K, u64)> = Vec::new();
        for key in keys {
            match counts.last_mut() {
                Some((last, c)) if *last == key => *c += 1,
                _ => counts.push((key, 1)),
            }
        }
        JointHistogram { counts, total }
    }

    /// Cells in ascending key order; zero cells are absent.
    pub fn counts(&self) -> &[(K, u64)] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, key: &K) -> u64 {
        self.counts
            .binary_search_by(|(k, _)| k.cmp(key))
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn entropy(&self) -> f64 {
        entropy_from_counts(self.counts.iter().map(|&(_, c)| c), self.total)
    }
}

fn entropy_from_counts(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .map(|c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum();
    // -0.0 for single-outcome histograms
    if h == 0.0 {
        0.0
    } else {
        -h
    }
}

/// Entropy of the empirical distribution of `keys`.
pub fn entropy_of<K: Ord + Clone>(keys: &[K]) -> f64 {
    JointHistogram::from_keys(keys.to_vec()).entropy()
}

pub fn shannon_entropy(seq: &SymbolSequence) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(entropy_of(&seq.symbols))
}

/// `H(next | given) = H(next, given) - H(given)`.
pub fn conditional_entropy<N, G>(next: &[N], given: &[G]) -> Result<f64>
where
    N: Ord + Clone,
    G: Ord + Clone,
{
    if next.len() != given.len() {
        return Err(Error::LengthMismatch {
            left: next.len(),
            right: given.len(),
        });
    }
    if next.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(conditional_from_keys(next, given.to_vec()))
}

fn conditional_from_keys<N: Ord + Clone, G: Ord + Clone>(next: &[N], given: Vec<G>) -> f64 {
    let joint: Vec<(G, N)> = given.iter().cloned().zip(next.iter().cloned()).collect();
    JointHistogram::from_keys(joint).entropy() - JointHistogram::from_keys(given).entropy()
}

fn clamp_tiny_negative(value: f64, what: &str) -> f64 {
    if (-TINY_NEGATIVE..0.0).contains(&value) {
        log::trace!("clamped {what} of {value:e} to zero");
        0.0
    } else {
        value
    }
}

fn check_lengths(a: &SymbolSequence, b: &SymbolSequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// A target's own next-symbol/history pairing, reused across many sources.
#[derive(Debug, Clone)]
pub struct TargetHistory {
    next: Vec<Symbol>,
    states: Vec<State>,
    depth: usize,
    len: usize,
    own_conditional: f64,
}

impl TargetHistory {
    pub fn new(target: &SymbolSequence, depth: usize) -> Result<Self> {
        let n = target.len();
        if n <= depth + 1 {
            return Err(Error::SequenceTooShort {
                len: n,
                depth: depth + 1,
            });
        }
        let mut states = embed(target, depth)?.states;
        states.pop();
        let next = target.symbols[depth + 1..].to_vec();
        let own_conditional = conditional_from_keys(&next, states.clone());
        Ok(TargetHistory {
            next,
            states,
            depth,
            len: n,
            own_conditional,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Length of the original target sequence.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of aligned (next, history) samples, `n - k - 1`.
    pub fn samples(&self) -> usize {
        self.next.len()
    }

    /// `H(Z | Z̄)`.
    pub fn own_conditional_entropy(&self) -> f64 {
        self.own_conditional
    }

    fn source_states(&self, source: &SymbolSequence) -> Result<Vec<State>> {
        if source.len() != self.len {
            return Err(Error::LengthMismatch {
                left: source.len(),
                right: self.len,
            });
        }
        let mut states = embed(source, self.depth)?.states;
        states.pop();
        Ok(states)
    }

    /// `H(Z | Z̄, X̄)` for one conditioning source.
    pub fn conditional_entropy_given(&self, source: &SymbolSequence) -> Result<f64> {
        let xs = self.source_states(source)?;
        let given: Vec<(State, State)> = self.states.iter().copied().zip(xs).collect();
        Ok(conditional_from_keys(&self.next, given))
    }

    /// `H(Z | Z̄, X̄, Ȳ)` for two conditioning sources.
    pub fn conditional_entropy_given_pair(&self, x: &SymbolSequence, y: &SymbolSequence) -> Result<f64> {
        let xs = self.source_states(x)?;
        let ys = self.source_states(y)?;
        let given: Vec<(State, State, State)> = self
            .states
            .iter()
            .zip(xs.iter().zip(&ys))
            .map(|(&z, (&x, &y))| (z, x, y))
            .collect();
        Ok(conditional_from_keys(&self.next, given))
    }

    /// `T(X → Z) = H(Z | Z̄) - H(Z | Z̄, X̄)`.
    pub fn transfer_entropy_from(&self, source: &SymbolSequence) -> Result<f64> {
        let te = self.own_conditional - self.conditional_entropy_given(source)?;
        Ok(clamp_tiny_negative(te, "transfer entropy"))
    }
}

/// Transfer entropy from `source` to `target` with embedding depth `k`, as
/// the difference of two conditional entropies.
pub fn transfer_entropy(source: &SymbolSequence, target: &SymbolSequence, k: usize) -> Result<f64> {
    check_lengths(source, target)?;
    TargetHistory::new(target, k)?.transfer_entropy_from(source)
}

/// Transfer entropy evaluated as
/// `Σ p(y', ȳ, x̄) · log2[p(y' | ȳ, x̄) / p(y' | ȳ)]`
/// over explicit count tables. Agrees with [`transfer_entropy`] up to
/// floating-point summation order.
pub fn transfer_entropy_bayes(source: &SymbolSequence, target: &SymbolSequence, k: usize) -> Result<f64> {
    check_lengths(source, target)?;
    let n = target.len();
    if n <= k + 1 {
        return Err(Error::SequenceTooShort { len: n, depth: k + 1 });
    }
    let ys = embed(target, k)?.states;
    let xs = embed(source, k)?.states;

    let mut c_full: BTreeMap<(Symbol, State, State), u64> = BTreeMap::new();
    let mut c_hist: BTreeMap<(State, State), u64> = BTreeMap::new();
    let mut c_next_own: BTreeMap<(Symbol, State), u64> = BTreeMap::new();
    let mut c_own: BTreeMap<State, u64> = BTreeMap::new();
    for i in 0..n - k - 1 {
        let next = target.symbols[i + k + 1];
        *c_full.entry((next, ys[i], xs[i])).or_default() += 1;
        *c_hist.entry((ys[i], xs[i])).or_default() += 1;
        *c_next_own.entry((next, ys[i])).or_default() += 1;
        *c_own.entry(ys[i]).or_default() += 1;
    }
    let total = (n - k - 1) as f64;
    let te: f64 = c_full
        .iter()
        .map(|(&(next, y, x), &c)| {
            let p_joint = c as f64 / total;
            let p_full = c as f64 / c_hist[&(y, x)] as f64;
            let p_own = c_next_own[&(next, y)] as f64 / c_own[&y] as f64;
            p_joint * (p_full / p_own).log2()
        })
        .sum();
    Ok(clamp_tiny_negative(te, "transfer entropy"))
}

/// Causation entropies of `x` and `y` towards target `z`:
/// `(C(X → Z | Z, Y), C(Y → Z | Z, X))`, where
/// `C(X → Z | Z, Y) = H(Z | Z̄, Ȳ) - H(Z | Z̄, X̄, Ȳ)`.
pub fn causation_entropy_pair(
    x: &SymbolSequence,
    y: &SymbolSequence,
    z: &SymbolSequence,
    k: usize,
) -> Result<(f64, f64)> {
    check_lengths(x, z)?;
    check_lengths(y, z)?;
    let history = TargetHistory::new(z, k)?;
    causation_entropy_pair_with(&history, x, y)
}

pub fn causation_entropy_pair_with(
    history: &TargetHistory,
    x: &SymbolSequence,
    y: &SymbolSequence,
) -> Result<(f64, f64)> {
    let h_x = history.conditional_entropy_given(x)?;
    let h_y = history.conditional_entropy_given(y)?;
    let h_xy = history.conditional_entropy_given_pair(x, y)?;
    Ok((
        clamp_tiny_negative(h_y - h_xy, "causation entropy"),
        clamp_tiny_negative(h_x - h_xy, "causation entropy"),
    ))
}
