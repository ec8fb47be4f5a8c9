//! Symbol sequence to state sequence embedding.
//!
//! The state at original index `t ≥ k` encodes the window
//! `x[t-k], …, x[t]` as a base-`b` number with the earliest symbol as the most
//! significant digit. No state is produced for the first `k` positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdf::{Symbol, SymbolSequence};

pub type State = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    pub states: Vec<State>,
    pub depth: usize,
    pub base: u64,
}

impl StateSequence {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of distinct states the encoding can express, `b^(k+1)`.
    pub fn state_space(&self) -> u64 {
        self.base.pow(self.depth as u32 + 1)
    }

    pub fn decode(&self, state: State) -> Vec<Symbol> {
        decode_window(state, self.base, self.depth)
    }
}

fn checked_state_space(base: u64, depth: usize) -> Result<u64> {
    u32::try_from(depth + 1)
        .ok()
        .and_then(|w| base.checked_pow(w))
        .ok_or(Error::StateSpaceOverflow {
            base,
            width: depth + 1,
        })
}

pub fn encode_window(window: &[Symbol], base: u64) -> State {
    window.iter().fold(0, |acc, &s| acc * base + s as State)
}

pub fn decode_window(mut state: State, base: u64, depth: usize) -> Vec<Symbol> {
    let mut window = vec![0; depth + 1];
    for slot in window.iter_mut().rev() {
        *slot = (state % base) as Symbol;
        state /= base;
    }
    window
}

pub fn embed(seq: &SymbolSequence, depth: usize) -> Result<StateSequence> {
    let n = seq.len();
    if n <= depth {
        return Err(Error::SequenceTooShort { len: n, depth });
    }
    let base = seq.alphabet_size as u64;
    // modulus for the low k digits carried into the next window
    let carry = checked_state_space(base, depth)? / base;

    let mut states = Vec::with_capacity(n - depth);
    let mut state = encode_window(&seq.symbols[..depth], base);
    for &s in &seq.symbols[depth..] {
        state = (state % carry) * base + s as State;
        states.push(state);
    }
    Ok(StateSequence { states, depth, base })
}
