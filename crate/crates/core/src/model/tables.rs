//! Dense probability tables over `(state, duration)` pairs.
//!
//! Durations are 1-based tick counts in `1..=max_duration`; internally a pair
//! `(m, d)` maps to the flat index `m * max_duration + (d - 1)`.

use serde::{Deserialize, Serialize};

use super::alphabet::{StateId, SymbolId};

#[inline]
pub(crate) fn pair_index(state: StateId, duration: usize, max_duration: usize) -> usize {
    debug_assert!(duration >= 1 && duration <= max_duration);
    state * max_duration + duration - 1
}

/// `a[(m', D'), (m, D)]`: probability of entering state `m` for `D` ticks after
/// leaving state `m'` that lasted `D'` ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    states: usize,
    max_duration: usize,
    probs: Vec<f64>,
}

impl TransitionTable {
    pub fn zeros(states: usize, max_duration: usize) -> Self {
        let pairs = states * max_duration;
        Self {
            states,
            max_duration,
            probs: vec![0.0; pairs * pairs],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn max_duration(&self) -> usize {
        self.max_duration
    }

    pub fn pair_count(&self) -> usize {
        self.states * self.max_duration
    }

    fn index(&self, from: StateId, from_dur: usize, to: StateId, to_dur: usize) -> usize {
        pair_index(from, from_dur, self.max_duration) * self.pair_count()
            + pair_index(to, to_dur, self.max_duration)
    }

    pub fn get(&self, from: StateId, from_dur: usize, to: StateId, to_dur: usize) -> f64 {
        self.probs[self.index(from, from_dur, to, to_dur)]
    }

    pub fn set(&mut self, from: StateId, from_dur: usize, to: StateId, to_dur: usize, p: f64) {
        let i = self.index(from, from_dur, to, to_dur);
        self.probs[i] = p;
    }

    /// Outgoing probabilities of one source pair, indexed by target pair.
    pub fn row(&self, from: StateId, from_dur: usize) -> &[f64] {
        let n = self.pair_count();
        let start = pair_index(from, from_dur, self.max_duration) * n;
        &self.probs[start..start + n]
    }

    /// Non-zero entries as `(from, from_dur, to, to_dur, p)`.
    pub fn entries(&self) -> impl Iterator<Item = (StateId, usize, StateId, usize, f64)> + '_ {
        let n = self.pair_count();
        let dmax = self.max_duration;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(move |(i, &p)| {
                let (src, dst) = (i / n, i % n);
                (src / dmax, src % dmax + 1, dst / dmax, dst % dmax + 1, p)
            })
    }
}

/// Per-state categorical emission distribution `e[m][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionTable {
    states: usize,
    symbols: usize,
    probs: Vec<f64>,
}

impl EmissionTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Option<Self> {
        let symbols = rows.first()?.len();
        if rows.iter().any(|r| r.len() != symbols) {
            return None;
        }
        Some(Self {
            states: rows.len(),
            symbols,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn get(&self, state: StateId, symbol: SymbolId) -> f64 {
        self.probs[state * self.symbols + symbol]
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.probs[state * self.symbols..(state + 1) * self.symbols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.symbols)
    }
}

/// `pi[(m, D)]`: distribution of the first segment's state and duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    states: usize,
    max_duration: usize,
    probs: Vec<f64>,
}

impl InitialDistribution {
    pub fn zeros(states: usize, max_duration: usize) -> Self {
        Self {
            states,
            max_duration,
            probs: vec![0.0; states * max_duration],
        }
    }

    pub fn get(&self, state: StateId, duration: usize) -> f64 {
        self.probs[pair_index(state, duration, self.max_duration)]
    }

    pub fn set(&mut self, state: StateId, duration: usize, p: f64) {
        let i = pair_index(state, duration, self.max_duration);
        self.probs[i] = p;
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn max_duration(&self) -> usize {
        self.max_duration
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Non-zero entries as `(state, duration, p)`.
    pub fn entries(&self) -> impl Iterator<Item = (StateId, usize, f64)> + '_ {
        let dmax = self.max_duration;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(move |(i, &p)| (i / dmax, i % dmax + 1, p))
    }
}
