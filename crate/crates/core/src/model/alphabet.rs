//! Observation alphabets and tick sequences.
//!
//! An alphabet is an ordered list of symbol names with one designated gap
//! symbol that stands for "no event observed at this tick". Every other symbol
//! is an event symbol, and event symbols are in one-to-one correspondence with
//! hidden states: state `m` is the `m`-th non-gap symbol in alphabet order.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into an [`Alphabet`].
pub type SymbolId = usize;

/// Index of a hidden state.
pub type StateId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    names: Vec<String>,
    gap: SymbolId,
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, gap: &str) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Alphabet("alphabet has no symbols".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::Alphabet("symbol names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Alphabet(format!("duplicate symbol `{name}`")));
            }
        }
        let gap = names
            .iter()
            .position(|n| n == gap)
            .ok_or_else(|| Error::Alphabet(format!("gap symbol `{gap}` is not in the alphabet")))?;
        Ok(Self { names, gap })
    }

    /// Gap symbol first, then the given event symbols.
    pub fn with_events<S: Into<String>>(gap: &str, events: impl IntoIterator<Item = S>) -> Result<Self> {
        let names = std::iter::once(gap.to_string()).chain(events.into_iter().map(Into::into));
        Self::new(names.collect::<Vec<_>>(), gap)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: SymbolId) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<SymbolId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn gap_id(&self) -> SymbolId {
        self.gap
    }

    pub fn gap_name(&self) -> &str {
        &self.names[self.gap]
    }

    /// Number of hidden states implied by the alphabet (one per event symbol).
    pub fn state_count(&self) -> usize {
        self.names.len() - 1
    }

    pub fn state_of_symbol(&self, id: SymbolId) -> Option<StateId> {
        if id == self.gap || id >= self.names.len() {
            None
        } else if id > self.gap {
            Some(id - 1)
        } else {
            Some(id)
        }
    }

    pub fn symbol_of_state(&self, state: StateId) -> Option<SymbolId> {
        if state >= self.state_count() {
            None
        } else if state >= self.gap {
            Some(state + 1)
        } else {
            Some(state)
        }
    }

    pub fn encode<S: AsRef<str>>(&self, symbols: &[S]) -> Result<Vec<SymbolId>> {
        symbols
            .iter()
            .map(|s| {
                let s = s.as_ref();
                self.id_of(s)
                    .ok_or_else(|| Error::Alphabet(format!("unknown symbol `{s}`")))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[SymbolId]) -> Vec<&str> {
        ids.iter().map(|&id| self.names[id].as_str()).collect()
    }
}

/// An observation sequence at unit tick resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSequence {
    pub id: String,
    pub label: Option<String>,
    ticks: Vec<SymbolId>,
}

impl TickSequence {
    pub fn new(id: impl Into<String>, ticks: Vec<SymbolId>) -> Result<Self> {
        let id = id.into();
        if ticks.is_empty() {
            return Err(Error::Sequence {
                id,
                reason: "sequence has no ticks".into(),
            });
        }
        Ok(Self {
            id,
            label: None,
            ticks,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Encodes a string where every character is one symbol name.
    pub fn from_chars(id: impl Into<String>, text: &str, alphabet: &Alphabet) -> Result<Self> {
        let names: Vec<String> = text.chars().map(String::from).collect();
        Self::new(id, alphabet.encode(&names)?)
    }

    pub fn ticks(&self) -> &[SymbolId] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn check_alphabet(&self, alphabet: &Alphabet) -> Result<()> {
        match self.ticks.iter().position(|&t| t >= alphabet.len()) {
            Some(pos) => Err(Error::Sequence {
                id: self.id.clone(),
                reason: format!(
                    "tick {pos} has symbol id {} but the alphabet has {} symbols",
                    self.ticks[pos],
                    alphabet.len()
                ),
            }),
            None => Ok(()),
        }
    }

    pub fn to_text(&self, alphabet: &Alphabet) -> String {
        alphabet.decode(&self.ticks).concat()
    }
}
