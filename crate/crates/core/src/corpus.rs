//! JSON Lines training corpora.
//!
//! Each line is one sequence, in one of two interchangeable forms:
//!
//! ```text
//! {"id": "s0", "label": "a", "gap": "_", "ticks": ["A", "A", "_", "_", "B"]}
//! {"id": "s0", "label": "a", "T": 5, "gap": "_", "events": [{"sym": "A", "start": 0, "dur": 2}, {"sym": "B", "start": 4, "dur": 1}]}
//! ```
//!
//! `gap` is optional in the tick form (the reader's default applies). The
//! alphabet of a corpus is the gap symbol followed by the sorted event symbols.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, Segment, SegmentSequence, TickSequence};
use crate::train::{render_segments, segments_from_ticks};

/// A tick sequence together with its segmentation into states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub ticks: TickSequence,
    pub segments: SegmentSequence,
}

impl LabeledSequence {
    pub fn from_ticks(ticks: TickSequence, alphabet: &Alphabet) -> Self {
        let segments = segments_from_ticks(&ticks, alphabet);
        Self { ticks, segments }
    }

    pub fn from_segments(
        id: impl Into<String>,
        label: Option<String>,
        segments: SegmentSequence,
        total: usize,
        alphabet: &Alphabet,
    ) -> Result<Self> {
        let id = id.into();
        let rendered = render_segments(&segments, total, alphabet).map_err(|e| match e {
            Error::Segments { reason, .. } => Error::Segments { id: id.clone(), reason },
            other => other,
        })?;
        let mut ticks = TickSequence::new(id, rendered)?;
        ticks.label = label;
        Ok(Self { ticks, segments })
    }

    pub fn id(&self) -> &str {
        &self.ticks.id
    }

    /// The label, falling back to the id for unlabeled sequences.
    pub fn label(&self) -> &str {
        self.ticks.label.as_deref().unwrap_or(&self.ticks.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub alphabet: Alphabet,
    pub items: Vec<LabeledSequence>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Event {
    sym: String,
    start: usize,
    dur: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ticks: Option<Vec<String>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    total: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<Vec<Event>>,
}

/// How sequences are written out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineForm {
    Ticks,
    Events,
}

impl Corpus {
    pub fn new(alphabet: Alphabet, items: Vec<LabeledSequence>) -> Self {
        Self { alphabet, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn read_jsonl(reader: impl BufRead, default_gap: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Corpus {
                line: i + 1,
                reason: e.to_string(),
            })?;
            lines.push((i + 1, parsed));
        }

        let gap = lines
            .iter()
            .find_map(|(_, l)| l.gap.clone())
            .unwrap_or_else(|| default_gap.to_string());
        let mut events = BTreeSet::new();
        for (n, l) in &lines {
            if l.gap.as_deref().is_some_and(|g| g != gap) {
                return Err(Error::Corpus {
                    line: *n,
                    reason: format!("gap symbol differs from `{gap}`"),
                });
            }
            match (&l.ticks, &l.events) {
                (Some(ticks), None) => events.extend(ticks.iter().filter(|t| **t != gap).cloned()),
                (None, Some(evs)) => events.extend(evs.iter().map(|e| e.sym.clone())),
                _ => {
                    return Err(Error::Corpus {
                        line: *n,
                        reason: "exactly one of `ticks` or `events` is required".into(),
                    })
                }
            }
        }
        let alphabet =
            Alphabet::with_events(&gap, events).map_err(|e| Error::Corpus { line: 0, reason: e.to_string() })?;

        let items = lines
            .into_iter()
            .map(|(n, l)| line_to_sequence(l, &alphabet).map_err(|e| Error::Corpus { line: n, reason: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { alphabet, items })
    }

    pub fn write_jsonl(&self, mut writer: impl Write, form: LineForm) -> Result<()> {
        for item in &self.items {
            let line = sequence_to_line(item, &self.alphabet, form);
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Re-expresses the corpus over another alphabet, matching symbols by name.
    pub fn reencode(&self, target: &Alphabet) -> Result<Corpus> {
        if target.gap_name() != self.alphabet.gap_name() {
            return Err(Error::Alphabet(format!(
                "gap symbol `{}` does not match `{}`",
                self.alphabet.gap_name(),
                target.gap_name()
            )));
        }
        let map: Vec<usize> = self
            .alphabet
            .names()
            .iter()
            .map(|n| {
                target
                    .id_of(n)
                    .ok_or_else(|| Error::Alphabet(format!("symbol `{n}` is not in the target alphabet")))
            })
            .collect::<Result<_>>()?;
        let state_map = |m: usize| {
            let sym = self.alphabet.symbol_of_state(m).expect("segment state is valid");
            target.state_of_symbol(map[sym]).expect("event symbol maps to an event symbol")
        };
        let items = self
            .items
            .iter()
            .map(|item| {
                let mut ticks =
                    TickSequence::new(item.ticks.id.clone(), item.ticks.ticks().iter().map(|&t| map[t]).collect())?;
                ticks.label = item.ticks.label.clone();
                let segments = SegmentSequence::new(
                    item.segments
                        .segments()
                        .iter()
                        .map(|s| Segment::new(state_map(s.state), s.start, s.duration))
                        .collect(),
                )?;
                Ok(LabeledSequence { ticks, segments })
            })
            .collect::<Result<_>>()?;
        Ok(Corpus {
            alphabet: target.clone(),
            items,
        })
    }

    /// Concatenates corpora, building the union alphabet.
    pub fn merge(parts: &[Corpus]) -> Result<Corpus> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InsufficientData("no corpora to merge".into()))?;
        let gap = first.alphabet.gap_name().to_string();
        let events: BTreeSet<String> = parts
            .iter()
            .flat_map(|c| c.alphabet.names().iter().filter(|n| **n != gap).cloned())
            .collect();
        let alphabet = Alphabet::with_events(&gap, events)?;
        let mut items = Vec::new();
        for part in parts {
            items.extend(part.reencode(&alphabet)?.items);
        }
        Ok(Corpus { alphabet, items })
    }
}

fn line_to_sequence(line: Line, alphabet: &Alphabet) -> Result<LabeledSequence> {
    if let Some(ticks) = line.ticks {
        let mut seq = TickSequence::new(line.id, alphabet.encode(&ticks)?)?;
        seq.label = line.label;
        return Ok(LabeledSequence::from_ticks(seq, alphabet));
    }
    let events = line.events.unwrap_or_default();
    let segments = events
        .iter()
        .map(|e| {
            let sym = alphabet.encode(&[&e.sym])?[0];
            let state = alphabet
                .state_of_symbol(sym)
                .ok_or_else(|| Error::Alphabet(format!("event symbol `{}` is the gap symbol", e.sym)))?;
            Ok(Segment::new(state, e.start, e.dur))
        })
        .collect::<Result<Vec<_>>>()?;
    let segments = SegmentSequence::new(segments).map_err(|e| match e {
        Error::Segments { reason, .. } => Error::Segments { id: line.id.clone(), reason },
        other => other,
    })?;
    let total = line.total.unwrap_or_else(|| segments.end());
    LabeledSequence::from_segments(line.id, line.label, segments, total, alphabet)
}

fn sequence_to_line(item: &LabeledSequence, alphabet: &Alphabet, form: LineForm) -> Line {
    let mut line = Line {
        id: item.ticks.id.clone(),
        label: item.ticks.label.clone(),
        gap: Some(alphabet.gap_name().to_string()),
        ticks: None,
        total: None,
        events: None,
    };
    match form {
        LineForm::Ticks => {
            line.ticks = Some(alphabet.decode(item.ticks.ticks()).into_iter().map(String::from).collect());
        }
        LineForm::Events => {
            line.total = Some(item.ticks.len());
            line.events = Some(
                item.segments
                    .segments()
                    .iter()
                    .map(|s| Event {
                        sym: alphabet
                            .name(alphabet.symbol_of_state(s.state).expect("segment state is valid"))
                            .expect("symbol id is valid")
                            .to_string(),
                        start: s.start,
                        dur: s.duration,
                    })
                    .collect(),
            );
        }
    }
    line
}
