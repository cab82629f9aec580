use serde::{Deserialize, Serialize};

use super::alphabet::StateId;
use crate::error::{Error, Result};

/// One visit to a hidden state: `duration` ticks starting at tick `start` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub state: StateId,
    pub start: usize,
    pub duration: usize,
}

impl Segment {
    pub fn new(state: StateId, start: usize, duration: usize) -> Self {
        Self {
            state,
            start,
            duration,
        }
    }

    /// One past the last tick covered by the segment.
    pub fn end(&self) -> usize {
        self.start + self.duration
    }
}

/// Ordered, non-overlapping segments. The gaps between consecutive segments are
/// the state intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentSequence {
    segments: Vec<Segment>,
}

impl SegmentSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (i, seg) in segments.iter().enumerate() {
            if seg.duration == 0 {
                return Err(Error::Segments {
                    id: String::new(),
                    reason: format!("segment {i} has zero duration"),
                });
            }
            if i > 0 && seg.start < segments[i - 1].end() {
                return Err(Error::Segments {
                    id: String::new(),
                    reason: format!("segment {i} starts at {} before the previous one ends", seg.start),
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `l_{n-1,n}` for every consecutive pair, in order.
    pub fn intervals(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.windows(2).map(|w| w[1].start - w[0].end())
    }

    /// Ticks before the first segment.
    pub fn leading_gap(&self) -> usize {
        self.segments.first().map_or(0, |s| s.start)
    }

    /// One past the last covered tick.
    pub fn end(&self) -> usize {
        self.segments.last().map_or(0, Segment::end)
    }

    /// Sum of durations plus sum of inner intervals.
    pub fn span(&self) -> usize {
        self.end() - self.leading_gap()
    }

    pub fn check_length(&self, total: usize) -> Result<()> {
        if self.end() > total {
            return Err(Error::Segments {
                id: String::new(),
                reason: format!("segments end at tick {} past sequence length {total}", self.end()),
            });
        }
        Ok(())
    }
}
