//! Maximum-likelihood estimation from fully segmented sequences.
//!
//! Every table is estimated by counting with optional additive smoothing
//! `alpha`: `p = (count + alpha) / (total + alpha * size)`. With `alpha = 0`
//! unseen events keep probability zero, which makes every path through them
//! impossible at decode time.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};
use crate::model::{
    Alphabet, DihmmModel, EmissionTable, InitialDistribution, IntervalModel, ModelParts, Segment,
    SegmentSequence, SymbolId, TickSequence, TransitionTable, Variant, DEFAULT_FALLBACK_FACTOR,
    DEFAULT_MAX_DURATION, DEFAULT_SIGMA_FLOOR, DEFAULT_THETA_PT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Additive smoothing for transitions, emissions and the initial distribution.
    pub smoothing: f64,
    pub sigma_floor: f64,
    pub theta_pt: f64,
    /// Attenuation `c` applied to the out-of-support interval fallback.
    pub fallback_factor: f64,
    pub max_duration: usize,
    pub forbid_self_transition: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            smoothing: 0.0,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            theta_pt: DEFAULT_THETA_PT,
            fallback_factor: DEFAULT_FALLBACK_FACTOR,
            max_duration: DEFAULT_MAX_DURATION,
            forbid_self_transition: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing >= 0.0) || !self.smoothing.is_finite() {
            return Err(Error::param("smoothing", format!("must be >= 0, got {}", self.smoothing)));
        }
        if !(self.theta_pt > 0.0) {
            return Err(Error::param("theta_pt", format!("must be > 0, got {}", self.theta_pt)));
        }
        if !(0.0..=1.0).contains(&self.fallback_factor) {
            return Err(Error::param("c", format!("must lie in [0, 1], got {}", self.fallback_factor)));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::param("sigma_floor", format!("must be > 0, got {}", self.sigma_floor)));
        }
        if self.max_duration == 0 {
            return Err(Error::param("max_duration", "must be at least 1"));
        }
        Ok(())
    }
}

/// Run-length encodes the non-gap runs of a tick sequence.
pub fn segments_from_ticks(seq: &TickSequence, alphabet: &Alphabet) -> SegmentSequence {
    let mut segments = Vec::new();
    let ticks = seq.ticks();
    let mut i = 0;
    while i < ticks.len() {
        let sym = ticks[i];
        let run = ticks[i..].iter().take_while(|&&t| t == sym).count();
        if let Some(state) = alphabet.state_of_symbol(sym) {
            segments.push(Segment::new(state, i, run));
        }
        i += run;
    }
    SegmentSequence::new(segments).expect("runs are ordered and non-empty")
}

/// Inverse of [`segments_from_ticks`]: segments over a gap background of `total` ticks.
pub fn render_segments(segments: &SegmentSequence, total: usize, alphabet: &Alphabet) -> Result<Vec<SymbolId>> {
    segments.check_length(total)?;
    let mut ticks = vec![alphabet.gap_id(); total];
    for (i, seg) in segments.segments().iter().enumerate() {
        let sym = alphabet.symbol_of_state(seg.state).ok_or_else(|| Error::Segments {
            id: String::new(),
            reason: format!("segment {i} has state {} but the alphabet has {} states", seg.state, alphabet.state_count()),
        })?;
        ticks[seg.start..seg.end()].fill(sym);
    }
    Ok(ticks)
}

fn smoothed(count: f64, total: f64, alpha: f64, size: f64) -> f64 {
    (count + alpha) / (total + alpha * size)
}

/// Fits one model on all the given sequences.
pub fn fit_model(
    alphabet: &Alphabet,
    data: &[LabeledSequence],
    cfg: &TrainingConfig,
    variant: Variant,
    label: &str,
) -> Result<DihmmModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingData);
    }
    let states = alphabet.state_count();
    if states == 0 {
        return Err(Error::Alphabet("alphabet has no event symbols".into()));
    }
    let dmax = cfg.max_duration;
    let pairs = states * dmax;
    let k = alphabet.len();
    let alpha = cfg.smoothing;

    let mut pi_counts = vec![0.0; pairs];
    let mut trans_counts = vec![0.0; pairs * pairs];
    let mut emit_counts = vec![0.0; states * k];
    let mut gaps: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();

    for item in data {
        let id = item.id();
        item.ticks.check_alphabet(alphabet)?;
        item.segments
            .check_length(item.ticks.len())
            .map_err(|e| relabel(e, id))?;
        let segs = item.segments.segments();
        for (i, seg) in segs.iter().enumerate() {
            if seg.state >= states {
                return Err(Error::Segments {
                    id: id.to_string(),
                    reason: format!("segment {i} has state {} but the alphabet has {states} states", seg.state),
                });
            }
            if seg.duration > dmax {
                return Err(Error::DurationExceedsCap {
                    id: id.to_string(),
                    index: i,
                    duration: seg.duration,
                    cap: dmax,
                });
            }
            for &sym in &item.ticks.ticks()[seg.start..seg.end()] {
                emit_counts[seg.state * k + sym] += 1.0;
            }
        }
        let Some(first) = segs.first() else { continue };
        pi_counts[first.state * dmax + first.duration - 1] += 1.0;
        for w in segs.windows(2) {
            let (prev, next) = (w[0], w[1]);
            if cfg.forbid_self_transition && prev.state == next.state {
                return Err(Error::SelfTransition {
                    id: id.to_string(),
                    state: prev.state,
                });
            }
            let src = prev.state * dmax + prev.duration - 1;
            let dst = next.state * dmax + next.duration - 1;
            trans_counts[src * pairs + dst] += 1.0;
            gaps.entry((prev.state, next.state))
                .or_default()
                .push(next.start - prev.end());
        }
    }

    let pi_total: f64 = pi_counts.iter().sum();
    if pi_total == 0.0 {
        return Err(Error::InsufficientData(format!(
            "no training sequence for `{label}` contains an event"
        )));
    }
    let mut initial = InitialDistribution::zeros(states, dmax);
    for m in 0..states {
        for d in 1..=dmax {
            let p = smoothed(pi_counts[m * dmax + d - 1], pi_total, alpha, pairs as f64);
            initial.set(m, d, p);
        }
    }

    // Targets in the same state as the source are excluded when forbidden.
    let row_size = if cfg.forbid_self_transition {
        (states - 1) * dmax
    } else {
        pairs
    };
    let mut transitions = TransitionTable::zeros(states, dmax);
    for from in 0..states {
        for from_dur in 1..=dmax {
            let src = from * dmax + from_dur - 1;
            let row = &trans_counts[src * pairs..(src + 1) * pairs];
            let total: f64 = row.iter().sum();
            if total == 0.0 && (alpha == 0.0 || row_size == 0) {
                continue;
            }
            for to in 0..states {
                if cfg.forbid_self_transition && to == from {
                    continue;
                }
                for to_dur in 1..=dmax {
                    let c = row[to * dmax + to_dur - 1];
                    transitions.set(from, from_dur, to, to_dur, smoothed(c, total, alpha, row_size as f64));
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(states);
    for m in 0..states {
        let counts = &emit_counts[m * k..(m + 1) * k];
        let total: f64 = counts.iter().sum();
        if total == 0.0 && alpha == 0.0 {
            // Never observed and unreachable; any valid row will do.
            rows.push(vec![1.0 / k as f64; k]);
        } else {
            rows.push(counts.iter().map(|&c| smoothed(c, total, alpha, k as f64)).collect());
        }
    }
    let emissions = EmissionTable::from_rows(rows).expect("rows share the alphabet size");

    let intervals = match variant {
        Variant::Hsmm => Vec::new(),
        Variant::Dihmm => gaps
            .iter()
            .map(|(&(from, to), samples)| IntervalModel::fit(from, to, samples, cfg.sigma_floor, cfg.theta_pt))
            .collect::<Result<Vec<_>>>()?,
    };

    DihmmModel::new(ModelParts {
        label: label.to_string(),
        variant,
        alphabet: alphabet.clone(),
        initial,
        transitions,
        emissions,
        intervals,
        theta_pt: cfg.theta_pt,
        fallback_factor: cfg.fallback_factor,
        sigma_floor: cfg.sigma_floor,
    })
}

fn relabel(e: Error, id: &str) -> Error {
    match e {
        Error::Segments { reason, .. } => Error::Segments {
            id: id.to_string(),
            reason,
        },
        other => other,
    }
}

/// Fits one model per distinct label, in parallel.
pub fn fit_label_set(
    alphabet: &Alphabet,
    data: &[LabeledSequence],
    cfg: &TrainingConfig,
    variant: Variant,
) -> Result<BTreeMap<String, DihmmModel>> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingData);
    }
    let mut groups: BTreeMap<&str, Vec<LabeledSequence>> = BTreeMap::new();
    for item in data {
        groups.entry(item.label()).or_default().push(item.clone());
    }
    groups
        .into_par_iter()
        .map(|(label, items)| Ok((label.to_string(), fit_model(alphabet, &items, cfg, variant, label)?)))
        .collect()
}
