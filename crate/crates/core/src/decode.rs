//! Extended Viterbi decoding over `(end tick, state, duration)`.
//!
//! `delta[t][(m, D)]` is the best log-likelihood of a partial path whose last
//! segment is state `m` occupying ticks `t-D..t`. The predecessor segment ends
//! `L` ticks before that window starts:
//!
//! ```text
//! delta[t][(m, D)] = max_{m', D', L} delta[t-D-L][(m', D')] + ln a + ln p(L | m', m) + ln b(t-D..t)
//! ```
//!
//! The HSMM decoder runs the same recursion with `ln p(L) = 0`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_index, DihmmModel, Score, Segment, SegmentSequence, StateId, TickSequence, Variant};

/// How ticks between two segments are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMode {
    /// Interval, leading and trailing ticks must all be the gap symbol.
    #[default]
    Strict,
    /// Those ticks are unconstrained and unscored.
    Skip,
}

impl std::str::FromStr for GapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(GapMode::Strict),
            "skip" => Ok(GapMode::Skip),
            other => Err(Error::param("gap_mode", format!("expected strict or skip, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub gap_mode: GapMode,
    pub allow_leading_gap: bool,
    pub allow_trailing_gap: bool,
    pub normalize_scores: bool,
    /// Hard cap on interval length. Unset: unbounded under strict mode,
    /// largest trained support plus `interval_slack` under skip mode.
    pub max_interval: Option<usize>,
    pub interval_slack: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            gap_mode: GapMode::Strict,
            allow_leading_gap: true,
            allow_trailing_gap: true,
            normalize_scores: false,
            max_interval: None,
            interval_slack: 0,
        }
    }
}

impl DecodeConfig {
    fn interval_cap(&self, trained: Option<usize>, len: usize) -> usize {
        let cap = match (self.max_interval, self.gap_mode, trained) {
            (Some(cap), _, _) => cap,
            (None, GapMode::Skip, Some(hi)) => hi + self.interval_slack,
            _ => len,
        };
        cap.min(len)
    }
}

/// Decodes with HSMM semantics: intervals are consumed but carry no factor.
pub fn viterbi_hsmm(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig) -> Result<Score> {
    expect_variant(model, Variant::Hsmm)?;
    run(model, seq, cfg, None, |_, _, _| 0.0)
}

/// Decodes with the Gaussian interval factor between consecutive states.
pub fn viterbi_dihmm(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig) -> Result<Score> {
    expect_variant(model, Variant::Dihmm)?;
    let intervals = model.intervals();
    if intervals.is_empty() {
        if let Some((from, to)) = model.logs().first_transition {
            return Err(Error::UntrainedInterval { from, to });
        }
    }
    let trained = (!intervals.is_empty()).then(|| intervals.max_support());
    run(model, seq, cfg, trained, |from, to, len| {
        intervals
            .interval_prob(from, to, len)
            .map_or(f64::NEG_INFINITY, f64::ln)
    })
}

/// Decodes with caller-supplied log interval factors, ignoring the model's
/// own interval set and variant.
pub fn viterbi_custom(
    model: &DihmmModel,
    seq: &TickSequence,
    cfg: &DecodeConfig,
    log_interval: impl Fn(StateId, StateId, usize) -> f64,
) -> Result<Score> {
    run(model, seq, cfg, None, log_interval)
}

/// Dispatches on the model variant.
pub fn score(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig) -> Result<Score> {
    match model.variant() {
        Variant::Hsmm => viterbi_hsmm(model, seq, cfg),
        Variant::Dihmm => viterbi_dihmm(model, seq, cfg),
    }
}

fn expect_variant(model: &DihmmModel, expected: Variant) -> Result<()> {
    if model.variant() != expected {
        return Err(Error::VariantMismatch {
            label: model.label().to_string(),
            expected: expected.name(),
            found: model.variant().name(),
        });
    }
    Ok(())
}

const START: usize = usize::MAX;

fn run(
    model: &DihmmModel,
    seq: &TickSequence,
    cfg: &DecodeConfig,
    trained_cap: Option<usize>,
    log_interval: impl Fn(StateId, StateId, usize) -> f64,
) -> Result<Score> {
    let ticks = seq.ticks();
    let t_len = ticks.len();
    if t_len == 0 {
        return Err(Error::Sequence {
            id: seq.id.clone(),
            reason: "sequence is empty".into(),
        });
    }
    let k = model.alphabet().len();
    if let Some(i) = ticks.iter().position(|&s| s >= k) {
        return Err(Error::Sequence {
            id: seq.id.clone(),
            reason: format!("tick {i} has symbol id {} outside the model alphabet of {k}", ticks[i]),
        });
    }

    let m_count = model.states();
    let dmax = model.max_duration();
    let pairs = m_count * dmax;
    let logs = model.logs();
    let gap = model.alphabet().gap_id();
    let strict = cfg.gap_mode == GapMode::Strict;
    let cap = cfg.interval_cap(trained_cap, t_len);

    // Window emission sums via prefix sums; zero-probability ticks are counted
    // separately so that -inf never enters a subtraction.
    let mut prefix = vec![0.0; m_count * (t_len + 1)];
    let mut zeros = vec![0u32; m_count * (t_len + 1)];
    for m in 0..m_count {
        let base = m * (t_len + 1);
        for (i, &sym) in ticks.iter().enumerate() {
            let le = logs.emit[m * k + sym];
            let (p, z) = if le == f64::NEG_INFINITY { (0.0, 1) } else { (le, 0) };
            prefix[base + i + 1] = prefix[base + i] + p;
            zeros[base + i + 1] = zeros[base + i] + z;
        }
    }
    let window = |m: usize, s: usize, t: usize| {
        let base = m * (t_len + 1);
        if zeros[base + t] != zeros[base + s] {
            f64::NEG_INFINITY
        } else {
            prefix[base + t] - prefix[base + s]
        }
    };

    // gap_before[s]: consecutive gap ticks ending at s-1; gap_after[t]: starting at t.
    let mut gap_before = vec![0usize; t_len + 1];
    for i in 0..t_len {
        gap_before[i + 1] = if ticks[i] == gap { gap_before[i] + 1 } else { 0 };
    }
    let mut gap_after = vec![0usize; t_len + 1];
    for i in (0..t_len).rev() {
        gap_after[i] = if ticks[i] == gap { gap_after[i + 1] + 1 } else { 0 };
    }

    // Under strict mode no interval can outlast the longest gap run.
    let longest_gap = gap_before.iter().copied().max().unwrap_or(0);
    let cap = if strict { cap.min(longest_gap) } else { cap };
    let li_len = cap + 1;
    let mut log_int = vec![0.0; m_count * m_count * li_len];
    for from in 0..m_count {
        for to in 0..m_count {
            for len in 0..li_len {
                log_int[(from * m_count + to) * li_len + len] = log_interval(from, to, len);
            }
        }
    }

    let mut initial = vec![f64::NEG_INFINITY; pairs];
    for &(m, d, lp) in &logs.initial {
        initial[pair_index(m, d, dmax)] = lp;
    }

    let mut delta = vec![f64::NEG_INFINITY; (t_len + 1) * pairs];
    let mut back = vec![(START, START); (t_len + 1) * pairs];

    for t in 1..=t_len {
        for m in 0..m_count {
            for d in 1..=dmax.min(t) {
                let s = t - d;
                let emit = window(m, s, t);
                if emit == f64::NEG_INFINITY {
                    continue;
                }
                let target = pair_index(m, d, dmax);
                let mut best = f64::NEG_INFINITY;
                let mut arg = (START, START);

                let lead_ok = s == 0 || (cfg.allow_leading_gap && (!strict || gap_before[s] == s));
                if lead_ok && initial[target] > f64::NEG_INFINITY {
                    best = initial[target];
                }

                let l_max = if strict { gap_before[s].min(cap) } else { cap.min(s) };
                for &(pm, pd, la) in &logs.incoming[target] {
                    let src = pair_index(pm, pd, dmax);
                    let ints = &log_int[(pm * m_count + m) * li_len..][..li_len];
                    for (l, &li) in ints.iter().enumerate().take(l_max + 1) {
                        let pe = s - l;
                        if pe < pd {
                            break;
                        }
                        let prev = delta[pe * pairs + src];
                        if prev == f64::NEG_INFINITY || li == f64::NEG_INFINITY {
                            continue;
                        }
                        let v = prev + la + li;
                        if v > best {
                            best = v;
                            arg = (pe, src);
                        }
                    }
                }
                if best > f64::NEG_INFINITY {
                    delta[t * pairs + target] = best + emit;
                    back[t * pairs + target] = arg;
                }
            }
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut end = (START, START);
    for t in (1..=t_len).rev() {
        if t < t_len && (!cfg.allow_trailing_gap || (strict && gap_after[t] != t_len - t)) {
            continue;
        }
        for (p, &v) in delta[t * pairs..(t + 1) * pairs].iter().enumerate() {
            if v > best {
                best = v;
                end = (t, p);
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(Score::impossible());
    }

    let mut segments = Vec::new();
    let (mut t, mut p) = end;
    while t != START {
        let (m, d) = (p / dmax, p % dmax + 1);
        segments.push(Segment::new(m, t - d, d));
        (t, p) = back[t * pairs + p];
    }
    segments.reverse();
    Ok(Score {
        log_likelihood: best,
        normalized: None,
        best_path: Some(SegmentSequence::new(segments)?),
    })
}

/// Outcome of scoring one sequence against a labeled model set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Winning label; `None` when every model scores `-inf`.
    pub label: Option<String>,
    /// Whether the winning score is strictly above every other score.
    pub unique: bool,
    pub scores: Vec<(String, Score)>,
}

/// Scores `seq` against every model and picks the maximum; ties go to the
/// lexicographically smallest label.
pub fn classify(models: &BTreeMap<String, DihmmModel>, seq: &TickSequence, cfg: &DecodeConfig) -> Result<Classification> {
    let first = models
        .values()
        .next()
        .ok_or_else(|| Error::IncompatibleModels("no models to classify against".into()))?;
    for (label, m) in models {
        if m.variant() != first.variant() {
            return Err(Error::IncompatibleModels(format!(
                "`{label}` is {} but `{}` is {}",
                m.variant(),
                first.label(),
                first.variant()
            )));
        }
        if m.alphabet() != first.alphabet() {
            return Err(Error::IncompatibleModels(format!(
                "`{label}` and `{}` use different alphabets",
                first.label()
            )));
        }
    }
    let mut scores = models
        .par_iter()
        .map(|(label, m)| Ok((label.clone(), score(m, seq, cfg)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut label = None;
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0;
    for (l, s) in &scores {
        if s.log_likelihood > best {
            best = s.log_likelihood;
            label = Some(l.clone());
            ties = 1;
        } else if s.log_likelihood == best && best > f64::NEG_INFINITY {
            ties += 1;
        }
    }
    if cfg.normalize_scores && best > f64::NEG_INFINITY {
        let z: f64 = scores.iter().map(|(_, s)| (s.log_likelihood - best).exp()).sum();
        for (_, s) in &mut scores {
            s.normalized = Some((s.log_likelihood - best).exp() / z);
        }
    }
    Ok(Classification {
        unique: ties == 1,
        label,
        scores,
    })
}
