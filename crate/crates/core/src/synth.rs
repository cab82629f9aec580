//! Deterministic synthetic corpora.
//!
//! [`generate`] enumerates every combination of durations `d_1..d_N` and
//! intervals `l_1..l_{N-1}` in odometer order (last digit fastest), keeps the
//! ones matching the fixed total when one is set, and selects `count` of them.
//! [`variant_pool`] derives jittered copies of one sequence for multi-sample
//! training, and [`generate_rhythms`] builds on/off bar patterns rendered by
//! several simulated instruments.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledSequence};
use crate::error::{Error, Result};
use crate::model::{Alphabet, Segment, SegmentSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// First `count` feasible combinations in enumeration order.
    #[default]
    Odometer,
    /// Seeded uniform sample of `count` feasible combinations, kept in
    /// enumeration order.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolScheme {
    /// Segment `n` uses symbol `S{n}` (and hence state `n - 1`).
    #[default]
    PerPosition,
    /// Every segment uses the single symbol `on`.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterTarget {
    #[default]
    Both,
    Durations,
    Intervals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    pub max_shift: usize,
    pub prob: f64,
    #[serde(default)]
    pub target: JitterTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenPolicy {
    #[serde(rename = "N")]
    pub states: usize,
    pub d_min: usize,
    pub d_max: usize,
    pub l_min: usize,
    pub l_max: usize,
    #[serde(rename = "T", default)]
    pub total: Option<usize>,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub symbols: SymbolScheme,
    #[serde(default = "default_gap")]
    pub gap: String,
    #[serde(default)]
    pub jitter: Option<JitterSpec>,
}

fn default_gap() -> String {
    "_".into()
}

impl GenPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::param("N", "need at least one state"));
        }
        if self.d_min == 0 || self.d_min > self.d_max {
            return Err(Error::param("d_min", format!("need 1 <= d_min <= d_max, got {}..{}", self.d_min, self.d_max)));
        }
        if self.l_min > self.l_max {
            return Err(Error::param("l_min", format!("need l_min <= l_max, got {}..{}", self.l_min, self.l_max)));
        }
        if self.count == 0 {
            return Err(Error::param("count", "must be at least 1"));
        }
        if self.symbols == SymbolScheme::Shared && self.l_min == 0 && self.states > 1 {
            return Err(Error::param("l_min", "a shared symbol needs intervals of at least 1 to keep segments apart"));
        }
        if let Some(j) = &self.jitter {
            j.validate()?;
        }
        Ok(())
    }

    fn digit_ranges(&self) -> Vec<(usize, usize)> {
        let mut r = vec![(self.d_min, self.d_max); self.states];
        r.extend(std::iter::repeat_n((self.l_min, self.l_max), self.states - 1));
        r
    }

    /// Alphabet shared by every sequence of this policy.
    pub fn alphabet(&self) -> Result<Alphabet> {
        match self.symbols {
            SymbolScheme::PerPosition => Alphabet::with_events(&self.gap, position_symbols(self.states)),
            SymbolScheme::Shared => Alphabet::with_events(&self.gap, ["on"]),
        }
    }
}

impl JitterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::param("jitter.prob", format!("must lie in [0, 1], got {}", self.prob)));
        }
        Ok(())
    }
}

/// `S1..SN`, zero-padded so that sorting by name keeps position order.
pub fn position_symbols(n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (1..=n).map(|i| format!("S{i:0width$}")).collect()
}

/// Calls `visit` for every feasible digit vector in odometer order until it
/// returns `false`.
fn enumerate(ranges: &[(usize, usize)], total: Option<usize>, mut visit: impl FnMut(&[usize]) -> bool) {
    // Suffix bounds let fixed-total enumeration prune whole subtrees.
    let mut min_rest = vec![0; ranges.len() + 1];
    let mut max_rest = vec![0; ranges.len() + 1];
    for i in (0..ranges.len()).rev() {
        min_rest[i] = min_rest[i + 1] + ranges[i].0;
        max_rest[i] = max_rest[i + 1] + ranges[i].1;
    }
    let mut digits = Vec::with_capacity(ranges.len());
    fn walk(
        i: usize,
        sum: usize,
        ranges: &[(usize, usize)],
        total: Option<usize>,
        bounds: (&[usize], &[usize]),
        digits: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if let Some(t) = total {
            if sum + bounds.0[i] > t || sum + bounds.1[i] < t {
                return true;
            }
        }
        if i == ranges.len() {
            return visit(digits);
        }
        for v in ranges[i].0..=ranges[i].1 {
            digits.push(v);
            let go_on = walk(i + 1, sum + v, ranges, total, bounds, digits, visit);
            digits.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    walk(0, 0, ranges, total, (&min_rest, &max_rest), &mut digits, &mut visit);
}

fn digits_to_segments(digits: &[usize], states: usize, shared: bool) -> SegmentSequence {
    let (durs, gaps) = digits.split_at(states);
    let mut start = 0;
    let mut segs = Vec::with_capacity(states);
    for (n, &d) in durs.iter().enumerate() {
        if n > 0 {
            start += gaps[n - 1];
        }
        segs.push(Segment::new(if shared { 0 } else { n }, start, d));
        start += d;
    }
    SegmentSequence::new(segs).expect("generated segments are ordered")
}

/// Enumerates, filters and selects sequences; applies jitter when the policy sets it.
pub fn generate(policy: &GenPolicy) -> Result<Corpus> {
    policy.validate()?;
    let ranges = policy.digit_ranges();
    let mut picked: Vec<Vec<usize>> = Vec::new();
    match policy.selection {
        Selection::Odometer => enumerate(&ranges, policy.total, |d| {
            picked.push(d.to_vec());
            picked.len() < policy.count
        }),
        Selection::Uniform => enumerate(&ranges, policy.total, |d| {
            picked.push(d.to_vec());
            true
        }),
    }
    if picked.len() < policy.count {
        return Err(Error::InfeasiblePolicy(format!(
            "only {} combinations satisfy the policy, {} requested",
            picked.len(),
            policy.count
        )));
    }
    if policy.selection == Selection::Uniform {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        let mut keep = index::sample(&mut rng, picked.len(), policy.count).into_vec();
        keep.sort_unstable();
        picked = keep.into_iter().map(|i| std::mem::take(&mut picked[i])).collect();
    }

    let alphabet = policy.alphabet()?;
    let shared = policy.symbols == SymbolScheme::Shared;
    let width = (policy.count - 1).to_string().len().max(4);
    let items = picked
        .iter()
        .enumerate()
        .map(|(i, digits)| {
            let id = format!("n{}-{i:0width$}", policy.states);
            let segments = digits_to_segments(digits, policy.states, shared);
            let base = LabeledSequence::from_segments(id.clone(), Some(id), segments.clone(), segments.end(), &alphabet)?;
            match &policy.jitter {
                None => Ok(base),
                Some(spec) => {
                    let mut rng = stream_rng(policy.seed, i as u64);
                    jitter(&base, spec, &mut rng, &alphabet)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(alphabet, items))
}

/// Independent, reproducible RNG per `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shift(value: usize, spec: &JitterSpec, rng: &mut impl Rng, floor: usize) -> usize {
    if spec.max_shift == 0 || !rng.random_bool(spec.prob) {
        return value;
    }
    let up = rng.random_bool(0.5);
    let by = rng.random_range(1..=spec.max_shift);
    if up {
        value + by
    } else {
        value.saturating_sub(by).max(floor)
    }
}

/// Perturbs durations and/or intervals by `±1..=max_shift` ticks, each with
/// probability `prob`. Durations stay at least 1; intervals between two
/// segments of the same state stay at least 1 so the runs remain separate.
/// The leading and trailing gaps are kept.
pub fn jitter(seq: &LabeledSequence, spec: &JitterSpec, rng: &mut impl Rng, alphabet: &Alphabet) -> Result<LabeledSequence> {
    spec.validate()?;
    let segs = seq.segments.segments();
    let jit_d = spec.target != JitterTarget::Intervals;
    let jit_l = spec.target != JitterTarget::Durations;
    let durs: Vec<usize> = segs
        .iter()
        .map(|s| if jit_d { shift(s.duration, spec, rng, 1) } else { s.duration })
        .collect();
    let gaps: Vec<usize> = segs
        .windows(2)
        .map(|w| {
            let l = w[1].start - w[0].end();
            let floor = usize::from(w[0].state == w[1].state);
            if jit_l { shift(l, spec, rng, floor) } else { l }
        })
        .collect();
    let trailing = seq.ticks.len() - seq.segments.end();
    let mut start = seq.segments.leading_gap();
    let mut out = Vec::with_capacity(segs.len());
    for (i, s) in segs.iter().enumerate() {
        if i > 0 {
            start += gaps[i - 1];
        }
        out.push(Segment::new(s.state, start, durs[i]));
        start += durs[i];
    }
    let segments = SegmentSequence::new(out)?;
    let total = (segments.end() + trailing).max(1);
    LabeledSequence::from_segments(seq.id(), seq.ticks.label.clone(), segments, total, alphabet)
}

/// `size` jittered copies of `base`, drawn from the stream `(seed, index)`.
/// The first `k` entries of a pool do not depend on `size`, so pools of
/// increasing size are nested.
pub fn variant_pool(
    base: &LabeledSequence,
    spec: &JitterSpec,
    seed: u64,
    index: u64,
    size: usize,
    alphabet: &Alphabet,
) -> Result<Vec<LabeledSequence>> {
    let mut rng = stream_rng(seed, index);
    (0..size)
        .map(|j| {
            let mut v = jitter(base, spec, &mut rng, alphabet)?;
            v.ticks.id = format!("{}~v{j}", base.id());
            Ok(v)
        })
        .collect()
}

/// On/off bar patterns, each rendered once per instrument.
///
/// A note sounds for `min(cap, ioi)` ticks, where `ioi` is the distance to the
/// next onset (or the bar end) and `cap` the instrument's longest sounding
/// length, then optionally moves by one tick. At least one silent tick always
/// separates consecutive notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhythmPolicy {
    pub patterns: usize,
    pub ticks_per_bar: usize,
    #[serde(default = "one")]
    pub bars_per_sequence: usize,
    pub min_notes: usize,
    pub max_notes: usize,
    /// Sounding-length cap in ticks, one training rendition per entry.
    pub train_note_caps: Vec<usize>,
    pub test_note_caps: Vec<usize>,
    /// Probability of a ±1 tick change to each sounding length.
    #[serde(default)]
    pub duration_jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// Onset ticks of one bar, at least two ticks apart.
pub type BarPattern = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct RhythmCorpus {
    pub patterns: Vec<BarPattern>,
    pub train: Corpus,
    pub test: Corpus,
}

impl RhythmPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.patterns == 0 {
            return Err(Error::param("patterns", "must be at least 1"));
        }
        if self.ticks_per_bar < 2 {
            return Err(Error::param("ticks_per_bar", "must be at least 2"));
        }
        if self.bars_per_sequence == 0 {
            return Err(Error::param("bars_per_sequence", "must be at least 1"));
        }
        if self.min_notes == 0 || self.min_notes > self.max_notes || self.max_notes > self.ticks_per_bar / 2 {
            return Err(Error::param(
                "min_notes",
                format!("need 1 <= min_notes <= max_notes <= ticks_per_bar / 2, got {}..{}", self.min_notes, self.max_notes),
            ));
        }
        if self.train_note_caps.is_empty() || self.test_note_caps.is_empty() {
            return Err(Error::param("train_note_caps", "need at least one rendition each for training and test"));
        }
        if self.train_note_caps.iter().chain(&self.test_note_caps).any(|&c| c == 0) {
            return Err(Error::param("train_note_caps", "caps must be at least 1 tick"));
        }
        if !(0.0..=1.0).contains(&self.duration_jitter) {
            return Err(Error::param("duration_jitter", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn random_pattern(rng: &mut impl Rng, p: &RhythmPolicy) -> BarPattern {
    let bar = p.ticks_per_bar;
    loop {
        let n = rng.random_range(p.min_notes..=p.max_notes);
        // Onsets on 0..=bar-2 so that even the last note can be followed by silence.
        let mut onsets: Vec<usize> = index::sample(rng, bar - 1, n).into_vec();
        onsets.sort_unstable();
        if onsets.windows(2).all(|w| w[1] - w[0] >= 2) {
            return onsets;
        }
    }
}

fn render_bars(bars: &[&BarPattern], bar_len: usize, cap: usize, jitter: f64, rng: &mut impl Rng) -> SegmentSequence {
    let mut segs = Vec::new();
    for (b, bar) in bars.iter().enumerate() {
        for (i, &on) in bar.iter().enumerate() {
            let ioi = bar.get(i + 1).copied().unwrap_or(bar_len) - on;
            let mut d = cap.min(ioi);
            if jitter > 0.0 && rng.random_bool(jitter) {
                d = if rng.random_bool(0.5) { d + 1 } else { d.saturating_sub(1) };
            }
            segs.push(Segment::new(0, b * bar_len + on, d.clamp(1, ioi - 1)));
        }
    }
    SegmentSequence::new(segs).expect("notes are ordered and separated")
}

/// Draws distinct bar patterns and renders training and test renditions.
/// Multi-bar sequence `i` concatenates patterns `i, i+1, ...` (cyclically).
pub fn generate_rhythms(policy: &RhythmPolicy) -> Result<RhythmCorpus> {
    policy.validate()?;
    let mut rng = stream_rng(policy.seed, 0);
    let mut seen = BTreeSet::new();
    let mut patterns = Vec::new();
    let mut attempts = 0;
    while patterns.len() < policy.patterns {
        attempts += 1;
        if attempts > 1000 * policy.patterns {
            return Err(Error::InfeasiblePolicy(format!(
                "could not draw {} distinct bar patterns",
                policy.patterns
            )));
        }
        let p = random_pattern(&mut rng, policy);
        if seen.insert(p.clone()) {
            patterns.push(p);
        }
    }

    let alphabet = Alphabet::with_events("off", ["on"])?;
    let total = policy.ticks_per_bar * policy.bars_per_sequence;
    let width = (policy.patterns - 1).to_string().len().max(2);
    let render_set = |caps: &[usize], tag: &str, stream: u64| -> Result<Corpus> {
        let mut rng = stream_rng(policy.seed, stream);
        let mut items = Vec::new();
        for i in 0..policy.patterns {
            let bars: Vec<&BarPattern> =
                (0..policy.bars_per_sequence).map(|b| &patterns[(i + b) % policy.patterns]).collect();
            let label = format!("p{i:0width$}");
            for (j, &cap) in caps.iter().enumerate() {
                let segs = render_bars(&bars, policy.ticks_per_bar, cap, policy.duration_jitter, &mut rng);
                items.push(LabeledSequence::from_segments(
                    format!("{label}-{tag}{j}"),
                    Some(label.clone()),
                    segs,
                    total,
                    &alphabet,
                )?);
            }
        }
        Ok(Corpus::new(alphabet.clone(), items))
    };
    let train = render_set(&policy.train_note_caps, "t", 1)?;
    let test = render_set(&policy.test_note_caps, "e", 2)?;
    Ok(RhythmCorpus { patterns, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(n: usize, d: (usize, usize), l: (usize, usize), total: Option<usize>, count: usize) -> GenPolicy {
        GenPolicy {
            states: n,
            d_min: d.0,
            d_max: d.1,
            l_min: l.0,
            l_max: l.1,
            total,
            count,
            seed: 7,
            selection: Selection::Odometer,
            symbols: SymbolScheme::PerPosition,
            gap: "_".into(),
            jitter: None,
        }
    }

    #[test]
    fn small_exhaustive_enumeration() {
        let c = generate(&policy(2, (1, 2), (1, 1), None, 4)).unwrap();
        let texts: Vec<String> = c.items.iter().map(|s| s.ticks.to_text(&c.alphabet)).collect();
        assert_eq!(texts, ["S1_S2", "S1_S2S2", "S1S1_S2", "S1S1_S2S2"]);
        assert!(matches!(
            generate(&policy(2, (1, 2), (1, 1), None, 5)),
            Err(Error::InfeasiblePolicy(_))
        ));
        assert!(matches!(
            generate(&policy(2, (1, 2), (1, 1), Some(9), 1)),
            Err(Error::InfeasiblePolicy(_))
        ));
    }

    #[test]
    fn odometer_runs_last_digit_fastest() {
        let c = generate(&policy(3, (1, 10), (1, 4), Some(14), 3)).unwrap();
        let shapes: Vec<(Vec<usize>, Vec<usize>)> = c
            .items
            .iter()
            .map(|s| {
                (
                    s.segments.segments().iter().map(|g| g.duration).collect(),
                    s.segments.intervals().collect(),
                )
            })
            .collect();
        assert_eq!(shapes[0], (vec![1, 1, 4], vec![4, 4]));
        assert_eq!(shapes[1], (vec![1, 1, 5], vec![3, 4]));
        assert_eq!(shapes[2], (vec![1, 1, 5], vec![4, 3]));
    }

    #[test]
    fn uniform_selection_is_seeded_and_ordered() {
        let mut p = policy(3, (1, 10), (1, 4), Some(14), 50);
        p.selection = Selection::Uniform;
        let a = generate(&p).unwrap();
        assert_eq!(a, generate(&p).unwrap());
        p.seed = 8;
        assert_ne!(a, generate(&p).unwrap());
        let all = generate(&policy(3, (1, 10), (1, 4), Some(14), 1)).unwrap();
        assert_eq!(all.items.len(), 1);
    }

    #[test]
    fn zero_shift_jitter_is_identity() {
        let mut p = policy(3, (1, 10), (1, 4), Some(14), 20);
        let plain = generate(&p).unwrap();
        p.jitter = Some(JitterSpec {
            max_shift: 0,
            prob: 1.0,
            target: JitterTarget::Both,
        });
        assert_eq!(generate(&p).unwrap(), plain);
    }

    #[test]
    fn interval_jitter_keeps_durations() {
        let c = generate(&policy(4, (1, 10), (1, 4), Some(14), 10)).unwrap();
        let spec = JitterSpec {
            max_shift: 2,
            prob: 1.0,
            target: JitterTarget::Intervals,
        };
        for (i, s) in c.items.iter().enumerate() {
            let pool = variant_pool(s, &spec, 3, i as u64, 6, &c.alphabet).unwrap();
            let short = variant_pool(s, &spec, 3, i as u64, 2, &c.alphabet).unwrap();
            assert_eq!(&pool[..2], &short[..]);
            for v in &pool {
                let d: Vec<_> = v.segments.segments().iter().map(|g| (g.state, g.duration)).collect();
                let d0: Vec<_> = s.segments.segments().iter().map(|g| (g.state, g.duration)).collect();
                assert_eq!(d, d0);
                assert_eq!(v.label(), s.label());
            }
        }
    }

    #[test]
    fn rhythms_are_distinct_and_separated() {
        let p = RhythmPolicy {
            patterns: 40,
            ticks_per_bar: 16,
            bars_per_sequence: 2,
            min_notes: 3,
            max_notes: 7,
            train_note_caps: vec![3, 2, 1],
            test_note_caps: vec![1, 1, 2],
            duration_jitter: 0.3,
            seed: 1,
        };
        let r = generate_rhythms(&p).unwrap();
        assert_eq!(r.train.len(), 120);
        assert_eq!(r.test.len(), 120);
        for (item, pat) in r.train.items.iter().step_by(3).zip(&r.patterns) {
            assert_eq!(item.ticks.len(), 32);
            assert_eq!(item.segments.segments()[0].start, pat[0]);
            assert!(item.segments.intervals().all(|l| l >= 1));
        }
        assert_eq!(r, generate_rhythms(&p).unwrap());
    }
}
