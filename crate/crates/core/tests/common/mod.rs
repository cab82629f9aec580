//! Random small instances and an exhaustive reference scorer.
#![allow(dead_code)]

use dihmm::decode::{DecodeConfig, GapMode};
use dihmm::model::{
    truncate_support, Alphabet, DihmmModel, EmissionTable, InitialDistribution, IntervalModel, ModelParts,
    Segment, TickSequence, TransitionTable, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub model: DihmmModel,
    pub seq: TickSequence,
    pub cfg: DecodeConfig,
}

fn random_row(rng: &mut ChaCha8Rng, len: usize, zero_prob: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len)
        .map(|_| if rng.random_bool(zero_prob) { 0.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    if row.iter().all(|&p| p == 0.0) {
        let i = rng.random_range(0..len);
        row[i] = 1.0;
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
    row
}

/// M ≤ 3, K ≤ 3, T ≤ 10, D_cap ≤ 4 and, when capped, L_cap ≤ 3.
pub fn random_instance(seed: u64, variant: Variant) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = rng.random_range(1..=3usize);
    let symbols = rng.random_range(2..=3usize);
    let dmax = rng.random_range(1..=4usize);
    let t_len = rng.random_range(1..=10usize);
    let names: Vec<String> = (0..symbols).map(|i| if i == 0 { "_".into() } else { format!("s{i}") }).collect();
    let alphabet = Alphabet::new(names, "_").unwrap();
    let pairs = states * dmax;

    let mut initial = InitialDistribution::zeros(states, dmax);
    for (i, p) in random_row(&mut rng, pairs, 0.4).into_iter().enumerate() {
        initial.set(i / dmax, i % dmax + 1, p);
    }
    let forbid_self = rng.random_bool(0.5);
    let mut transitions = TransitionTable::zeros(states, dmax);
    for src in 0..pairs {
        if rng.random_bool(0.15) {
            continue;
        }
        let targets: Vec<usize> = (0..pairs).filter(|&j| !(forbid_self && j / dmax == src / dmax)).collect();
        if targets.is_empty() {
            continue;
        }
        for (j, p) in targets.iter().zip(random_row(&mut rng, targets.len(), 0.4)) {
            transitions.set(src / dmax, src % dmax + 1, j / dmax, j % dmax + 1, p);
        }
    }
    let emissions = EmissionTable::from_rows((0..states).map(|_| random_row(&mut rng, symbols, 0.3)).collect()).unwrap();

    let theta_pt = 1e-4;
    let sigma_floor = 0.5;
    let mut intervals = Vec::new();
    if variant == Variant::Dihmm {
        for from in 0..states {
            for to in 0..states {
                if rng.random_bool(0.6) || (from, to) == (states - 1, 0) && intervals.is_empty() {
                    let mean = rng.random_range(0.0..3.0);
                    let std_dev = rng.random_range(sigma_floor..1.5);
                    let (lo, hi) = truncate_support(mean, std_dev, theta_pt).unwrap();
                    intervals.push(IntervalModel {
                        from,
                        to,
                        mean,
                        std_dev,
                        lo,
                        hi,
                        samples: 1,
                    });
                }
            }
        }
    }
    let model = DihmmModel::new(ModelParts {
        label: format!("r{seed}"),
        variant,
        alphabet,
        initial,
        transitions,
        emissions,
        intervals,
        theta_pt,
        fallback_factor: rng.random_range(0.0..=1.0),
        sigma_floor,
    })
    .unwrap();

    // Gap-heavy sequences so that strict mode has feasible paths.
    let ticks = (0..t_len)
        .map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(0..symbols) })
        .collect();
    let seq = TickSequence::new("x", ticks).unwrap();
    let cfg = DecodeConfig {
        gap_mode: if rng.random_bool(0.5) { GapMode::Strict } else { GapMode::Skip },
        allow_leading_gap: rng.random_bool(0.7),
        allow_trailing_gap: rng.random_bool(0.7),
        normalize_scores: false,
        max_interval: if rng.random_bool(0.8) { Some(rng.random_range(0..=3)) } else { None },
        interval_slack: rng.random_range(0..=1),
    };
    Instance { model, seq, cfg }
}

fn pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Interval probability recomputed from the stored Gaussian parameters.
pub fn reference_interval(model: &DihmmModel, from: usize, to: usize, len: usize) -> f64 {
    if model.variant() == Variant::Hsmm {
        return 1.0;
    }
    let models = model.intervals().models();
    if let Some(iv) = models.iter().find(|iv| iv.from == from && iv.to == to) {
        if (iv.lo..=iv.hi).contains(&len) {
            return pdf(len as f64, iv.mean, iv.std_dev);
        }
    }
    let min = models
        .iter()
        .flat_map(|iv| (iv.lo..=iv.hi).map(move |x| pdf(x as f64, iv.mean, iv.std_dev)))
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        min * model.fallback_factor()
    } else {
        0.0
    }
}

fn reference_cap(model: &DihmmModel, cfg: &DecodeConfig, t_len: usize) -> usize {
    let trained = model.intervals().models().iter().map(|iv| iv.hi).max();
    let cap = match (cfg.max_interval, cfg.gap_mode, trained) {
        (Some(c), _, _) => c,
        (None, GapMode::Skip, Some(hi)) if model.variant() == Variant::Dihmm => hi + cfg.interval_slack,
        _ => t_len,
    };
    cap.min(t_len)
}

fn all_gap(seq: &TickSequence, gap: usize, from: usize, to: usize) -> bool {
    seq.ticks()[from..to].iter().all(|&s| s == gap)
}

/// Log score of one explicit segmentation, `-inf` when it is not admissible.
pub fn path_score(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig, path: &[Segment]) -> f64 {
    let t_len = seq.len();
    let gap = model.alphabet().gap_id();
    let strict = cfg.gap_mode == GapMode::Strict;
    let cap = reference_cap(model, cfg, t_len);
    let Some(first) = path.first() else { return f64::NEG_INFINITY };
    let last = path.last().unwrap();
    if first.start > 0 && (!cfg.allow_leading_gap || strict && !all_gap(seq, gap, 0, first.start)) {
        return f64::NEG_INFINITY;
    }
    if last.end() < t_len && (!cfg.allow_trailing_gap || strict && !all_gap(seq, gap, last.end(), t_len)) {
        return f64::NEG_INFINITY;
    }
    let mut p = model.initial().get(first.state, first.duration).ln();
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b.start - a.end();
        if len > cap || strict && !all_gap(seq, gap, a.end(), b.start) {
            return f64::NEG_INFINITY;
        }
        p += model.transitions().get(a.state, a.duration, b.state, b.duration).ln();
        p += reference_interval(model, a.state, b.state, len).ln();
    }
    for seg in path {
        for &sym in &seq.ticks()[seg.start..seg.end()] {
            p += model.emissions().get(seg.state, sym).ln();
        }
    }
    p
}

/// Maximum of [`path_score`] over every segmentation, by exhaustive search.
/// Branches are cut only once their partial product is exactly zero.
pub fn brute_force(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut path = Vec::new();
    extend(model, seq, cfg, &mut path, 0, &mut best);
    best
}

fn extend(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig, path: &mut Vec<Segment>, pos: usize, best: &mut f64) {
    let t_len = seq.len();
    if !path.is_empty() {
        let s = path_score_prefix(model, seq, cfg, path);
        if s == f64::NEG_INFINITY {
            return;
        }
        let full = path_score(model, seq, cfg, path);
        if full > *best {
            *best = full;
        }
    }
    for start in pos..t_len {
        for state in 0..model.states() {
            for dur in 1..=model.max_duration().min(t_len - start) {
                path.push(Segment::new(state, start, dur));
                extend(model, seq, cfg, path, start + dur, best);
                path.pop();
            }
        }
    }
}

/// Score of a prefix ignoring the trailing-gap condition.
fn path_score_prefix(model: &DihmmModel, seq: &TickSequence, cfg: &DecodeConfig, path: &[Segment]) -> f64 {
    let relaxed = DecodeConfig {
        allow_trailing_gap: true,
        ..cfg.clone()
    };
    // Score as if the sequence ended right after the last segment.
    let end = path.last().unwrap().end();
    let cut = TickSequence::new("prefix", seq.ticks()[..end].to_vec()).unwrap();
    path_score(model, &cut, &relaxed, path)
}
