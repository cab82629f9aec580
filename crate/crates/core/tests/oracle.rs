mod common;

use common::{brute_force, path_score, random_instance, reference_interval};
use dihmm::decode::{viterbi_custom, viterbi_dihmm, viterbi_hsmm, DecodeConfig, GapMode};
use dihmm::model::{DihmmModel, Variant};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9
}

fn check(seed: u64, variant: Variant) -> Result<(), TestCaseError> {
    let inst = random_instance(seed, variant);
    let score = match variant {
        Variant::Hsmm => viterbi_hsmm(&inst.model, &inst.seq, &inst.cfg),
        Variant::Dihmm => viterbi_dihmm(&inst.model, &inst.seq, &inst.cfg),
    }
    .unwrap();
    let expected = brute_force(&inst.model, &inst.seq, &inst.cfg);
    prop_assert!(close(score.log_likelihood, expected), "seed {seed}: {} vs {expected}", score.log_likelihood);
    match &score.best_path {
        Some(path) => {
            let again = path_score(&inst.model, &inst.seq, &inst.cfg, path.segments());
            prop_assert!(close(again, score.log_likelihood), "seed {seed}: path scores {again}");
        }
        None => prop_assert_eq!(expected, f64::NEG_INFINITY),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hsmm_matches_exhaustive_search(seed in any::<u64>()) {
        check(seed, Variant::Hsmm)?;
    }

    #[test]
    fn dihmm_matches_exhaustive_search(seed in any::<u64>()) {
        check(seed, Variant::Dihmm)?;
    }

    #[test]
    fn strict_paths_cover_event_ticks(seed in any::<u64>()) {
        let mut inst = random_instance(seed, Variant::Dihmm);
        inst.cfg.gap_mode = GapMode::Strict;
        let score = viterbi_dihmm(&inst.model, &inst.seq, &inst.cfg).unwrap();
        if let Some(path) = score.best_path {
            let gap = inst.model.alphabet().gap_id();
            let mut covered = vec![false; inst.seq.len()];
            for seg in path.segments() {
                covered[seg.start..seg.end()].fill(true);
            }
            for (i, &sym) in inst.seq.ticks().iter().enumerate() {
                prop_assert!(sym == gap || covered[i], "tick {i} is an event but no segment covers it");
            }
        }
    }

    #[test]
    fn unit_interval_factor_reduces_to_hsmm(seed in any::<u64>(), ln_c in -3.0f64..0.0) {
        let inst = random_instance(seed, Variant::Dihmm);
        let mut parts = inst.model.to_parts();
        parts.variant = Variant::Hsmm;
        parts.intervals.clear();
        let hsmm = DihmmModel::new(parts).unwrap();
        let cfg = DecodeConfig { max_interval: Some(0), ..inst.cfg.clone() };
        let h = viterbi_hsmm(&hsmm, &inst.seq, &cfg).unwrap();
        let unit = viterbi_custom(&inst.model, &inst.seq, &cfg, |_, _, _| 0.0).unwrap();
        prop_assert_eq!(h.log_likelihood, unit.log_likelihood);
        prop_assert_eq!(&h.best_path, &unit.best_path);

        // A constant factor shifts every path by (segments - 1) * ln c.
        let scaled = viterbi_custom(&inst.model, &inst.seq, &cfg, |_, _, _| ln_c).unwrap();
        if let Some(path) = &scaled.best_path {
            let shift = (path.len() as f64 - 1.0) * ln_c;
            let plain = path_score(&hsmm, &inst.seq, &cfg, path.segments());
            prop_assert!(close(scaled.log_likelihood, plain + shift));
        } else {
            prop_assert_eq!(h.log_likelihood, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn interval_factor_matches_reference(seed in any::<u64>()) {
        let inst = random_instance(seed, Variant::Dihmm);
        let m = &inst.model;
        for from in 0..m.states() {
            for to in 0..m.states() {
                for len in 0..12 {
                    let p = m.interval_prob(from, to, len).unwrap();
                    let r = reference_interval(m, from, to, len);
                    prop_assert!((p - r).abs() <= 1e-12 * r.max(1e-300), "{from}->{to} len {len}: {p} vs {r}");
                }
            }
        }
    }
}
