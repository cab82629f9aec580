//! Experiment harness: discrimination, recognition and timing.
//!
//! Every experiment is driven by a JSON preset (see [`Preset`]) and produces
//! a report that renders as CSV (one row per configuration) and JSON (full
//! detail, including score matrices). In JSON output `null` stands for a
//! log-likelihood of `-inf`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledSequence};
use crate::decode::{classify, score, DecodeConfig};
use crate::error::{Error, Result};
use crate::model::{DihmmModel, Variant};
use crate::synth::{generate, generate_rhythms, variant_pool, GenPolicy, JitterSpec, RhythmPolicy};
use crate::train::{fit_label_set, fit_model, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum Preset {
    Discrimination(DiscriminationPreset),
    Recognition(RecognitionPreset),
    Timing(TimingPreset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminationPreset {
    /// Generation policies whose outputs are concatenated into one corpus.
    pub corpus: Vec<GenPolicy>,
    pub k_train: Vec<usize>,
    pub variants: Vec<Variant>,
    /// How the training variants of each sequence are derived.
    pub jitter: JitterSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecognitionPreset {
    pub rhythm: RhythmPolicy,
    /// Bars per sequence to evaluate; each value overrides `rhythm.bars_per_sequence`.
    pub bars: Vec<usize>,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingPreset {
    pub corpus: GenPolicy,
    pub k_train: Vec<usize>,
    pub variants: Vec<Variant>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Workload repetitions inside one timed run; reported times are per repetition.
    #[serde(default = "one")]
    pub batch: usize,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
}

fn default_repeats() -> usize {
    5
}

fn one() -> usize {
    1
}

impl Preset {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Preset {
            field: "<document>".into(),
            reason: e.to_string(),
        })
    }

    /// Replaces every seed in the preset.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Preset::Discrimination(p) => {
                p.seed = seed;
                p.corpus.iter_mut().for_each(|c| c.seed = seed);
            }
            Preset::Recognition(p) => p.rhythm.seed = seed,
            Preset::Timing(p) => p.corpus.seed = seed,
        }
        self
    }

    pub fn run(&self) -> Result<EvalReport> {
        Ok(match self {
            Preset::Discrimination(p) => EvalReport::Discrimination(p.run()?),
            Preset::Recognition(p) => EvalReport::Recognition(p.run()?),
            Preset::Timing(p) => EvalReport::Timing(p.run()?),
        })
    }
}

fn check_k_grid(k: &[usize], field: &'static str) -> Result<()> {
    if k.is_empty() {
        return Err(Error::Preset {
            field: field.into(),
            reason: "grid is empty".into(),
        });
    }
    if k.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Preset {
            field: field.into(),
            reason: "grid must be strictly increasing".into(),
        });
    }
    Ok(())
}

fn check_variants(v: &[Variant]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Preset {
            field: "variants".into(),
            reason: "at least one variant is required".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum EvalReport {
    Discrimination(DiscriminationReport),
    Recognition(RecognitionReport),
    Timing(TimingReport),
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        match self {
            EvalReport::Discrimination(r) => r.to_csv(),
            EvalReport::Recognition(r) => r.to_csv(),
            EvalReport::Timing(r) => r.to_csv(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("reports serialize");
        out.push(b'\n');
        out
    }
}

/// Test × model log-likelihoods; row `i` is test item `i`, column `j` model `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMatrix {
    pub variant: Variant,
    pub k: usize,
    pub labels: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    /// Row-wise softmax of `scores`; all-`-inf` rows stay at zero.
    pub normalized: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(variant: Variant, k: usize, labels: Vec<String>, scores: Vec<Vec<f64>>) -> Self {
        let normalized = scores.iter().map(|r| softmax(r)).collect();
        Self {
            variant,
            k,
            labels,
            scores,
            normalized,
        }
    }

    /// Fraction of rows whose argmax (ties to the smallest column) is not the
    /// diagonal, or whose every entry is `-inf`.
    pub fn erd(&self) -> f64 {
        1.0 - self.diagonal_argmax_rate()
    }

    pub fn diagonal_argmax_rate(&self) -> f64 {
        let hits = self
            .scores
            .iter()
            .enumerate()
            .filter(|(i, row)| argmax(row) == Some(*i))
            .count();
        hits as f64 / self.scores.len() as f64
    }

    /// Fraction of rows where the diagonal is strictly above every other entry.
    pub fn diagonal_peak_rate(&self) -> f64 {
        let hits = self
            .scores
            .iter()
            .enumerate()
            .filter(|(i, row)| {
                row[*i] > f64::NEG_INFINITY && row.iter().enumerate().all(|(j, &v)| j == *i || v < row[*i])
            })
            .count();
        hits as f64 / self.scores.len() as f64
    }
}

/// Index of the first maximum, `None` if every entry is `-inf`.
pub fn argmax(row: &[f64]) -> Option<usize> {
    let mut best = None;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = Some(i);
        }
    }
    best
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; row.len()];
    }
    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminationRow {
    pub variant: Variant,
    pub k: usize,
    pub erd: f64,
    pub diagonal_peak_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminationReport {
    pub sequences: usize,
    pub rows: Vec<DiscriminationRow>,
    pub matrices: Vec<ScoreMatrix>,
}

impl DiscriminationReport {
    pub fn row(&self, variant: Variant, k: usize) -> Option<&DiscriminationRow> {
        self.rows.iter().find(|r| r.variant == variant && r.k == k)
    }

    pub fn matrix(&self, variant: Variant, k: usize) -> Option<&ScoreMatrix> {
        self.matrices.iter().find(|m| m.variant == variant && m.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,k,erd,diagonal_peak_rate\n");
        for r in &self.rows {
            out += &format!("{},{},{:.6},{:.6}\n", r.variant, r.k, r.erd, r.diagonal_peak_rate);
        }
        out
    }
}

impl DiscriminationPreset {
    pub fn build_corpus(&self) -> Result<Corpus> {
        if self.corpus.is_empty() {
            return Err(Error::Preset {
                field: "corpus".into(),
                reason: "at least one generation policy is required".into(),
            });
        }
        let parts = self.corpus.iter().map(generate).collect::<Result<Vec<_>>>()?;
        Corpus::merge(&parts)
    }

    pub fn run(&self) -> Result<DiscriminationReport> {
        let corpus = self.build_corpus()?;
        run_discrimination(&corpus, self)
    }
}

/// One model per sequence, trained on the first `k` entries of that
/// sequence's jittered variant pool; every sequence is then scored against
/// every model.
pub fn run_discrimination(corpus: &Corpus, p: &DiscriminationPreset) -> Result<DiscriminationReport> {
    check_k_grid(&p.k_train, "k_train")?;
    check_variants(&p.variants)?;
    if p.k_train[0] == 0 {
        return Err(Error::Preset {
            field: "k_train".into(),
            reason: "every model needs at least one training sequence".into(),
        });
    }
    if corpus.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "discrimination needs at least 2 sequences, got {}",
            corpus.len()
        )));
    }
    let k_max = *p.k_train.last().expect("grid is non-empty");
    let pools = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, s)| variant_pool(s, &p.jitter, p.seed, i as u64, k_max, &corpus.alphabet))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = corpus.items.iter().map(|s| s.id().to_string()).collect();

    let mut rows = Vec::new();
    let mut matrices = Vec::new();
    for &variant in &p.variants {
        for &k in &p.k_train {
            let models = pools
                .par_iter()
                .zip(&labels)
                .map(|(pool, label)| fit_model(&corpus.alphabet, &pool[..k], &p.training, variant, label))
                .collect::<Result<Vec<_>>>()?;
            let scores = score_matrix(&models, &corpus.items, &p.decode)?;
            let m = ScoreMatrix::new(variant, k, labels.clone(), scores);
            log::info!("discrimination {variant} k={k}: erd {:.3}", m.erd());
            rows.push(DiscriminationRow {
                variant,
                k,
                erd: m.erd(),
                diagonal_peak_rate: m.diagonal_peak_rate(),
            });
            matrices.push(m);
        }
    }
    Ok(DiscriminationReport {
        sequences: corpus.len(),
        rows,
        matrices,
    })
}

/// `scores[i][j]`: log-likelihood of test `i` under model `j`.
pub fn score_matrix(models: &[DihmmModel], tests: &[LabeledSequence], cfg: &DecodeConfig) -> Result<Vec<Vec<f64>>> {
    tests
        .par_iter()
        .map(|t| {
            models
                .iter()
                .map(|m| score(m, &t.ticks, cfg).map(|s| s.log_likelihood))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Confusion {
    /// Test items that received a unique prediction.
    pub pp: usize,
    /// Unique predictions matching the true label.
    pub tp: usize,
    /// Test items whose true label has a model.
    pub ap: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        if self.pp == 0 {
            0.0
        } else {
            self.tp as f64 / self.pp as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.ap == 0 {
            0.0
        } else {
            self.tp as f64 / self.ap as f64
        }
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub truth: String,
    /// `None` when the maximum is shared or every model scores `-inf`.
    pub predicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionRow {
    pub bars: usize,
    pub variant: Variant,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecognitionReport {
    pub rows: Vec<RecognitionRow>,
    pub predictions: Vec<(usize, Variant, Vec<Prediction>)>,
}

impl RecognitionReport {
    pub fn row(&self, bars: usize, variant: Variant) -> Option<&RecognitionRow> {
        self.rows.iter().find(|r| r.bars == bars && r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bars,variant,pp,tp,ap,precision,recall,f_measure\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6}\n",
                r.bars, r.variant, r.confusion.pp, r.confusion.tp, r.confusion.ap, r.precision, r.recall, r.f_measure
            );
        }
        out
    }
}

impl RecognitionPreset {
    pub fn run(&self) -> Result<RecognitionReport> {
        check_variants(&self.variants)?;
        if self.bars.is_empty() {
            return Err(Error::Preset {
                field: "bars".into(),
                reason: "at least one bar setting is required".into(),
            });
        }
        let mut rows = Vec::new();
        let mut predictions = Vec::new();
        for &bars in &self.bars {
            let policy = RhythmPolicy {
                bars_per_sequence: bars,
                ..self.rhythm.clone()
            };
            let data = generate_rhythms(&policy)?;
            for &variant in &self.variants {
                let (confusion, preds) = run_recognition(&data.train, &data.test, variant, &self.training, &self.decode)?;
                log::info!("recognition bars={bars} {variant}: f {:.3}", confusion.f_measure());
                rows.push(RecognitionRow {
                    bars,
                    variant,
                    confusion,
                    precision: confusion.precision(),
                    recall: confusion.recall(),
                    f_measure: confusion.f_measure(),
                });
                predictions.push((bars, variant, preds));
            }
        }
        Ok(RecognitionReport { rows, predictions })
    }
}

/// One model per training label; every test item is classified against the set.
pub fn run_recognition(
    train: &Corpus,
    test: &Corpus,
    variant: Variant,
    training: &TrainingConfig,
    decode: &DecodeConfig,
) -> Result<(Confusion, Vec<Prediction>)> {
    if test.is_empty() {
        return Err(Error::InsufficientData("recognition test set is empty".into()));
    }
    let merged = Corpus::merge(&[train.clone(), test.clone()])?;
    let (train, test) = merged.items.split_at(train.len());
    let models = fit_label_set(&merged.alphabet, train, training, variant)?;
    recognize(&models, test, decode)
}

/// Classifies labeled items against a model set and tallies the confusion counts.
pub fn recognize(
    models: &BTreeMap<String, DihmmModel>,
    test: &[LabeledSequence],
    decode: &DecodeConfig,
) -> Result<(Confusion, Vec<Prediction>)> {
    let preds = test
        .par_iter()
        .map(|t| {
            let c = classify(models, &t.ticks, decode)?;
            Ok(Prediction {
                id: t.id().to_string(),
                truth: t.label().to_string(),
                predicted: if c.unique { c.label } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((confusion(models, &preds), preds))
}

pub fn confusion(models: &BTreeMap<String, DihmmModel>, preds: &[Prediction]) -> Confusion {
    let pp = preds.iter().filter(|p| p.predicted.is_some()).count();
    let tp = preds.iter().filter(|p| p.predicted.as_deref() == Some(p.truth.as_str())).count();
    let ap = preds.iter().filter(|p| models.contains_key(&p.truth)).count();
    Confusion { pp, tp, ap }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub variant: Variant,
    pub k: usize,
    pub train_seconds: f64,
    pub recognize_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub sequences: usize,
    pub repeats: usize,
    pub batch: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn series(&self, variant: Variant) -> Vec<&TimingRow> {
        self.rows.iter().filter(|r| r.variant == variant).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,k,train_seconds,recognize_seconds\n");
        for r in &self.rows {
            out += &format!("{},{},{:.9},{:.9}\n", r.variant, r.k, r.train_seconds, r.recognize_seconds);
        }
        out
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl TimingPreset {
    pub fn run(&self) -> Result<TimingReport> {
        let corpus = generate(&self.corpus)?;
        run_timing(&corpus, self)
    }
}

/// For each `k`, trains one model on each of the first `k` sequences and
/// classifies the whole corpus against those `k` models. Both phases run on
/// the calling thread; the median over `repeats` runs is reported.
pub fn run_timing(corpus: &Corpus, p: &TimingPreset) -> Result<TimingReport> {
    check_variants(&p.variants)?;
    if p.repeats == 0 || p.batch == 0 {
        return Err(Error::Preset {
            field: "repeats".into(),
            reason: "need at least one run of at least one repetition".into(),
        });
    }
    if !p.k_train.is_empty() {
        check_k_grid(&p.k_train, "k_train")?;
    }
    if let Some(&k) = p.k_train.last() {
        if k > corpus.len() {
            return Err(Error::Preset {
                field: "k_train".into(),
                reason: format!("k={k} exceeds the {} generated sequences", corpus.len()),
            });
        }
    }
    let mut rows = Vec::new();
    for &variant in &p.variants {
        for &k in &p.k_train {
            let mut train_t = Vec::with_capacity(p.repeats);
            let mut rec_t = Vec::with_capacity(p.repeats);
            let per_rep = |d: std::time::Duration| d.as_secs_f64() / p.batch as f64;
            for _ in 0..p.repeats {
                let start = Instant::now();
                let mut models = Vec::new();
                for _ in 0..p.batch {
                    models = corpus.items[..k]
                        .iter()
                        .map(|s| fit_model(&corpus.alphabet, std::slice::from_ref(s), &p.training, variant, s.id()))
                        .collect::<Result<Vec<_>>>()?;
                    std::hint::black_box(&models);
                }
                train_t.push(per_rep(start.elapsed()));

                let start = Instant::now();
                for _ in 0..p.batch {
                    for t in &corpus.items {
                        let mut best = f64::NEG_INFINITY;
                        for m in &models {
                            best = best.max(score(m, &t.ticks, &p.decode)?.log_likelihood);
                        }
                        std::hint::black_box(best);
                    }
                }
                rec_t.push(per_rep(start.elapsed()));
            }
            rows.push(TimingRow {
                variant,
                k,
                train_seconds: median(train_t),
                recognize_seconds: median(rec_t),
            });
        }
    }
    Ok(TimingReport {
        sequences: corpus.len(),
        repeats: p.repeats,
        batch: p.batch,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, TickSequence};

    #[test]
    fn erd_and_peaks_from_matrix() {
        let ninf = f64::NEG_INFINITY;
        let m = ScoreMatrix::new(
            Variant::Dihmm,
            1,
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![
                vec![0.0, -1.0, -2.0, ninf],
                vec![-1.0, -1.0, -3.0, ninf],
                vec![-1.0, -1.0, -3.0, ninf],
                vec![ninf, ninf, ninf, ninf],
            ],
        );
        // Row 0 hits, row 1 ties and loses to column 0, row 2 misses, row 3 is impossible.
        assert_eq!(m.diagonal_argmax_rate(), 0.25);
        assert_eq!(m.erd(), 0.75);
        assert_eq!(m.diagonal_peak_rate(), 0.25);
        assert_eq!(m.normalized[3], vec![0.0; 4]);
        assert!((m.normalized[1][0] - 1.0 / (2.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn confusion_counts() {
        let mut models = BTreeMap::new();
        let a = Alphabet::with_events("_", ["A"]).unwrap();
        let s = LabeledSequence::from_ticks(TickSequence::from_chars("x", "A", &a).unwrap(), &a);
        let m = fit_model(&a, &[s], &TrainingConfig::default(), Variant::Hsmm, "x").unwrap();
        models.insert("p".to_string(), m.clone());
        models.insert("q".to_string(), m);
        let pred = |truth: &str, p: Option<&str>| Prediction {
            id: String::new(),
            truth: truth.into(),
            predicted: p.map(String::from),
        };
        let preds = [
            pred("p", Some("p")),
            pred("p", Some("q")),
            pred("q", None),
            pred("z", Some("q")),
            pred("q", Some("q")),
        ];
        let c = confusion(&models, &preds);
        assert_eq!(c, Confusion { pp: 4, tp: 2, ap: 4 });
        assert_eq!(c.precision(), 0.5);
        assert_eq!(c.recall(), 0.5);
        assert_eq!(c.f_measure(), 0.5);
        assert_eq!(f_measure(0.0, 0.0), 0.0);
    }

    #[test]
    fn median_of_runs() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
