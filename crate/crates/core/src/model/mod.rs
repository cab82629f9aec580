//! Domain types and the parameter set of a duration/interval model.

mod alphabet;
mod file;
mod interval;
mod segment;
mod tables;

use serde::{Deserialize, Serialize};

pub use alphabet::{Alphabet, StateId, SymbolId, TickSequence};
pub use file::{deserialize_model, serialize_model, FORMAT_TAG};
pub use interval::{gaussian_pdf, truncate_support, IntervalModel, IntervalSet};
pub use segment::{Segment, SegmentSequence};
pub use tables::{EmissionTable, InitialDistribution, TransitionTable};

pub(crate) use tables::pair_index;

use crate::error::{Error, Result};

/// Row sums must match 1 within this tolerance.
pub const SUM_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_THETA_PT: f64 = 1e-4;
pub const DEFAULT_FALLBACK_FACTOR: f64 = 0.5;
pub const DEFAULT_SIGMA_FLOOR: f64 = 0.5;
pub const DEFAULT_MAX_DURATION: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Explicit-duration model; intervals are skipped without a factor.
    Hsmm,
    /// Explicit-duration model with a Gaussian factor per state interval.
    Dihmm,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Hsmm => "hsmm",
            Variant::Dihmm => "dihmm",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsmm" => Ok(Variant::Hsmm),
            "dihmm" | "di-hmm" => Ok(Variant::Dihmm),
            other => Err(Error::param("variant", format!("expected hsmm or dihmm, got `{other}`"))),
        }
    }
}

/// Everything needed to build a [`DihmmModel`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub label: String,
    pub variant: Variant,
    pub alphabet: Alphabet,
    pub initial: InitialDistribution,
    pub transitions: TransitionTable,
    pub emissions: EmissionTable,
    pub intervals: Vec<IntervalModel>,
    pub theta_pt: f64,
    pub fallback_factor: f64,
    pub sigma_floor: f64,
}

/// Log-domain views of the tables, built once per model.
#[derive(Debug, Clone)]
pub(crate) struct LogTables {
    /// `(state, duration, ln pi)` for every non-zero initial entry.
    pub initial: Vec<(StateId, usize, f64)>,
    /// For each target pair, the non-zero incoming transitions as
    /// `(source state, source duration, ln a)`, sorted by source.
    pub incoming: Vec<Vec<(StateId, usize, f64)>>,
    /// `ln e[m][k]`, row-major.
    pub emit: Vec<f64>,
    pub first_transition: Option<(StateId, StateId)>,
}

/// Parameter set of a trained model. Immutable once built; every constructor
/// checks the table invariants.
#[derive(Debug, Clone)]
pub struct DihmmModel {
    label: String,
    variant: Variant,
    alphabet: Alphabet,
    states: usize,
    max_duration: usize,
    initial: InitialDistribution,
    transitions: TransitionTable,
    emissions: EmissionTable,
    intervals: IntervalSet,
    theta_pt: f64,
    sigma_floor: f64,
    logs: LogTables,
}

impl PartialEq for DihmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.variant == other.variant
            && self.alphabet == other.alphabet
            && self.states == other.states
            && self.max_duration == other.max_duration
            && self.initial == other.initial
            && self.transitions == other.transitions
            && self.emissions == other.emissions
            && self.intervals == other.intervals
            && self.theta_pt == other.theta_pt
            && self.sigma_floor == other.sigma_floor
    }
}

fn check_prob(field: impl Fn() -> String, p: f64) -> Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::load(field(), format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl DihmmModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts {
            label,
            variant,
            alphabet,
            initial,
            transitions,
            emissions,
            intervals,
            theta_pt,
            fallback_factor,
            sigma_floor,
        } = parts;

        let states = transitions.states();
        let max_duration = transitions.max_duration();
        if states == 0 {
            return Err(Error::load("M", "model needs at least one state"));
        }
        if max_duration == 0 {
            return Err(Error::load("D_cap", "maximum duration must be at least 1"));
        }
        if initial.states() != states || initial.max_duration() != max_duration {
            return Err(Error::load("pi", "shape does not match the transition table"));
        }
        if emissions.states() != states || emissions.symbols() != alphabet.len() {
            return Err(Error::load(
                "emit",
                format!(
                    "expected {states} rows of {} symbols, got {} rows of {}",
                    alphabet.len(),
                    emissions.states(),
                    emissions.symbols()
                ),
            ));
        }
        if !(theta_pt > 0.0) || !theta_pt.is_finite() {
            return Err(Error::load("theta_pt", format!("must be positive, got {theta_pt}")));
        }
        if !(0.0..=1.0).contains(&fallback_factor) {
            return Err(Error::load("c", format!("must lie in [0, 1], got {fallback_factor}")));
        }
        if !(sigma_floor > 0.0) || !sigma_floor.is_finite() {
            return Err(Error::load("sigma_floor", format!("must be positive, got {sigma_floor}")));
        }

        for (m, row) in emissions.rows().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                check_prob(|| format!("emit[{m}][{k}]"), p)?;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::load(format!("emit[{m}]"), format!("row sums to {sum}, not 1")));
            }
        }

        for (m, d, p) in initial.entries() {
            check_prob(|| format!("pi(state={m}, dur={d})"), p)?;
        }
        let total = initial.total();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::load("pi", format!("sums to {total}, not 1")));
        }

        for from in 0..states {
            for from_dur in 1..=max_duration {
                let row = transitions.row(from, from_dur);
                for (i, &p) in row.iter().enumerate() {
                    check_prob(
                        || {
                            format!(
                                "trans(from_state={from}, from_dur={from_dur}, to_state={}, to_dur={})",
                                i / max_duration,
                                i % max_duration + 1
                            )
                        },
                        p,
                    )?;
                }
                let sum: f64 = row.iter().sum();
                if sum != 0.0 && (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::load(
                        format!("trans(from_state={from}, from_dur={from_dur})"),
                        format!("outgoing probabilities sum to {sum}, not 1"),
                    ));
                }
            }
        }

        for (i, iv) in intervals.iter().enumerate() {
            let field = |name: &str| format!("intervals[{i}].{name}");
            if iv.from >= states || iv.to >= states {
                return Err(Error::load(field("from"), format!("pair ({}, {}) outside {states} states", iv.from, iv.to)));
            }
            if !iv.mean.is_finite() {
                return Err(Error::load(field("mu"), "must be finite"));
            }
            if !(iv.std_dev >= sigma_floor) || !iv.std_dev.is_finite() {
                return Err(Error::load(
                    field("sigma"),
                    format!("{} is below sigma_floor {sigma_floor}", iv.std_dev),
                ));
            }
            if iv.samples == 0 {
                return Err(Error::load(field("n"), "interval model needs at least one sample"));
            }
            let (lo, hi) = truncate_support(iv.mean, iv.std_dev, theta_pt)
                .map_err(|e| Error::load(field("sigma"), e.to_string()))?;
            if (lo, hi) != (iv.lo, iv.hi) {
                return Err(Error::load(
                    field("x_lo"),
                    format!(
                        "support [{}, {}] does not match the theta_pt truncation [{lo}, {hi}]",
                        iv.lo, iv.hi
                    ),
                ));
            }
        }
        let intervals = IntervalSet::new(states, intervals, fallback_factor)
            .map_err(|e| Error::load("intervals", e.to_string()))?;

        let logs = LogTables::build(&initial, &transitions, &emissions);
        Ok(Self {
            label,
            variant,
            alphabet,
            states,
            max_duration,
            initial,
            transitions,
            emissions,
            intervals,
            theta_pt,
            sigma_floor,
            logs,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn max_duration(&self) -> usize {
        self.max_duration
    }

    pub fn initial(&self) -> &InitialDistribution {
        &self.initial
    }

    pub fn transitions(&self) -> &TransitionTable {
        &self.transitions
    }

    pub fn emissions(&self) -> &EmissionTable {
        &self.emissions
    }

    pub fn intervals(&self) -> &IntervalSet {
        &self.intervals
    }

    pub fn theta_pt(&self) -> f64 {
        self.theta_pt
    }

    pub fn fallback_factor(&self) -> f64 {
        self.intervals.factor()
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    /// Probability of interval `length` between `from` and `to`, with the
    /// out-of-support fallback.
    pub fn interval_prob(&self, from: StateId, to: StateId, length: usize) -> Result<f64> {
        self.intervals.interval_prob(from, to, length)
    }

    pub(crate) fn logs(&self) -> &LogTables {
        &self.logs
    }

    /// Copy of the parts, for building modified models.
    pub fn to_parts(&self) -> ModelParts {
        ModelParts {
            label: self.label.clone(),
            variant: self.variant,
            alphabet: self.alphabet.clone(),
            initial: self.initial.clone(),
            transitions: self.transitions.clone(),
            emissions: self.emissions.clone(),
            intervals: self.intervals.models().to_vec(),
            theta_pt: self.theta_pt,
            fallback_factor: self.intervals.factor(),
            sigma_floor: self.sigma_floor,
        }
    }
}

impl LogTables {
    fn build(
        initial: &InitialDistribution,
        transitions: &TransitionTable,
        emissions: &EmissionTable,
    ) -> Self {
        let dmax = transitions.max_duration();
        let mut incoming = vec![Vec::new(); transitions.pair_count()];
        let mut first_transition = None;
        for (from, from_dur, to, to_dur, p) in transitions.entries() {
            first_transition.get_or_insert((from, to));
            incoming[pair_index(to, to_dur, dmax)].push((from, from_dur, p.ln()));
        }
        Self {
            initial: initial.entries().map(|(m, d, p)| (m, d, p.ln())).collect(),
            incoming,
            emit: emissions.rows().flatten().map(|p| p.ln()).collect(),
            first_transition,
        }
    }
}

/// Outcome of scoring one sequence against one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Natural-log likelihood of the best path; `-inf` when no path exists.
    pub log_likelihood: f64,
    /// Softmax-normalized score across a model set, when requested.
    pub normalized: Option<f64>,
    pub best_path: Option<SegmentSequence>,
}

impl Score {
    pub fn impossible() -> Self {
        Self {
            log_likelihood: f64::NEG_INFINITY,
            normalized: None,
            best_path: None,
        }
    }

    pub fn is_possible(&self) -> bool {
        self.log_likelihood > f64::NEG_INFINITY
    }
}
