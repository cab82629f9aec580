//! Gaussian state-interval models.
//!
//! Each ordered state pair `(from, to)` observed in training gets a Gaussian
//! over the number of gap ticks separating the two states. The density is
//! truncated to the integer ticks where it stays at or above `theta_pt`, and is
//! used as an unnormalized weight: it is not renormalized after truncation.
//! Intervals outside a pair's support (or pairs never observed) get the
//! smallest in-support density over all pairs, attenuated by a factor `c`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::alphabet::StateId;
use crate::error::{Error, Result};

/// Normal density at `x`.
pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be positive and finite, got {sigma}")));
    }
    if !x.is_finite() || !mu.is_finite() {
        return Err(Error::param("x/mu", "must be finite"));
    }
    Ok(density(x, mu, sigma))
}

#[inline]
pub(crate) fn density(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = x - mu;
    (-(z * z) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt()
}

/// Integer tick range `[lo, hi]` around `round(mu)` where the density is at
/// least `theta_pt`, clamped to non-negative ticks.
pub fn truncate_support(mu: f64, sigma: f64, theta_pt: f64) -> Result<(usize, usize)> {
    let peak = gaussian_pdf(mu, mu, sigma)?;
    if !(theta_pt > 0.0) || !theta_pt.is_finite() {
        return Err(Error::param("theta_pt", format!("must be positive, got {theta_pt}")));
    }
    let empty = || Error::EmptySupport {
        mean: mu,
        std_dev: sigma,
        theta_pt,
    };
    if theta_pt >= peak {
        return Err(empty());
    }
    let above = |x: i64| density(x as f64, mu, sigma) >= theta_pt;
    let center = mu.round() as i64;
    if !above(center) {
        return Err(empty());
    }
    // Closed-form edges, then nudged so the boundary matches the density test exactly.
    let radius = sigma * (2.0 * (peak / theta_pt).ln()).sqrt();
    let mut lo = ((mu - radius).ceil() as i64).min(center);
    let mut hi = ((mu + radius).floor() as i64).max(center);
    while lo < center && !above(lo) {
        lo += 1;
    }
    while above(lo - 1) {
        lo -= 1;
    }
    while hi > center && !above(hi) {
        hi -= 1;
    }
    while above(hi + 1) {
        hi += 1;
    }
    if hi < 0 {
        return Err(empty());
    }
    Ok((lo.max(0) as usize, hi as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalModel {
    pub from: StateId,
    pub to: StateId,
    pub mean: f64,
    pub std_dev: f64,
    pub lo: usize,
    pub hi: usize,
    pub samples: usize,
}

impl IntervalModel {
    /// Fits mean and (n-1) sample standard deviation, floored at `sigma_floor`.
    pub fn fit(
        from: StateId,
        to: StateId,
        samples: &[usize],
        sigma_floor: f64,
        theta_pt: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "interval model needs at least one sample"));
        }
        if !(sigma_floor > 0.0) {
            return Err(Error::param("sigma_floor", format!("must be positive, got {sigma_floor}")));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
        let sd = if samples.len() > 1 {
            let ss: f64 = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let std_dev = sd.max(sigma_floor);
        let (lo, hi) = truncate_support(mean, std_dev, theta_pt)?;
        Ok(Self {
            from,
            to,
            mean,
            std_dev,
            lo,
            hi,
            samples: samples.len(),
        })
    }

    pub fn contains(&self, length: usize) -> bool {
        (self.lo..=self.hi).contains(&length)
    }

    pub fn pdf(&self, length: usize) -> f64 {
        density(length as f64, self.mean, self.std_dev)
    }

    /// Smallest density over the support. The Gaussian is unimodal, so it sits
    /// at one of the two edges.
    pub fn min_in_support(&self) -> f64 {
        self.pdf(self.lo).min(self.pdf(self.hi))
    }
}

/// All interval models of one model, indexed by state pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    states: usize,
    models: Vec<IntervalModel>,
    index: Vec<Option<usize>>,
    fallback: Option<f64>,
    factor: f64,
}

impl IntervalSet {
    pub fn new(states: usize, mut models: Vec<IntervalModel>, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::param("c", format!("must lie in [0, 1], got {factor}")));
        }
        models.sort_by_key(|m| (m.from, m.to));
        let mut index = vec![None; states * states];
        for (i, m) in models.iter().enumerate() {
            if m.from >= states || m.to >= states {
                return Err(Error::param(
                    "intervals",
                    format!("pair ({}, {}) outside {states} states", m.from, m.to),
                ));
            }
            let slot = &mut index[m.from * states + m.to];
            if slot.is_some() {
                return Err(Error::param(
                    "intervals",
                    format!("duplicate pair ({}, {})", m.from, m.to),
                ));
            }
            *slot = Some(i);
        }
        let fallback = models
            .iter()
            .map(IntervalModel::min_in_support)
            .reduce(f64::min)
            .map(|min| min * factor);
        Ok(Self {
            states,
            models,
            index,
            fallback,
            factor,
        })
    }

    pub fn models(&self) -> &[IntervalModel] {
        &self.models
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, from: StateId, to: StateId) -> Option<&IntervalModel> {
        if from >= self.states || to >= self.states {
            return None;
        }
        self.index[from * self.states + to].map(|i| &self.models[i])
    }

    /// Value used for any out-of-support interval: global minimum in-support
    /// density times `c`. `None` when no pair was ever trained.
    pub fn fallback(&self) -> Option<f64> {
        self.fallback
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Largest in-support interval over all pairs.
    pub fn max_support(&self) -> usize {
        self.models.iter().map(|m| m.hi).max().unwrap_or(0)
    }

    pub fn interval_prob(&self, from: StateId, to: StateId, length: usize) -> Result<f64> {
        match self.get(from, to) {
            Some(m) if m.contains(length) => Ok(m.pdf(length)),
            _ => self.fallback.ok_or(Error::UntrainedInterval { from, to }),
        }
    }
}
