//! Audio and rhythm ingestion: waveform to on/off ticks, ticks to bars.
//!
//! A tick is "on" when the RMS of its hop window reaches `rms_threshold`
//! times the loudest window of the file, otherwise it is the gap symbol "off".

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, SymbolId, TickSequence};

pub const ON: &str = "on";
pub const OFF: &str = "off";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioParams {
    /// Expected sample rate. When set, files at any other rate are rejected.
    pub sample_rate: Option<u32>,
    /// Samples per tick. The default is a sixteenth of a second at 44.1 kHz.
    pub hop: usize,
    pub rms_threshold: f64,
    pub ticks_per_bar: usize,
    pub bars_per_sequence: usize,
}

impl Default for AudioParams {
    fn default() -> Self {
        Self {
            sample_rate: None,
            hop: 2756,
            rms_threshold: 0.1,
            ticks_per_bar: 16,
            bars_per_sequence: 1,
        }
    }
}

impl AudioParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 {
            return Err(Error::param("hop", "must be at least 1"));
        }
        if !(self.rms_threshold > 0.0 && self.rms_threshold < 1.0) {
            return Err(Error::param("rms_threshold", format!("must lie in (0, 1), got {}", self.rms_threshold)));
        }
        if self.ticks_per_bar == 0 {
            return Err(Error::param("ticks_per_bar", "must be at least 1"));
        }
        if self.bars_per_sequence == 0 {
            return Err(Error::param("bars_per_sequence", "must be at least 1"));
        }
        Ok(())
    }
}

/// Samples per tick when a beat is split into `ticks_per_beat` ticks.
pub fn hop_for_tempo(sample_rate: u32, bpm: f64, ticks_per_beat: usize) -> Result<usize> {
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(Error::param("tempo", format!("must be positive, got {bpm}")));
    }
    if ticks_per_beat == 0 {
        return Err(Error::param("ticks_per_beat", "must be at least 1"));
    }
    let hop = (f64::from(sample_rate) * 60.0 / (bpm * ticks_per_beat as f64)).round() as usize;
    if hop == 0 {
        return Err(Error::param("tempo", format!("{bpm} bpm gives a hop below one sample")));
    }
    Ok(hop)
}

/// The two-symbol alphabet produced by ingestion.
pub fn on_off_alphabet() -> Alphabet {
    Alphabet::new([OFF, ON], OFF).expect("static alphabet")
}

/// RMS of each complete hop window, samples scaled to [-1, 1).
pub fn rms_trace(samples: &[i16], hop: usize) -> Vec<f64> {
    samples
        .chunks_exact(hop.max(1))
        .map(|w| {
            let sum: f64 = w.iter().map(|&s| (f64::from(s) / 32768.0).powi(2)).sum();
            (sum / w.len() as f64).sqrt()
        })
        .collect()
}

/// Tokenizes raw 16-bit samples. The result has `samples / hop` ticks.
pub fn tokenize_samples(id: &str, samples: &[i16], params: &AudioParams) -> Result<TickSequence> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::Sequence {
            id: id.to_string(),
            reason: "audio has no samples".into(),
        });
    }
    let trace = rms_trace(samples, params.hop);
    if trace.is_empty() {
        return Err(Error::Sequence {
            id: id.to_string(),
            reason: format!("{} samples is shorter than one hop of {}", samples.len(), params.hop),
        });
    }
    let alphabet = on_off_alphabet();
    let (off, on) = (alphabet.gap_id(), alphabet.id_of(ON).unwrap());
    let peak = trace.iter().copied().fold(0.0, f64::max);
    let floor = params.rms_threshold * peak;
    let ticks: Vec<SymbolId> = trace
        .iter()
        .map(|&r| if peak > 0.0 && r >= floor { on } else { off })
        .collect();
    TickSequence::new(id, ticks)
}

/// Tokenizes a 16-bit mono PCM WAV stream.
pub fn tokenize_wav(id: &str, reader: impl Read, params: &AudioParams) -> Result<TickSequence> {
    let wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!("`{id}` has {} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!(
            "`{id}` is {}-bit {:?}, expected 16-bit integer PCM",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if let Some(rate) = params.sample_rate {
        if rate != spec.sample_rate {
            return Err(Error::UnsupportedAudio(format!(
                "`{id}` is sampled at {} Hz, expected {rate} Hz",
                spec.sample_rate
            )));
        }
    }
    let samples = wav.into_samples::<i16>().collect::<std::result::Result<Vec<_>, _>>()?;
    tokenize_samples(id, &samples, params)
}

/// Opens and tokenizes a WAV file; the id is the file stem.
pub fn tokenize_wav_file(path: &Path, params: &AudioParams) -> Result<TickSequence> {
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("audio").to_string();
    let file = std::fs::File::open(path)?;
    tokenize_wav(&id, std::io::BufReader::new(file), params)
}

/// Consecutive chunks of `ticks_per_bar * bars_per_sequence` ticks. A trailing
/// partial chunk is dropped. Chunk `i` gets the id suffix `-b{i}`.
pub fn split_bars(seq: &TickSequence, params: &AudioParams) -> Result<Vec<TickSequence>> {
    params.validate()?;
    let size = params.ticks_per_bar * params.bars_per_sequence;
    seq.ticks()
        .chunks_exact(size)
        .enumerate()
        .map(|(i, chunk)| {
            let mut out = TickSequence::new(format!("{}-b{i}", seq.id), chunk.to_vec())?;
            out.label = seq.label.clone();
            Ok(out)
        })
        .collect()
}

/// Labels every bar with a rhythm id `r0`, `r1`, ... assigned in order of
/// first occurrence of its tick pattern.
pub fn dedupe_rhythms(bars: &[TickSequence]) -> Vec<(String, TickSequence)> {
    let mut seen: HashMap<&[SymbolId], String> = HashMap::new();
    bars.iter()
        .map(|bar| {
            let next = seen.len();
            let label = seen.entry(bar.ticks()).or_insert_with(|| format!("r{next}")).clone();
            (label.clone(), bar.clone().with_label(label))
        })
        .collect()
}
