//! JSON model files (`"format": "dihmm-v1"`).
//!
//! Tables are stored sparsely: absent `pi` and `trans` entries are zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Alphabet, DihmmModel, EmissionTable, InitialDistribution, IntervalModel, ModelParts,
    TransitionTable, Variant,
};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "dihmm-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    variant: Variant,
    label: String,
    alphabet: Vec<String>,
    gap_symbol: String,
    #[serde(rename = "M")]
    states: usize,
    #[serde(rename = "D_cap")]
    max_duration: usize,
    pi: Vec<PiEntry>,
    trans: Vec<TransEntry>,
    emit: Vec<Vec<f64>>,
    intervals: Vec<IntervalEntry>,
    theta_pt: f64,
    c: f64,
    sigma_floor: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiEntry {
    state: usize,
    dur: usize,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransEntry {
    from_state: usize,
    from_dur: usize,
    to_state: usize,
    to_dur: usize,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalEntry {
    from: usize,
    to: usize,
    mu: f64,
    sigma: f64,
    x_lo: usize,
    x_hi: usize,
    n: usize,
}

pub fn serialize_model(model: &DihmmModel) -> Vec<u8> {
    let doc = ModelDocument {
        format: FORMAT_TAG.to_string(),
        variant: model.variant(),
        label: model.label().to_string(),
        alphabet: model.alphabet().names().to_vec(),
        gap_symbol: model.alphabet().gap_name().to_string(),
        states: model.states(),
        max_duration: model.max_duration(),
        pi: model
            .initial()
            .entries()
            .map(|(state, dur, p)| PiEntry { state, dur, p })
            .collect(),
        trans: model
            .transitions()
            .entries()
            .map(|(from_state, from_dur, to_state, to_dur, p)| TransEntry {
                from_state,
                from_dur,
                to_state,
                to_dur,
                p,
            })
            .collect(),
        emit: model.emissions().rows().map(<[f64]>::to_vec).collect(),
        intervals: model
            .intervals()
            .models()
            .iter()
            .map(|iv| IntervalEntry {
                from: iv.from,
                to: iv.to,
                mu: iv.mean,
                sigma: iv.std_dev,
                x_lo: iv.lo,
                x_hi: iv.hi,
                n: iv.samples,
            })
            .collect(),
        theta_pt: model.theta_pt(),
        c: model.fallback_factor(),
        sigma_floor: model.sigma_floor(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("model document serializes");
    out.push(b'\n');
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<DihmmModel> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::load("<document>", e.to_string()))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(FORMAT_TAG) => {}
        Some(other) => {
            return Err(Error::load("format", format!("unknown format tag `{other}`, expected `{FORMAT_TAG}`")))
        }
        None => return Err(Error::load("format", "missing format tag")),
    }
    let doc: ModelDocument =
        serde_json::from_value(value).map_err(|e| Error::load("<document>", e.to_string()))?;

    let alphabet = Alphabet::new(doc.alphabet, &doc.gap_symbol)
        .map_err(|e| Error::load("alphabet", e.to_string()))?;
    let (m, dmax) = (doc.states, doc.max_duration);
    if m == 0 {
        return Err(Error::load("M", "model needs at least one state"));
    }
    if dmax == 0 {
        return Err(Error::load("D_cap", "maximum duration must be at least 1"));
    }
    let check_pair = |field: String, state: usize, dur: usize| -> Result<()> {
        if state >= m {
            return Err(Error::load(field, format!("state {state} out of range for M={m}")));
        }
        if dur == 0 || dur > dmax {
            return Err(Error::load(field, format!("duration {dur} outside 1..={dmax}")));
        }
        Ok(())
    };

    let mut initial = InitialDistribution::zeros(m, dmax);
    for (i, e) in doc.pi.iter().enumerate() {
        check_pair(format!("pi[{i}]"), e.state, e.dur)?;
        if initial.get(e.state, e.dur) != 0.0 {
            return Err(Error::load(format!("pi[{i}]"), "duplicate entry"));
        }
        initial.set(e.state, e.dur, e.p);
    }

    let mut transitions = TransitionTable::zeros(m, dmax);
    for (i, e) in doc.trans.iter().enumerate() {
        check_pair(format!("trans[{i}].from"), e.from_state, e.from_dur)?;
        check_pair(format!("trans[{i}].to"), e.to_state, e.to_dur)?;
        if transitions.get(e.from_state, e.from_dur, e.to_state, e.to_dur) != 0.0 {
            return Err(Error::load(format!("trans[{i}]"), "duplicate entry"));
        }
        transitions.set(e.from_state, e.from_dur, e.to_state, e.to_dur, e.p);
    }

    if doc.emit.len() != m {
        return Err(Error::load("emit", format!("expected {m} rows, got {}", doc.emit.len())));
    }
    if let Some(i) = doc.emit.iter().position(|r| r.len() != alphabet.len()) {
        return Err(Error::load(
            format!("emit[{i}]"),
            format!("expected {} entries, got {}", alphabet.len(), doc.emit[i].len()),
        ));
    }
    let emissions = EmissionTable::from_rows(doc.emit).ok_or_else(|| Error::load("emit", "malformed rows"))?;

    let intervals = doc
        .intervals
        .into_iter()
        .map(|e| IntervalModel {
            from: e.from,
            to: e.to,
            mean: e.mu,
            std_dev: e.sigma,
            lo: e.x_lo,
            hi: e.x_hi,
            samples: e.n,
        })
        .collect();

    DihmmModel::new(ModelParts {
        label: doc.label,
        variant: doc.variant,
        alphabet,
        initial,
        transitions,
        emissions,
        intervals,
        theta_pt: doc.theta_pt,
        fallback_factor: doc.c,
        sigma_floor: doc.sigma_floor,
    })
}

impl DihmmModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serialize_model(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        deserialize_model(&bytes).map_err(|e| match e {
            Error::ModelLoad { field, reason } => Error::ModelLoad {
                field: format!("{}: {field}", path.display()),
                reason,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "format": "dihmm-v1",
        "variant": "hsmm",
        "label": "one",
        "alphabet": ["_", "A"],
        "gap_symbol": "_",
        "M": 1,
        "D_cap": 2,
        "pi": [{"state": 0, "dur": 2, "p": 1.0}],
        "trans": [],
        "emit": [[0.0, 1.0]],
        "intervals": [],
        "theta_pt": 0.0001,
        "c": 0.5,
        "sigma_floor": 0.5
    }"#;

    #[test]
    fn hand_written_minimal_model() {
        let m = deserialize_model(MINIMAL.as_bytes()).unwrap();
        assert_eq!(m.states(), 1);
        assert_eq!(m.alphabet().len(), 2);
        assert_eq!(m.max_duration(), 2);
        assert_eq!(m.initial().get(0, 2), 1.0);
        let again = deserialize_model(&serialize_model(&m)).unwrap();
        assert_eq!(again, m);
    }

    fn load_err(doc: &str) -> String {
        match deserialize_model(doc.as_bytes()) {
            Err(Error::ModelLoad { field, .. }) => field,
            other => panic!("expected a load error, got {other:?}"),
        }
    }

    #[test]
    fn pi_must_sum_to_one() {
        let doc = MINIMAL.replace(r#""p": 1.0"#, r#""p": 0.9"#);
        assert_eq!(load_err(&doc), "pi");
    }

    #[test]
    fn unknown_version_is_rejected() {
        let doc = MINIMAL.replace("dihmm-v1", "dihmm-v9");
        assert_eq!(load_err(&doc), "format");
    }

    #[test]
    fn malformed_documents_name_a_field() {
        assert_eq!(load_err("{not json"), "<document>");
        let doc = MINIMAL.replace(r#""emit": [[0.0, 1.0]]"#, r#""emit": [[0.5, 0.4]]"#);
        assert_eq!(load_err(&doc), "emit[0]");
        let doc = MINIMAL.replace(r#""dur": 2"#, r#""dur": 3"#);
        assert_eq!(load_err(&doc), "pi[0]");
        let doc = MINIMAL.replace(r#""c": 0.5"#, r#""c": 1.5"#);
        assert_eq!(load_err(&doc), "c");
    }

    #[test]
    fn interval_support_is_checked() {
        let doc = MINIMAL
            .replace(r#""variant": "hsmm""#, r#""variant": "dihmm""#)
            .replace(
                r#""intervals": []"#,
                r#""intervals": [{"from":0,"to":0,"mu":2.0,"sigma":0.5,"x_lo":0,"x_hi":9,"n":1}]"#,
            );
        assert_eq!(load_err(&doc), "intervals[0].x_lo");
        let doc = doc.replace(r#""x_hi":9"#, r#""x_hi":4"#);
        assert!(deserialize_model(doc.as_bytes()).is_ok());
        let doc = doc.replace(r#""sigma":0.5"#, r#""sigma":0.25"#);
        assert_eq!(load_err(&doc), "intervals[0].sigma");
    }
}
