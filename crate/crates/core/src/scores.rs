//! Label and score ingestion, score conventions, and accuracy metrics.
//!
//! File formats are flat and indexed by byte offset:
//! - labels: one signed byte per offset, `1` true, `0` false, `-1` ignore;
//! - scores: one little-endian IEEE-754 `f32` per offset.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{Truth, TruthVector};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the
/// inverse sigmoid.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn parse_labels(bytes: &[u8], region_len: usize) -> Result<TruthVector> {
    if bytes.len() != region_len {
        return Err(Error::LengthMismatch {
            expected: region_len,
            found: bytes.len(),
            unit: "label bytes",
        });
    }
    bytes
        .iter()
        .enumerate()
        .map(|(offset, &b)| match b as i8 {
            1 => Ok(Truth::True),
            0 => Ok(Truth::False),
            -1 => Ok(Truth::Ignore),
            value => Err(Error::LabelOutOfDomain { offset, value }),
        })
        .collect::<Result<Vec<_>>>()
        .map(TruthVector)
}

pub fn encode_labels(truth: &TruthVector) -> Vec<u8> {
    truth
        .0
        .iter()
        .map(|t| match t {
            Truth::True => 1u8,
            Truth::False => 0u8,
            Truth::Ignore => (-1i8) as u8,
        })
        .collect()
}

pub fn parse_scores(bytes: &[u8], region_len: usize) -> Result<Vec<f64>> {
    if bytes.len() != 4 * region_len {
        return Err(Error::LengthMismatch {
            expected: 4 * region_len,
            found: bytes.len(),
            unit: "score bytes",
        });
    }
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(offset, chunk)| {
            let value = f32::from_le_bytes(chunk.try_into().unwrap());
            if value.is_finite() {
                Ok(f64::from(value))
            } else {
                Err(Error::NonFiniteScore {
                    offset,
                    value: f64::from(value),
                })
            }
        })
        .collect()
}

pub fn encode_scores(scores: &[f64]) -> Vec<u8> {
    scores
        .iter()
        .flat_map(|&s| (s as f32).to_le_bytes())
        .collect()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: impl AsRef<Path>, region_len: usize) -> Result<TruthVector> {
    parse_labels(&read(path.as_ref())?, region_len)
}

pub fn load_scores(path: impl AsRef<Path>, region_len: usize) -> Result<Vec<f64>> {
    parse_scores(&read(path.as_ref())?, region_len)
}

/// Load a score file holding probabilities and convert each to a logit.
pub fn load_probabilities(path: impl AsRef<Path>, region_len: usize) -> Result<Vec<f64>> {
    Ok(load_scores(path, region_len)?
        .into_iter()
        .map(logit_from_probability)
        .collect())
}

pub fn write_labels(path: impl AsRef<Path>, truth: &TruthVector) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(truth)).map_err(|e| Error::io(path, e))
}

pub fn write_scores(path: impl AsRef<Path>, scores: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scores(scores)).map_err(|e| Error::io(path, e))
}

/// `+1` for true, `-1` for false and ignore.
pub fn labels_to_scores(truth: &TruthVector) -> Vec<f64> {
    truth
        .0
        .iter()
        .map(|t| if t.is_true() { 1.0 } else { -1.0 })
        .collect()
}

pub fn logit_from_probability(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Instruction-level precision and recall. Ignore offsets count nowhere;
/// every undefined ratio is 0.
pub fn evaluate(pred: &[usize], labels: &TruthVector) -> EvalResult {
    let mut predicted = vec![false; labels.len()];
    for &p in pred {
        predicted[p] = true;
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (offset, &label) in labels.0.iter().enumerate() {
        match (label, predicted[offset]) {
            (Truth::True, true) => tp += 1,
            (Truth::True, false) => fn_ += 1,
            (Truth::False, true) => fp += 1,
            _ => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalResult {
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_bytes() {
        let t = parse_labels(&[1, 0, 0xFF], 3).unwrap();
        assert_eq!(t.0, vec![Truth::True, Truth::False, Truth::Ignore]);
        assert!(matches!(
            parse_labels(&[1, 2], 2),
            Err(Error::LabelOutOfDomain {
                offset: 1,
                value: 2
            })
        ));
        assert!(matches!(
            parse_labels(&[1], 2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn score_bytes() {
        let s = parse_scores(&0x3F80_0000u32.to_le_bytes(), 1).unwrap();
        assert_eq!(s, vec![1.0]);
        let nan = f32::NAN.to_le_bytes();
        assert!(matches!(
            parse_scores(&nan, 1),
            Err(Error::NonFiniteScore { offset: 0, .. })
        ));
        assert!(parse_scores(&[0, 0, 0], 1).is_err());
    }

    #[test]
    fn label_scores() {
        let t = TruthVector(vec![Truth::True, Truth::False, Truth::Ignore]);
        assert_eq!(labels_to_scores(&t), vec![1.0, -1.0, -1.0]);
        assert_eq!(
            labels_to_scores(&TruthVector::all(4, Truth::Ignore)),
            vec![-1.0; 4]
        );
    }

    #[test]
    fn logits() {
        assert_eq!(logit_from_probability(0.5), 0.0);
        assert!((logit_from_probability(0.9) - 9f64.ln()).abs() < 1e-12);
        assert!((logit_from_probability(0.9) - 2.19722).abs() < 1e-5);
        assert!(logit_from_probability(1.0).is_finite());
        assert!(logit_from_probability(0.0).is_finite());
    }

    #[test]
    fn metrics() {
        let labels = TruthVector(vec![Truth::True, Truth::False, Truth::True, Truth::Ignore]);
        let perfect = evaluate(&[0, 2], &labels);
        assert_eq!(
            (perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0)
        );

        let none = evaluate(&[], &labels);
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        assert_eq!(none.fn_, 2);

        let ignored = evaluate(&[3], &labels);
        assert_eq!((ignored.tp, ignored.fp), (0, 0));
        assert_eq!(ignored.precision, 0.0);

        let only_ignore = TruthVector::all(3, Truth::Ignore);
        let r = evaluate(&[0, 1], &only_ignore);
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 0));
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));

        let half = evaluate(&[0, 1], &labels);
        assert_eq!((half.precision, half.recall), (0.5, 0.5));
        assert_eq!(half.f1, 0.5);
    }

    fn truth_strategy() -> impl Strategy<Value = Vec<Truth>> {
        proptest::collection::vec(
            prop_oneof![Just(Truth::True), Just(Truth::False), Just(Truth::Ignore)],
            0..200,
        )
    }

    proptest! {
        #[test]
        fn label_file_round_trip(truth in truth_strategy()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("l.i8");
            let t = TruthVector(truth);
            write_labels(&path, &t).unwrap();
            prop_assert_eq!(load_labels(&path, t.len()).unwrap(), t);
        }

        #[test]
        fn score_file_round_trip(raw in proptest::collection::vec(-1.0e6f32..1.0e6, 0..200)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.f32");
            let scores: Vec<f64> = raw.iter().map(|&s| f64::from(s)).collect();
            write_scores(&path, &scores).unwrap();
            prop_assert_eq!(load_scores(&path, scores.len()).unwrap(), scores);
        }

        #[test]
        fn metrics_ignore_predictions_on_ignored_offsets(truth in truth_strategy(), seed in any::<u64>()) {
            let labels = TruthVector(truth);
            let n = labels.len();
            let pred: Vec<usize> = (0..n).filter(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let without: Vec<usize> = pred.iter().copied().filter(|&i| labels.get(i) != Truth::Ignore).collect();
            prop_assert_eq!(evaluate(&pred, &labels), evaluate(&without, &labels));
        }

        #[test]
        fn labels_to_scores_matches_pointwise(truth in truth_strategy()) {
            let t = TruthVector(truth);
            let scores = labels_to_scores(&t);
            for (label, score) in t.0.iter().zip(&scores) {
                let expected = match label { Truth::True => 1.0, _ => -1.0 };
                prop_assert_eq!(*score, expected);
            }
        }
    }
}
