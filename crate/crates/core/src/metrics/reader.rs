//! Confusion-matrix arithmetic for real-vs-synthetic reader studies.
//! Positives are real tumors, negatives synthetic ones.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Real,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Call {
    Real,
    Synthetic,
    Unsure,
}

/// What to do with "unsure" answers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsurePolicy {
    /// Count as a wrong answer for its truth class.
    #[default]
    Incorrect,
    /// Leave the row out entirely.
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReaderMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub true_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub unsure: usize,
}

/// Sensitivity, specificity and accuracy with unsure answers counted as
/// incorrect. A ratio whose denominator is zero is NaN.
pub fn reader_metrics(labels: &[(Truth, Call)]) -> Result<ReaderMetrics> {
    reader_metrics_with(labels, UnsurePolicy::Incorrect)
}

pub fn reader_metrics_with(labels: &[(Truth, Call)], policy: UnsurePolicy) -> Result<ReaderMetrics> {
    let (mut tp, mut fneg, mut tn, mut fp, mut unsure) = (0, 0, 0, 0, 0);
    for &(truth, call) in labels {
        if call == Call::Unsure {
            unsure += 1;
            if policy == UnsurePolicy::Drop {
                continue;
            }
        }
        match (truth, call) {
            (Truth::Real, Call::Real) => tp += 1,
            (Truth::Real, _) => fneg += 1,
            (Truth::Synthetic, Call::Synthetic) => tn += 1,
            (Truth::Synthetic, _) => fp += 1,
        }
    }
    let n = tp + fneg + tn + fp;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    Ok(ReaderMetrics {
        sensitivity: ratio(tp, tp + fneg),
        specificity: ratio(tn, tn + fp),
        accuracy: ratio(tp + tn, n),
        true_positive: tp,
        false_negative: fneg,
        true_negative: tn,
        false_positive: fp,
        unsure,
    })
}

impl FromStr for Truth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Truth::Real),
            "synthetic" | "synt" | "fake" => Ok(Truth::Synthetic),
            other => Err(Error::InvalidParameter(format!("unknown truth label {other:?}"))),
        }
    }
}

impl FromStr for Call {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Call::Real),
            "synthetic" | "synt" | "fake" => Ok(Call::Synthetic),
            "unsure" | "" => Ok(Call::Unsure),
            other => Err(Error::InvalidParameter(format!("unknown reader call {other:?}"))),
        }
    }
}

/// Parses `truth,call` rows. A first row whose fields are not labels is
/// treated as a header; `#` lines and blank lines are skipped.
pub fn parse_reader_csv(text: &str) -> Result<Vec<(Truth, Call)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "line {}: expected truth,call",
                lineno + 1
            )));
        }
        match (fields[0].parse::<Truth>(), fields[1].parse::<Call>()) {
            (Ok(t), Ok(c)) => out.push((t, c)),
            (Err(e), _) | (_, Err(e)) => {
                if out.is_empty() && lineno == 0 {
                    continue; // header
                }
                return Err(e);
            }
        }
    }
    Ok(out)
}
