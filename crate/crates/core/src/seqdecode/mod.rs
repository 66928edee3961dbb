//! Decoding of per-step class score streams: best-path decoding, mode
//! classification of motion intervals, the multi-task loss combination,
//! cumulative-score trigger detection and its evaluation, and a DTW
//! template scorer that produces score streams from envelopes.

mod attributes;
mod scorer;
mod trigger;

pub use attributes::{default_attribute_table, mdi_task_losses, ClassAttributes, AUX_TASKS};
pub use scorer::{
    dtw_template_scorer, subsequence_dtw, LabeledSpan, TemplateScorerParams, TemplateSet,
};
pub use trigger::{
    csa_trigger_double, csa_trigger_single, evaluate_detection, gamma_sweep, run_triggers,
    DetectionReport, Mechanism, SweepRow, TriggerConfig, TriggerEvent, TriggerMode,
};

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motiondetect::Mdi;
use crate::util::write_atomic;

/// Label of the CTC blank class; always column 0 of a stream.
pub const BLANK: &str = "blank";

/// Per-step class posteriors. Column 0 is the blank class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStream {
    probs: Vec<Vec<f64>>,
    labels: Vec<String>,
    step_s: f64,
}

impl ScoreStream {
    /// Validates shape, non-negativity and that every row sums to 1 within
    /// `1e-6`.
    pub fn new(probs: Vec<Vec<f64>>, labels: Vec<String>, step_s: f64) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::invalid(
                "a score stream needs the blank and at least one class",
            ));
        }
        if labels[0] != BLANK {
            return Err(Error::invalid(format!("first label must be `{BLANK}`")));
        }
        if !(step_s > 0.0) {
            return Err(Error::invalid("step duration must be positive"));
        }
        for (t, row) in probs.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(Error::ShapeMismatch(format!(
                    "step {t} has {} scores for {} labels",
                    row.len(),
                    labels.len()
                )));
            }
            if row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(Error::invalid(format!(
                    "step {t} has a negative or non-finite score"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("step {t} sums to {sum}, not 1")));
            }
        }
        Ok(ScoreStream {
            probs,
            labels,
            step_s,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn step_s(&self) -> f64 {
        self.step_s
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Highest-probability class of step `t`; the first maximum wins.
    pub fn argmax(&self, t: usize) -> usize {
        let row = &self.probs[t];
        let mut best = 0;
        for (i, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax_path(&self) -> Vec<usize> {
        (0..self.len()).map(|t| self.argmax(t)).collect()
    }

    fn check_mdi(&self, mdi: &Mdi) -> Result<()> {
        if mdi.start_step > mdi.end_step || mdi.end_step >= self.len() {
            return Err(Error::invalid(format!(
                "MDI steps {}..={} outside the {}-step stream",
                mdi.start_step,
                mdi.end_step,
                self.len()
            )));
        }
        Ok(())
    }

    /// CSV: `# step_s=...`, a label header, then one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# step_s={}\n{}\n", self.step_s, self.labels.join(","));
        for row in &self.probs {
            let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut offset = 0u64;
        let mut step_s = None;
        let mut labels: Option<Vec<String>> = None;
        let mut probs = Vec::new();
        for line in text.split_inclusive('\n') {
            let t = line.trim();
            if let Some(meta) = t.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("step_s=") {
                        step_s = Some(v.parse::<f64>().map_err(|_| Error::Format {
                            offset,
                            message: format!("bad step_s {v:?}"),
                        })?);
                    }
                }
            } else if !t.is_empty() {
                if labels.is_none() {
                    labels = Some(t.split(',').map(|s| s.trim().to_string()).collect());
                } else {
                    let row = t
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Format {
                            offset,
                            message: format!("bad score row {t:?}"),
                        })?;
                    probs.push(row);
                }
            }
            offset += line.len() as u64;
        }
        let labels = labels.ok_or_else(|| Error::Format {
            offset: 0,
            message: "missing label header".into(),
        })?;
        ScoreStream::new(probs, labels, step_s.unwrap_or(0.2))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}

/// Ground-truth or annotated interval with a class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMdi {
    #[serde(flatten)]
    pub mdi: Mdi,
    pub label: String,
}

/// Collapses a step path: merge adjacent repeats, then drop blanks (index 0).
pub fn collapse_path(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in path {
        if Some(c) != prev && c != 0 {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Best-path (greedy) decoding: per-step argmax, collapse repeats, remove blanks.
pub fn best_path_decode(stream: &ScoreStream) -> Vec<String> {
    collapse_path(&stream.argmax_path())
        .into_iter()
        .map(|c| stream.labels[c].clone())
        .collect()
}

/// Statistical mode of the non-blank per-step argmax labels over the MDI.
/// Ties go to the label that reached the winning count first. `None` means
/// every step was blank.
pub fn classify_mdi(stream: &ScoreStream, mdi: &Mdi) -> Result<Option<String>> {
    stream.check_mdi(mdi)?;
    let n = stream.labels.len();
    let mut counts = vec![0usize; n];
    // step at which each label reached each count
    let mut reached: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in mdi.start_step..=mdi.end_step {
        let c = stream.argmax(t);
        if c == 0 {
            continue;
        }
        counts[c] += 1;
        reached[c].push(t);
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    if top == 0 {
        return Ok(None);
    }
    let winner = (1..n)
        .filter(|&c| counts[c] == top)
        .min_by_key(|&c| reached[c][top - 1])
        .expect("a label holds the top count");
    Ok(Some(stream.labels[winner].clone()))
}

/// Weighted multi-task loss `lambda_ctc * l_ctc + sum_i lambda_i * l_i`.
pub fn mtl_total_loss(
    l_ctc: f64,
    lambda_ctc: f64,
    task_losses: &[f64],
    lambdas: &[f64],
) -> Result<f64> {
    if task_losses.len() != lambdas.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} task losses but {} weights",
            task_losses.len(),
            lambdas.len()
        )));
    }
    if lambda_ctc < 0.0 || lambdas.iter().any(|&l| l < 0.0) {
        return Err(Error::invalid("loss weights must be non-negative"));
    }
    Ok(lambda_ctc * l_ctc
        + task_losses
            .iter()
            .zip(lambdas)
            .map(|(l, w)| l * w)
            .sum::<f64>())
}
