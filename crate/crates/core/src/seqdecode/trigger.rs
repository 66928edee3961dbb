use serde::{Deserialize, Serialize};

use super::{classify_mdi, LabeledMdi, ScoreStream};
use crate::error::{Error, Result};
use crate::motiondetect::Mdi;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    pub trigger_class: String,
    /// Confidence factor: `T = w * gamma`.
    pub gamma: f64,
    /// Low threshold factor: `T_low = w * gamma_low`.
    pub gamma_low: f64,
    /// Fraction of the MDI the score must stay above `T_low`.
    pub dwell_fraction: f64,
    /// Dwell firing also needs the interval (so far) to be classified as
    /// the trigger class.
    pub dwell_requires_classification: bool,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            trigger_class: "teacher".into(),
            gamma: 0.5,
            gamma_low: 0.35,
            dwell_fraction: 0.5,
            dwell_requires_classification: true,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.gamma_low && self.gamma_low < self.gamma && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < gamma_low < gamma < 1, got {} and {}",
                self.gamma_low, self.gamma
            )));
        }
        if !(self.dwell_fraction > 0.0 && self.dwell_fraction <= 1.0) {
            return Err(Error::invalid("dwell_fraction must lie in (0, 1]"));
        }
        if self.trigger_class.is_empty() {
            return Err(Error::invalid("trigger_class must be named"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    HighThreshold,
    Dwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub mdi: Mdi,
    /// Absolute stream step at which the trigger fired.
    pub fire_step: usize,
    pub fire_s: f64,
    pub accumulated_score: f64,
    pub mechanism: Mechanism,
}

fn trigger_index(stream: &ScoreStream, cfg: &TriggerConfig) -> Result<usize> {
    cfg.validate()?;
    match stream.class_index(&cfg.trigger_class) {
        Some(0) | None => Err(Error::invalid(format!(
            "trigger class `{}` is not a class of the stream",
            cfg.trigger_class
        ))),
        Some(i) => Ok(i),
    }
}

fn event(
    stream: &ScoreStream,
    mdi: &Mdi,
    t: usize,
    s_a: f64,
    mechanism: Mechanism,
) -> TriggerEvent {
    TriggerEvent {
        mdi: *mdi,
        fire_step: t,
        fire_s: (t + 1) as f64 * stream.step_s(),
        accumulated_score: s_a,
        mechanism,
    }
}

/// Accumulates the trigger-class probability over the MDI's steps and fires
/// at the first step where it exceeds `T = w * gamma` (`w` = MDI length in
/// steps).
pub fn csa_trigger_single(
    stream: &ScoreStream,
    mdi: &Mdi,
    cfg: &TriggerConfig,
) -> Result<Option<TriggerEvent>> {
    let k = trigger_index(stream, cfg)?;
    stream.check_mdi(mdi)?;
    let threshold = mdi.len() as f64 * cfg.gamma;
    let mut s_a = 0.0;
    for t in mdi.start_step..=mdi.end_step {
        s_a += stream.row(t)[k];
        if s_a > threshold {
            return Ok(Some(event(stream, mdi, t, s_a, Mechanism::HighThreshold)));
        }
    }
    Ok(None)
}

/// Adds a dwell rule to [`csa_trigger_single`]: it also fires once the
/// accumulated score has been above `T_low = w * gamma_low` for at least
/// `dwell_fraction * w` steps (and, if configured, the steps so far are
/// classified as the trigger class).
pub fn csa_trigger_double(
    stream: &ScoreStream,
    mdi: &Mdi,
    cfg: &TriggerConfig,
) -> Result<Option<TriggerEvent>> {
    let k = trigger_index(stream, cfg)?;
    stream.check_mdi(mdi)?;
    let w = mdi.len() as f64;
    let (high, low) = (w * cfg.gamma, w * cfg.gamma_low);
    let needed = cfg.dwell_fraction * w;
    let mut s_a = 0.0;
    let mut dwell = 0usize;
    for t in mdi.start_step..=mdi.end_step {
        s_a += stream.row(t)[k];
        if s_a > high {
            return Ok(Some(event(stream, mdi, t, s_a, Mechanism::HighThreshold)));
        }
        if s_a > low {
            dwell += 1;
            if dwell as f64 >= needed {
                let classified = !cfg.dwell_requires_classification
                    || classify_mdi(stream, &Mdi::new(mdi.start_step, t, stream.step_s()))?
                        .as_deref()
                        == Some(cfg.trigger_class.as_str());
                if classified {
                    return Ok(Some(event(stream, mdi, t, s_a, Mechanism::Dwell)));
                }
            }
        }
    }
    Ok(None)
}

/// Runs one detector over every MDI of a stream.
pub fn run_triggers(
    stream: &ScoreStream,
    mdis: &[Mdi],
    cfg: &TriggerConfig,
    mode: TriggerMode,
) -> Result<Vec<TriggerEvent>> {
    let mut events = Vec::new();
    for m in mdis {
        let e = match mode {
            TriggerMode::Single => csa_trigger_single(stream, m, cfg)?,
            TriggerMode::Double => csa_trigger_double(stream, m, cfg)?,
        };
        events.extend(e);
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub n_total: usize,
    pub n_detected: usize,
    pub n_false: usize,
    pub frr: f64,
    pub far: f64,
    pub detection_rate: f64,
}

impl DetectionReport {
    pub fn from_counts(n_total: usize, n_detected: usize, n_false: usize) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::invalid(
                "no trigger-class intervals in the ground truth",
            ));
        }
        if n_detected > n_total {
            return Err(Error::invalid("more detections than trigger intervals"));
        }
        let nt = n_total as f64;
        let frr = (n_total - n_detected) as f64 / nt;
        let far = n_false as f64 / nt;
        Ok(DetectionReport {
            n_total,
            n_detected,
            n_false,
            frr,
            far,
            detection_rate: 1.0 - frr - far,
        })
    }
}

fn overlap(a: &Mdi, b: &Mdi) -> usize {
    let lo = a.start_step.max(b.start_step);
    let hi = a.end_step.min(b.end_step);
    if lo > hi {
        0
    } else {
        hi - lo + 1
    }
}

/// Index of the truth interval overlapping `mdi` most (earliest on ties).
fn match_truth(mdi: &Mdi, truth: &[LabeledMdi]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, t) in truth.iter().enumerate() {
        let o = overlap(mdi, &t.mdi);
        if o > 0 && best.is_none_or(|(_, b)| o > b) {
            best = Some((i, o));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores events against labeled truth. Each event's MDI is attributed to
/// the truth interval it overlaps most; a trigger-class truth interval with
/// at least one attributed event counts as detected, and every event
/// attributed elsewhere (or nowhere) is a false detection.
pub fn evaluate_detection(
    events: &[TriggerEvent],
    truth: &[LabeledMdi],
    trigger_class: &str,
) -> Result<DetectionReport> {
    let n_total = truth.iter().filter(|t| t.label == trigger_class).count();
    let mut detected = vec![false; truth.len()];
    let mut n_false = 0;
    for e in events {
        match match_truth(&e.mdi, truth) {
            Some(i) if truth[i].label == trigger_class => detected[i] = true,
            _ => n_false += 1,
        }
    }
    DetectionReport::from_counts(n_total, detected.iter().filter(|&&d| d).count(), n_false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub gamma_low: f64,
    pub single: DetectionReport,
    pub double: DetectionReport,
}

/// Evaluates both detectors over a corpus of `(stream, detected MDIs,
/// truth)` recordings for each `gamma`, with `gamma_low = ratio * gamma`.
/// Counts are pooled over recordings.
pub fn gamma_sweep(
    corpus: &[(ScoreStream, Vec<Mdi>, Vec<LabeledMdi>)],
    base: &TriggerConfig,
    gammas: &[f64],
    low_ratio: f64,
) -> Result<Vec<SweepRow>> {
    if !(low_ratio > 0.0 && low_ratio < 1.0) {
        return Err(Error::invalid("gamma_low ratio must lie in (0, 1)"));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let cfg = TriggerConfig {
                gamma,
                gamma_low: gamma * low_ratio,
                ..base.clone()
            };
            let mut single = (0, 0, 0);
            let mut double = (0, 0, 0);
            for (stream, mdis, truth) in corpus {
                for (mode, acc) in [
                    (TriggerMode::Single, &mut single),
                    (TriggerMode::Double, &mut double),
                ] {
                    let events = run_triggers(stream, mdis, &cfg, mode)?;
                    let n_total = truth
                        .iter()
                        .filter(|t| t.label == cfg.trigger_class)
                        .count();
                    if n_total == 0 {
                        let stray = events.len();
                        acc.2 += stray;
                        continue;
                    }
                    let r = evaluate_detection(&events, truth, &cfg.trigger_class)?;
                    acc.0 += r.n_total;
                    acc.1 += r.n_detected;
                    acc.2 += r.n_false;
                }
            }
            Ok(SweepRow {
                gamma,
                gamma_low: cfg.gamma_low,
                single: DetectionReport::from_counts(single.0, single.1, single.2)?,
                double: DetectionReport::from_counts(double.0, double.1, double.2)?,
            })
        })
        .collect()
}
