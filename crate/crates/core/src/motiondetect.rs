//! Motion segmentation of a distance vector into motion-detected intervals
//! (MDIs): the variable-window STA/LTA detector, the fixed-window and
//! plain-threshold baselines, and mask accuracy.

use serde::{Deserialize, Serialize};

use crate::envelope::DistanceVector;
use crate::error::{Error, Result};

/// STA/LTA detector settings in time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaLtaConfig {
    /// Leading (short) window length.
    pub t1_steps: usize,
    /// Lagging (long) window length.
    pub t2_steps: usize,
    /// Start amplitude threshold.
    pub sigma1: f64,
    /// STA/LTA ratio threshold.
    pub sigma2: f64,
    /// Stop amplitude threshold.
    pub sigma3: f64,
    /// Intervals shorter than this are dropped.
    pub min_steps: usize,
}

impl StaLtaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t1_steps == 0 || self.t1_steps >= self.t2_steps {
            return Err(Error::invalid(format!(
                "need 0 < T1 < T2, got T1={} T2={}",
                self.t1_steps, self.t2_steps
            )));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0 && self.sigma3 > 0.0) {
            return Err(Error::invalid("STA/LTA thresholds must be positive"));
        }
        if !(self.sigma3 < self.sigma1) {
            return Err(Error::invalid("stop threshold sigma3 must be below sigma1"));
        }
        Ok(())
    }
}

/// Seconds-based STA/LTA settings as stored in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaLtaParams {
    pub t1_s: f64,
    pub t2_s: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub min_duration_s: f64,
}

impl Default for StaLtaParams {
    fn default() -> Self {
        StaLtaParams {
            t1_s: 0.4,
            t2_s: 2.0,
            sigma1: 0.15,
            sigma2: 2.0,
            sigma3: 0.05,
            min_duration_s: 0.4,
        }
    }
}

impl StaLtaParams {
    /// Converts window lengths to whole steps of `step_s` seconds.
    pub fn to_steps(&self, step_s: f64) -> Result<StaLtaConfig> {
        if !(step_s > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        let steps = |s: f64| (s / step_s).round().max(0.0) as usize;
        let cfg = StaLtaConfig {
            t1_steps: steps(self.t1_s),
            t2_steps: steps(self.t2_s),
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            sigma3: self.sigma3,
            min_steps: steps(self.min_duration_s),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Inclusive step range of detected motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mdi {
    pub start_step: usize,
    pub end_step: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl Mdi {
    pub fn new(start_step: usize, end_step: usize, step_s: f64) -> Self {
        Mdi {
            start_step,
            end_step,
            start_s: start_step as f64 * step_s,
            end_s: (end_step + 1) as f64 * step_s,
        }
    }

    pub fn len(&self) -> usize {
        self.end_step - self.start_step + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, step: usize) -> bool {
        (self.start_step..=self.end_step).contains(&step)
    }
}

/// Per-step motion flags.
pub type SegmentationMask = Vec<bool>;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mdis: Vec<Mdi>,
    pub mask: SegmentationMask,
}

/// Mask that is true exactly on the steps of `mdis`.
pub fn mask_from_mdis(mdis: &[Mdi], len: usize) -> SegmentationMask {
    let mut mask = vec![false; len];
    for m in mdis {
        let hi = (m.end_step + 1).min(len);
        if m.start_step < hi {
            mask[m.start_step..hi].fill(true);
        }
    }
    mask
}

/// `STA(t)` = mean of `v` over `(t, t+T1]`, `LTA(t)` = mean over
/// `(t-T2, t]`, each clamped to the stream; an empty window averages to 0.
pub fn sta_lta(v: &[f64], t: usize, cfg: &StaLtaConfig) -> (f64, f64) {
    let n = v.len();
    let mean = |lo: usize, hi: usize| {
        if lo > hi || lo >= n {
            0.0
        } else {
            let hi = hi.min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        }
    };
    let sta = mean(t + 1, t + cfg.t1_steps);
    let lta = mean((t + 1).saturating_sub(cfg.t2_steps), t);
    (sta, lta)
}

/// `STA / LTA`, with a vanishing LTA treated as an infinite ratio only when
/// STA already exceeds the start threshold.
fn ratio(sta: f64, lta: f64, sigma1: f64) -> f64 {
    if lta < 1e-9 {
        if sta > sigma1 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        sta / lta
    }
}

fn normalized(v: &DistanceVector) -> Vec<f64> {
    if v.normalized {
        v.values.clone()
    } else {
        v.normalized().values
    }
}

/// Onset step for a start decision at `t`: the first sample of the leading
/// window above `sigma1`.
fn refine_onset(v: &[f64], t: usize, cfg: &StaLtaConfig) -> usize {
    let hi = (t + cfg.t1_steps).min(v.len() - 1);
    (t + 1..=hi).find(|&k| v[k] > cfg.sigma1).unwrap_or(t + 1)
}

fn is_start(v: &[f64], t: usize, cfg: &StaLtaConfig) -> bool {
    let (sta, lta) = sta_lta(v, t, cfg);
    sta > cfg.sigma1 && ratio(sta, lta, cfg.sigma1) > cfg.sigma2
}

/// Variable-window STA/LTA detection. Starts when `STA > sigma1` and
/// `STA/LTA > sigma2`; stops when `STA < sigma3` and `STA/LTA < sigma2`.
/// An interval still open at the end of the stream closes at its last step.
/// Unnormalized input is max-normalized first.
pub fn detect_intervals_vw(v: &DistanceVector, cfg: &StaLtaConfig) -> Result<Detection> {
    cfg.validate()?;
    let x = normalized(v);
    let n = x.len();
    let mut raw = Vec::new();
    let mut open: Option<usize> = None;
    for t in 0..n {
        match open {
            None => {
                if is_start(&x, t, cfg) {
                    open = Some(refine_onset(&x, t, cfg));
                }
            }
            Some(start) => {
                if t < start {
                    continue;
                }
                let (sta, lta) = sta_lta(&x, t, cfg);
                if sta < cfg.sigma3 && ratio(sta, lta, cfg.sigma1) < cfg.sigma2 {
                    raw.push((start, t));
                    open = None;
                }
            }
        }
    }
    if let Some(start) = open {
        if start < n {
            raw.push((start, n - 1));
        }
    }
    let mdis: Vec<Mdi> = raw
        .into_iter()
        .filter(|(s, e)| e - s + 1 >= cfg.min_steps.max(1))
        .map(|(s, e)| Mdi::new(s, e, v.step_s))
        .collect();
    let mask = mask_from_mdis(&mdis, n);
    Ok(Detection { mdis, mask })
}

/// Fixed-window baseline: the same onset rule, but every interval lasts
/// `window_s` from its onset (clipped at the stream end). Onsets inside an
/// open window are ignored.
pub fn detect_intervals_fixed(
    v: &DistanceVector,
    window_s: f64,
    cfg: &StaLtaConfig,
) -> Result<Detection> {
    cfg.validate()?;
    let n = v.len();
    let w = (window_s / v.step_s).round() as usize;
    if !(window_s > 0.0) || w == 0 {
        return Err(Error::invalid(
            "fixed detection window must span at least one step",
        ));
    }
    if w > n {
        return Err(Error::invalid(format!(
            "fixed window of {w} steps is longer than the {n}-step stream"
        )));
    }
    let x = normalized(v);
    let mut mdis = Vec::new();
    let mut t = 0;
    while t < n {
        if is_start(&x, t, cfg) {
            let start = refine_onset(&x, t, cfg);
            let end = (start + w - 1).min(n - 1);
            mdis.push(Mdi::new(start, end, v.step_s));
            t = end + 1;
        } else {
            t += 1;
        }
    }
    let mask = mask_from_mdis(&mdis, n);
    Ok(Detection { mdis, mask })
}

/// Power-based baseline: maximal runs with `v > threshold` on the
/// normalized vector.
pub fn detect_intervals_pbc(v: &DistanceVector, threshold: f64) -> Result<Detection> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("PBC threshold must be positive"));
    }
    let x = normalized(v);
    let mut mdis = Vec::new();
    let mut start = None;
    for (t, &val) in x.iter().enumerate() {
        match (start, val > threshold) {
            (None, true) => start = Some(t),
            (Some(s), false) => {
                mdis.push(Mdi::new(s, t - 1, v.step_s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        mdis.push(Mdi::new(s, x.len() - 1, v.step_s));
    }
    let mask = mask_from_mdis(&mdis, x.len());
    Ok(Detection { mdis, mask })
}

/// Fraction of steps on which the two masks agree.
pub fn segmentation_accuracy(mask: &[bool], truth: &[bool]) -> Result<f64> {
    if mask.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} steps, truth has {}",
            mask.len(),
            truth.len()
        )));
    }
    if mask.is_empty() {
        return Err(Error::invalid("cannot score empty masks"));
    }
    let agree = mask.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / mask.len() as f64)
}

/// Agreement pooled over several recordings (total agreeing steps over
/// total steps).
pub fn pooled_accuracy(pairs: &[(SegmentationMask, SegmentationMask)]) -> Result<f64> {
    let (mut agree, mut total) = (0.0, 0usize);
    for (m, t) in pairs {
        agree += segmentation_accuracy(m, t)? * m.len() as f64;
        total += m.len();
    }
    if total == 0 {
        return Err(Error::invalid("no recordings to score"));
    }
    Ok(agree / total as f64)
}

pub fn mask_to_csv(mask: &[bool]) -> String {
    let mut out = String::with_capacity(mask.len() * 2);
    for &m in mask {
        out.push(if m { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn parse_mask_csv(text: &str) -> Result<SegmentationMask> {
    let mut offset = 0u64;
    let mut mask = Vec::new();
    for line in text.split_inclusive('\n') {
        match line.trim() {
            "1" => mask.push(true),
            "0" => mask.push(false),
            "" => {}
            other => {
                return Err(Error::Format {
                    offset,
                    message: format!("mask entries must be 0 or 1, found {other:?}"),
                })
            }
        }
        offset += line.len() as u64;
    }
    Ok(mask)
}
