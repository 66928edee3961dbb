use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ScoreStream, BLANK};
use crate::envelope::EnvelopePair;
use crate::error::{Error, Result};
use crate::util::write_atomic;

/// One envelope frame: `[upper_hz, lower_hz]`.
pub type Frame = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateScorerParams {
    /// Output time step, seconds.
    pub step_s: f64,
    /// Trailing context compared against the templates, seconds.
    pub context_s: f64,
    /// Softmax temperature in Hz of mean per-frame distance.
    pub temperature: f64,
    /// Steps whose mean normalized envelope spread is below this are
    /// treated as silent.
    pub blank_energy: f64,
    /// Blank probability assigned to silent steps.
    pub blank_floor: f64,
    /// Exemplars kept per class when building templates.
    pub max_templates_per_class: usize,
}

impl Default for TemplateScorerParams {
    fn default() -> Self {
        TemplateScorerParams {
            step_s: 0.2,
            context_s: 1.0,
            temperature: 6.0,
            blank_energy: 0.08,
            blank_floor: 0.9,
            max_templates_per_class: 8,
        }
    }
}

impl TemplateScorerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_s > 0.0 && self.context_s > 0.0 && self.temperature > 0.0) {
            return Err(Error::invalid(
                "step, context and temperature must be positive",
            ));
        }
        if !(self.blank_energy >= 0.0 && self.blank_floor > 0.5 && self.blank_floor < 1.0) {
            return Err(Error::invalid(
                "blank_energy must be >= 0 and blank_floor in (0.5, 1)",
            ));
        }
        if self.max_templates_per_class == 0 {
            return Err(Error::invalid("max_templates_per_class must be positive"));
        }
        Ok(())
    }
}

/// Exemplar envelope sequences per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: BTreeMap<String, Vec<Vec<Frame>>>,
}

/// A labeled time span `(label, start_s, end_s)`.
pub type LabeledSpan = (String, f64, f64);

impl TemplateSet {
    /// Collects the frames of every labeled segment `(label, start_s,
    /// end_s)` from each recording, keeping at most `max_per_class`
    /// exemplars per class in input order.
    pub fn from_segments(
        recordings: &[(&EnvelopePair, &[LabeledSpan])],
        max_per_class: usize,
    ) -> Result<Self> {
        let mut templates: BTreeMap<String, Vec<Vec<Frame>>> = BTreeMap::new();
        for (env, segments) in recordings {
            for (label, start, end) in segments.iter() {
                let list = templates.entry(label.clone()).or_default();
                if list.len() >= max_per_class {
                    continue;
                }
                let frames: Vec<Frame> = (0..env.len())
                    .filter(|&i| env.times_s[i] >= *start && env.times_s[i] < *end)
                    .map(|i| [env.upper[i], env.lower[i]])
                    .collect();
                if !frames.is_empty() {
                    list.push(frames);
                }
            }
        }
        templates.retain(|_, v| !v.is_empty());
        let set = TemplateSet { templates };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::invalid("template set is empty"));
        }
        for (label, list) in &self.templates {
            if label == BLANK {
                return Err(Error::invalid("`blank` cannot be a template class"));
            }
            if list.is_empty() || list.iter().any(|t| t.is_empty()) {
                return Err(Error::invalid(format!(
                    "class `{label}` has an empty template"
                )));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<String> {
        self.templates.keys().cloned().collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut doc = serde_json::to_value(self)?;
        doc["schema_version"] = serde_json::json!(1);
        write_atomic(path.as_ref(), serde_json::to_string(&doc)?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut doc: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("schema_version");
        }
        let set: TemplateSet = serde_json::from_value(doc)?;
        set.validate()?;
        Ok(set)
    }
}

fn frame_cost(a: &Frame, b: &Frame) -> f64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

/// DTW cost of aligning all of `query` to the best-matching contiguous
/// stretch of `reference` (free start and end on the reference).
pub fn subsequence_dtw(query: &[Frame], reference: &[Frame]) -> f64 {
    if query.is_empty() || reference.is_empty() {
        return f64::INFINITY;
    }
    let m = reference.len();
    let mut prev: Vec<f64> = reference.iter().map(|r| frame_cost(&query[0], r)).collect();
    let mut cur = vec![0.0; m];
    for q in &query[1..] {
        for j in 0..m {
            let c = frame_cost(q, &reference[j]);
            let mut best = prev[j];
            if j > 0 {
                best = best.min(prev[j - 1]).min(cur[j - 1]);
            }
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev.into_iter().fold(f64::INFINITY, f64::min)
}

/// Per-step class posteriors from envelope templates. For each step the
/// trailing `context_s` of envelope frames (leading silent frames dropped)
/// is matched against every class's exemplars by subsequence DTW; the best
/// mean per-frame cost `d_c` per class gives `softmax(-d_c / temperature)`.
/// Silent steps put `blank_floor` on the blank class.
pub fn dtw_template_scorer(
    env: &EnvelopePair,
    templates: &TemplateSet,
    params: &TemplateScorerParams,
) -> Result<ScoreStream> {
    params.validate()?;
    templates.validate()?;
    if env.is_empty() {
        return Err(Error::invalid("envelope stream is empty"));
    }
    let classes = templates.classes();
    let labels: Vec<String> = std::iter::once(BLANK.to_string())
        .chain(classes.iter().cloned())
        .collect();
    let frames: Vec<Frame> = (0..env.len())
        .map(|i| [env.upper[i], env.lower[i]])
        .collect();
    let spread: Vec<f64> = frames.iter().map(|f| (f[0] - f[1]).abs()).collect();
    let peak = spread.iter().copied().fold(0.0, f64::max);
    let energy: Vec<f64> = spread
        .iter()
        .map(|s| if peak > 0.0 { s / peak } else { 0.0 })
        .collect();

    let dt = env.step_s();
    let end = env.times_s[env.len() - 1] + dt / 2.0;
    let n_steps = ((end / params.step_s) - 1e-9).ceil().max(1.0) as usize;
    let lists: Vec<&Vec<Vec<Frame>>> = classes.iter().map(|c| &templates.templates[c]).collect();

    let rows: Vec<Vec<f64>> = (0..n_steps)
        .into_par_iter()
        .map(|s| {
            let lo = s as f64 * params.step_s;
            let hi = lo + params.step_s;
            let in_step: Vec<usize> = (0..env.len())
                .filter(|&i| env.times_s[i] >= lo && env.times_s[i] < hi)
                .collect();
            let step_energy = if in_step.is_empty() {
                0.0
            } else {
                in_step.iter().map(|&i| energy[i]).sum::<f64>() / in_step.len() as f64
            };
            let ctx_lo = hi - params.context_s;
            let mut ctx: Vec<usize> = (0..env.len())
                .filter(|&i| env.times_s[i] >= ctx_lo && env.times_s[i] < hi)
                .collect();
            let first_active = ctx.iter().position(|&i| energy[i] >= params.blank_energy);
            ctx = match first_active {
                Some(p) => ctx.split_off(p),
                None => Vec::new(),
            };
            let k = classes.len();
            let class_probs: Vec<f64> = if ctx.is_empty() {
                vec![1.0 / k as f64; k]
            } else {
                let query: Vec<Frame> = ctx.iter().map(|&i| frames[i]).collect();
                let d: Vec<f64> = lists
                    .iter()
                    .map(|list| {
                        list.iter()
                            .map(|t| subsequence_dtw(&query, t))
                            .fold(f64::INFINITY, f64::min)
                            / query.len() as f64
                    })
                    .collect();
                let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
                let w: Vec<f64> = d
                    .iter()
                    .map(|x| (-(x - dmin) / params.temperature).exp())
                    .collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            };
            let blank = if step_energy < params.blank_energy {
                params.blank_floor
            } else {
                0.0
            };
            std::iter::once(blank)
                .chain(class_probs.into_iter().map(|p| p * (1.0 - blank)))
                .collect()
        })
        .collect();
    ScoreStream::new(rows, labels, params.step_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_of(frames: &[Frame], dt: f64) -> EnvelopePair {
        EnvelopePair::new(
            (0..frames.len()).map(|i| (i as f64 + 0.5) * dt).collect(),
            frames.iter().map(|f| f[0]).collect(),
            frames.iter().map(|f| f[1]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn subsequence_match_is_free_at_both_ends() {
        let r: Vec<Frame> = (0..10).map(|i| [i as f64, -(i as f64)]).collect();
        assert_eq!(subsequence_dtw(&r[3..6], &r), 0.0);
        assert_eq!(subsequence_dtw(&[[100.0, 0.0]], &r), 100.0);
        assert!(subsequence_dtw(&[], &r).is_infinite());
    }

    fn set() -> TemplateSet {
        let mut templates = BTreeMap::new();
        templates.insert("fast".to_string(), vec![vec![[300.0, -300.0]; 20]]);
        templates.insert("slow".to_string(), vec![vec![[60.0, -40.0]; 20]]);
        TemplateSet { templates }
    }

    #[test]
    fn matching_context_wins_and_silence_is_blank() {
        let mut frames = vec![[0.0, 0.0]; 40];
        frames.extend(vec![[60.0, -40.0]; 40]);
        frames.extend(vec![[0.0, 0.0]; 40]);
        let s = dtw_template_scorer(
            &env_of(&frames, 0.025),
            &set(),
            &TemplateScorerParams::default(),
        )
        .unwrap();
        assert_eq!(s.len(), 15);
        assert_eq!(s.labels(), &["blank", "fast", "slow"]);
        assert_eq!(s.argmax(0), 0);
        assert_eq!(s.argmax(7), 2);
        assert!(s.row(7)[2] > 0.9);
        assert_eq!(s.argmax(14), 0);
    }

    #[test]
    fn empty_templates_are_rejected() {
        let empty = TemplateSet {
            templates: BTreeMap::new(),
        };
        let e = env_of(&[[1.0, 0.0]; 8], 0.025);
        assert!(dtw_template_scorer(&e, &empty, &TemplateScorerParams::default()).is_err());
        let mut t = BTreeMap::new();
        t.insert("x".to_string(), vec![vec![]]);
        assert!(dtw_template_scorer(
            &e,
            &TemplateSet { templates: t },
            &TemplateScorerParams::default()
        )
        .is_err());
    }

    #[test]
    fn templates_from_segments_and_file_round_trip() {
        let frames: Vec<Frame> = (0..40).map(|i| [i as f64, 0.0]).collect();
        let env = env_of(&frames, 0.025);
        let segs = vec![("a".to_string(), 0.0, 0.5), ("b".to_string(), 0.5, 1.0)];
        let set = TemplateSet::from_segments(&[(&env, segs.as_slice())], 4).unwrap();
        assert_eq!(set.templates["a"][0].len(), 20);
        assert_eq!(set.templates["b"][0][0], [20.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        set.save(&p).unwrap();
        assert_eq!(TemplateSet::load(&p).unwrap(), set);
    }
}
