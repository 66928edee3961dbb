//! Corpus-level harnesses over simulated sequence recordings: segmentation
//! accuracy, leave-one-out template classification and trigger corpora.

use rayon::prelude::*;

use crate::config::{MotionParams, PipelineConfig};
use crate::envelope::EnvelopePair;
use crate::error::{Error, Result};
use crate::motiondetect::{pooled_accuracy, Mdi, SegmentationMask};
use crate::pipeline::{detect_motion, process_cube};
use crate::seqdecode::{
    classify_mdi, dtw_template_scorer, LabeledMdi, LabeledSpan, ScoreStream, TemplateSet,
};
use crate::synth::{make_sequence_scene, simulate, GroundTruth, MotionLibrary};

/// One simulated sequence recording reduced to its envelope streams.
#[derive(Debug, Clone)]
pub struct Recording {
    pub kind: usize,
    pub seed: u64,
    pub truth: GroundTruth,
    /// Detection-rate envelopes.
    pub envelopes: EnvelopePair,
    /// Scorer-rate envelopes.
    pub scorer_envelopes: EnvelopePair,
}

pub fn simulate_recording(
    kind: usize,
    seed: u64,
    lib: &MotionLibrary,
    cfg: &PipelineConfig,
) -> Result<Recording> {
    let scene = make_sequence_scene(kind, lib, seed)?;
    let (cube, truth) = simulate(&scene, &cfg.radar)?;
    let p = process_cube(&cube, cfg, None)?;
    Ok(Recording {
        kind,
        seed,
        truth,
        envelopes: p.envelopes,
        scorer_envelopes: p.scorer_envelopes,
    })
}

/// Every `(kind, seed)` combination, ordered by kind then seed.
pub fn simulate_corpus(
    kinds: &[usize],
    seeds: &[u64],
    lib: &MotionLibrary,
    cfg: &PipelineConfig,
) -> Result<Vec<Recording>> {
    let jobs: Vec<(usize, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.par_iter()
        .map(|&(k, s)| simulate_recording(k, s, lib, cfg))
        .collect()
}

/// Detected MDIs and the `(detected, truth)` mask pair of one recording.
/// The detected mask is cut or zero-padded to the truth length.
pub fn segment(
    rec: &Recording,
    motion: &MotionParams,
) -> Result<(Vec<Mdi>, SegmentationMask, SegmentationMask)> {
    let det = detect_motion(&rec.envelopes, motion)?;
    let mut mask = det.mask;
    mask.resize(rec.truth.mask.len(), false);
    Ok((det.mdis, mask, rec.truth.mask.clone()))
}

/// Step agreement between detected and true masks pooled over `recs`.
pub fn segmentation_accuracy_of(recs: &[Recording], motion: &MotionParams) -> Result<f64> {
    let pairs: Vec<(SegmentationMask, SegmentationMask)> = recs
        .par_iter()
        .map(|r| segment(r, motion).map(|(_, m, t)| (m, t)))
        .collect::<Result<_>>()?;
    pooled_accuracy(&pairs)
}

/// Templates cut from the labeled truth segments of `recs`.
pub fn segment_templates(recs: &[&Recording], max_per_class: usize) -> Result<TemplateSet> {
    let segments: Vec<Vec<LabeledSpan>> = recs
        .iter()
        .map(|r| {
            r.truth
                .segments
                .iter()
                .map(|s| (s.label.clone(), s.start_s, s.end_s))
                .collect()
        })
        .collect();
    let inputs: Vec<(&EnvelopePair, &[LabeledSpan])> = recs
        .iter()
        .zip(&segments)
        .map(|(r, s)| (&r.scorer_envelopes, s.as_slice()))
        .collect();
    TemplateSet::from_segments(&inputs, max_per_class)
}

/// Outcome of classifying one detected MDI (or one missed truth interval).
#[derive(Debug, Clone, PartialEq)]
pub struct MdiOutcome {
    /// Label of the truth interval the MDI overlaps most; `None` for a
    /// spurious detection.
    pub truth: Option<String>,
    /// Classifier output; `None` for no-class or a missed truth interval.
    pub predicted: Option<String>,
}

impl MdiOutcome {
    pub fn correct(&self) -> bool {
        self.truth.is_some() && self.truth == self.predicted
    }
}

/// Score stream, detected MDIs, truth intervals and per-MDI outcomes of
/// one recording scored against `templates`.
#[derive(Debug, Clone)]
pub struct ScoredRecording {
    pub stream: ScoreStream,
    pub mdis: Vec<Mdi>,
    pub truth: Vec<LabeledMdi>,
    pub outcomes: Vec<MdiOutcome>,
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

/// Classifies every detected MDI by the mode of the score stream and
/// attributes it to the truth interval it overlaps most. Truth intervals
/// no MDI is attributed to are recorded as misses.
pub fn score_recording(
    rec: &Recording,
    templates: &TemplateSet,
    cfg: &PipelineConfig,
) -> Result<ScoredRecording> {
    let stream = dtw_template_scorer(&rec.scorer_envelopes, templates, &cfg.scorer)?;
    if (stream.step_s() - rec.truth.step_s).abs() > 1e-9 {
        return Err(Error::invalid(
            "scorer step must equal the ground-truth step",
        ));
    }
    let (mdis, _, _) = segment(rec, &cfg.motion)?;
    let truth = rec.truth.labeled_mdis();
    let mut hit = vec![false; truth.len()];
    let mut outcomes = Vec::new();
    for m in &mdis {
        let clipped = Mdi::new(
            m.start_step.min(stream.len() - 1),
            m.end_step.min(stream.len() - 1),
            stream.step_s(),
        );
        let predicted = classify_mdi(&stream, &clipped)?;
        let best = truth
            .iter()
            .enumerate()
            .map(|(i, t)| (i, overlap(m, &t.mdi)))
            .filter(|&(_, o)| o > 0)
            .fold(None, |acc: Option<(usize, usize)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        if let Some((i, _)) = best {
            hit[i] = true;
        }
        outcomes.push(MdiOutcome {
            truth: best.map(|(i, _)| truth[i].label.clone()),
            predicted,
        });
    }
    for (t, h) in truth.iter().zip(&hit) {
        if !h {
            outcomes.push(MdiOutcome {
                truth: Some(t.label.clone()),
                predicted: None,
            });
        }
    }
    Ok(ScoredRecording {
        stream,
        mdis,
        truth,
        outcomes,
    })
}

/// Scores each recording with templates built from all the others.
pub fn leave_one_out(recs: &[Recording], cfg: &PipelineConfig) -> Result<Vec<ScoredRecording>> {
    if recs.len() < 2 {
        return Err(Error::invalid(
            "leave-one-out needs at least two recordings",
        ));
    }
    (0..recs.len())
        .into_par_iter()
        .map(|i| {
            let others: Vec<&Recording> = recs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| r)
                .collect();
            let templates = segment_templates(&others, cfg.scorer.max_templates_per_class)?;
            score_recording(&recs[i], &templates, cfg)
        })
        .collect()
}

/// Fraction of correct outcomes over all scored recordings.
pub fn mdi_accuracy(scored: &[ScoredRecording]) -> f64 {
    let all: Vec<&MdiOutcome> = scored.iter().flat_map(|s| &s.outcomes).collect();
    if all.is_empty() {
        return 0.0;
    }
    all.iter().filter(|o| o.correct()).count() as f64 / all.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_counts_shared_steps() {
        assert_eq!(overlap(&Mdi::new(2, 5, 0.2), &Mdi::new(4, 9, 0.2)), 2);
        assert_eq!(overlap(&Mdi::new(2, 5, 0.2), &Mdi::new(6, 9, 0.2)), 0);
    }

    #[test]
    fn outcome_needs_a_truth_label() {
        let o = MdiOutcome {
            truth: None,
            predicted: None,
        };
        assert!(!o.correct());
        let o = MdiOutcome {
            truth: Some("a".into()),
            predicted: Some("a".into()),
        };
        assert!(o.correct());
    }
}
