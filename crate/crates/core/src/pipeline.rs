//! Cube-to-features processing chain and the motion-detection dispatch
//! shared by the CLI and the evaluation harnesses.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::config::{Detector, MotionParams, PipelineConfig};
use crate::datacube::{bpm_demux, ChannelKind, IQCube};
use crate::envelope::{abs_distance, envelopes_with, EnvelopePair};
use crate::error::Result;
use crate::motiondetect::{
    detect_intervals_fixed, detect_intervals_pbc, detect_intervals_vw, Detection,
};
use crate::rfrep::{
    angle_grid_deg, ca_cfar, enhance_ra, horn_schunck_flow, micro_doppler_spectrogram,
    music_range_angle, normalize_pair, rd_video, RAFrame, RDFrame, Spectrogram,
};

/// Everything `process` derives from one cube.
#[derive(Debug, Clone)]
pub struct Processed {
    /// Range bins gated into the spectrogram.
    pub range_bins: BTreeSet<usize>,
    pub rd_frames: Vec<RDFrame>,
    pub spectrogram: Spectrogram,
    /// Envelopes of `spectrogram`, one per detection step.
    pub envelopes: EnvelopePair,
    /// Envelopes of the finer scorer spectrogram.
    pub scorer_envelopes: EnvelopePair,
    /// `(cpi index, frame)`; enhanced by optical flow when enabled.
    pub ra_frames: Vec<(usize, RAFrame)>,
}

/// The cube processing works on: BPM physical cubes are demultiplexed.
pub fn working_cube(cube: &IQCube) -> Result<IQCube> {
    if cube.kind() == ChannelKind::Physical && cube.config().bpm_enabled {
        bpm_demux(cube)
    } else {
        Ok(cube.clone())
    }
}

/// Union of the CFAR-detected range bins over all frames; every bin when
/// nothing is detected or the CFAR window does not fit the frame.
pub fn gate_range_bins(
    frames: &[RDFrame],
    cfg: &PipelineConfig,
    n_fast: usize,
) -> Result<BTreeSet<usize>> {
    let masks: Vec<BTreeSet<usize>> = frames
        .par_iter()
        .map(|f| {
            ca_cfar(f, &cfg.cfar)
                .map(|m| m.detected_range_bins)
                .unwrap_or_default()
        })
        .collect();
    let bins: BTreeSet<usize> = masks.into_iter().flatten().collect();
    Ok(if bins.is_empty() {
        (0..n_fast).collect()
    } else {
        bins
    })
}

/// Range-Doppler video, CFAR-gated spectrograms and envelopes, and (for
/// multi-element virtual arrays) MUSIC range-angle frames at every
/// `ra_stride`-th CPI.
pub fn process_cube(
    cube: &IQCube,
    cfg: &PipelineConfig,
    ra_stride: Option<usize>,
) -> Result<Processed> {
    cfg.validate()?;
    let work = working_cube(cube)?;
    let rd_frames = if work.frame_count() > 0 {
        rd_video(&work, 0)?
    } else {
        Vec::new()
    };
    let range_bins = gate_range_bins(&rd_frames, cfg, work.n_fast())?;

    let rate = work.slow_time_rate_hz();
    let (win, hop) = cfg.stft.samples(rate)?;
    let spectrogram = micro_doppler_spectrogram(&work, &range_bins, win, hop, 0)?;
    let envelopes = envelopes_with(&spectrogram, &cfg.envelope)?;
    let (swin, shop) = cfg.scorer_stft.samples(rate)?;
    let scorer_spec = micro_doppler_spectrogram(&work, &range_bins, swin, shop, 0)?;
    let scorer_envelopes = envelopes_with(&scorer_spec, &cfg.envelope)?;

    let ra_frames = match ra_stride {
        Some(stride)
            if work.kind() == ChannelKind::Virtual && work.n_chan() > cfg.music.n_sources =>
        {
            range_angle_frames(&work, cfg, stride.max(1))?
        }
        _ => Vec::new(),
    };
    Ok(Processed {
        range_bins,
        rd_frames,
        spectrogram,
        envelopes,
        scorer_envelopes,
        ra_frames,
    })
}

fn range_angle_frames(
    work: &IQCube,
    cfg: &PipelineConfig,
    stride: usize,
) -> Result<Vec<(usize, RAFrame)>> {
    let m = &cfg.music;
    let grid = angle_grid_deg(m.angle_min_deg, m.angle_max_deg, m.angle_step_deg);
    let selected: Vec<usize> = (0..work.frame_count()).step_by(stride).collect();
    selected
        .par_iter()
        .map(|&k| {
            let frame = music_range_angle(work, k, m.n_sources, &grid)?;
            if !cfg.flow.enabled || k == 0 {
                return Ok((k, frame));
            }
            let prev = music_range_angle(work, k - 1, m.n_sources, &grid)?;
            let (a, b) = normalize_pair(&prev, &frame);
            let flow = horn_schunck_flow(&a, &b, &cfg.flow.horn_schunck)?;
            Ok((k, enhance_ra(&frame, &flow)?))
        })
        .collect()
}

/// Runs the configured detector on the max-normalized distance vector of
/// a detection-rate envelope stream.
pub fn detect_motion(env: &EnvelopePair, motion: &MotionParams) -> Result<Detection> {
    let v = abs_distance(env, true);
    let cfg = motion.sta_lta.to_steps(v.step_s)?;
    match motion.detector {
        Detector::Vw => detect_intervals_vw(&v, &cfg),
        Detector::Fixed => detect_intervals_fixed(&v, motion.fixed_window_s, &cfg),
        Detector::Pbc => detect_intervals_pbc(&v, motion.pbc_threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::RadarConfig;
    use crate::synth::{simulate, Scatterer, Scene, Trajectory};

    #[test]
    fn zero_cube_gives_zero_products() {
        let cfg = PipelineConfig::default();
        let cube = IQCube::zeros(RadarConfig::compact(), ChannelKind::Physical, 3200).unwrap();
        let p = process_cube(&cube, &cfg, Some(1)).unwrap();
        assert_eq!(p.rd_frames.len(), 25);
        assert_eq!(p.range_bins.len(), 32);
        assert!(p.spectrogram.power.as_slice().iter().all(|&v| v == 0.0));
        assert!(p
            .envelopes
            .upper
            .iter()
            .chain(&p.envelopes.lower)
            .all(|&v| v == 0.0));
        assert!(p.ra_frames.is_empty());
        assert!(detect_motion(&p.envelopes, &cfg.motion)
            .unwrap()
            .mdis
            .is_empty());
    }

    #[test]
    fn mimo_cube_gives_25_frames_per_second_and_range_angle_maps() {
        let mut cfg = PipelineConfig::default();
        cfg.stft.window_s = 0.04;
        cfg.stft.hop_s = 0.02;
        cfg.scorer_stft = cfg.stft;
        let radar = RadarConfig::mimo_77ghz();
        let scene = Scene {
            duration_s: 0.2,
            noise_power: 1e-4,
            seed: 2,
            scatterers: vec![Scatterer {
                name: "p".into(),
                amplitude: 1.0,
                phase_rad: 0.0,
                active: None,
                label: None,
                trajectory: Trajectory::Static {
                    range_m: 1.5,
                    angle_rad: 0.3,
                },
            }],
            clutter: vec![],
        };
        let (cube, _) = simulate(&scene, &radar).unwrap();
        let p = process_cube(&cube, &cfg, Some(2)).unwrap();
        assert_eq!(p.rd_frames.len(), 5);
        assert!(p.range_bins.contains(&40));
        assert_eq!(
            p.ra_frames.iter().map(|f| f.0).collect::<Vec<_>>(),
            vec![0, 2, 4]
        );
        assert!((p.ra_frames[0].1.peak_angle(40) - 0.3).abs() < 1f64.to_radians());
    }
}
