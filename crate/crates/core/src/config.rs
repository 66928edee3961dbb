//! The single TOML document holding every tunable pipeline constant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datacube::RadarConfig;
use crate::envelope::EnvelopeParams;
use crate::error::{Error, Result};
use crate::motiondetect::StaLtaParams;
use crate::rfrep::{CfarParams, HornSchunckParams};
use crate::seqdecode::{TemplateScorerParams, TriggerConfig, TriggerMode};
use crate::util::write_atomic;

/// Short-time Fourier transform settings in seconds of slow time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub window_s: f64,
    pub hop_s: f64,
}

impl StftParams {
    /// Window and hop in samples at `rate_hz`; both must be whole.
    pub fn samples(&self, rate_hz: f64) -> Result<(usize, usize)> {
        let whole = |s: f64, name: &str| -> Result<usize> {
            let n = s * rate_hz;
            let r = n.round();
            if !(r >= 1.0 && (n - r).abs() < 1e-6) {
                return Err(Error::Config(format!(
                    "stft {name} of {s} s is not a whole number of chirps at {rate_hz} Hz"
                )));
            }
            Ok(r as usize)
        };
        Ok((whole(self.window_s, "window")?, whole(self.hop_s, "hop")?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MusicParams {
    pub n_sources: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub enabled: bool,
    pub horn_schunck: HornSchunckParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Vw,
    Fixed,
    Pbc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionParams {
    pub detector: Detector,
    pub sta_lta: StaLtaParams,
    pub fixed_window_s: f64,
    pub pbc_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerParams {
    pub mode: TriggerMode,
    pub csa: TriggerConfig,
    /// Confidence factors evaluated by a sweep.
    pub sweep_gammas: Vec<f64>,
    /// `gamma_low = ratio * gamma` during a sweep.
    pub sweep_low_ratio: f64,
}

/// Which per-frame products `process` writes to disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    pub write_rd: bool,
    pub write_ra: bool,
    /// Write every n-th frame.
    pub frame_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Radar used by `simulate` and `make-scene`.
    pub radar: RadarConfig,
    pub cfar: CfarParams,
    /// Spectrogram feeding motion detection; its hop is the detection step.
    pub stft: StftParams,
    /// Finer spectrogram feeding the template scorer.
    pub scorer_stft: StftParams,
    pub envelope: EnvelopeParams,
    pub music: MusicParams,
    pub flow: FlowParams,
    pub motion: MotionParams,
    pub scorer: TemplateScorerParams,
    pub trigger: TriggerParams,
    pub output: OutputParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            radar: RadarConfig::compact(),
            cfar: CfarParams {
                guard_range: 1,
                guard_doppler: 2,
                train_range: 2,
                train_doppler: 8,
                pfa: 1e-4,
            },
            stft: StftParams {
                window_s: 0.2,
                hop_s: 0.2,
            },
            scorer_stft: StftParams {
                window_s: 0.1,
                hop_s: 0.025,
            },
            envelope: EnvelopeParams::default(),
            music: MusicParams {
                n_sources: 1,
                angle_min_deg: -60.0,
                angle_max_deg: 60.0,
                angle_step_deg: 1.0,
            },
            flow: FlowParams {
                enabled: true,
                horn_schunck: HornSchunckParams::default(),
            },
            motion: MotionParams {
                detector: Detector::Vw,
                sta_lta: StaLtaParams::default(),
                fixed_window_s: 2.0,
                pbc_threshold: 0.3,
            },
            scorer: TemplateScorerParams::default(),
            trigger: TriggerParams {
                mode: TriggerMode::Double,
                csa: TriggerConfig::default(),
                sweep_gammas: (1..=99).map(|k| k as f64 / 100.0).collect(),
                sweep_low_ratio: 0.7,
            },
            output: OutputParams {
                write_rd: true,
                write_ra: true,
                frame_stride: 1,
            },
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let wrap =
            |section: &str, r: Result<()>| r.map_err(|e| Error::Config(format!("[{section}] {e}")));
        wrap("radar", self.radar.validate())?;
        wrap("cfar", self.cfar.validate())?;
        wrap("envelope", self.envelope.validate())?;
        wrap("scorer", self.scorer.validate())?;
        wrap("trigger", self.trigger.csa.validate())?;
        for (name, s) in [("stft", self.stft), ("scorer_stft", self.scorer_stft)] {
            if !(s.window_s > 0.0 && s.hop_s > 0.0) {
                return Err(Error::Config(format!(
                    "[{name}] window and hop must be positive"
                )));
            }
        }
        wrap(
            "motion",
            self.motion.sta_lta.to_steps(self.stft.hop_s).map(|_| ()),
        )?;
        if !(self.motion.fixed_window_s > 0.0 && self.motion.pbc_threshold > 0.0) {
            return Err(Error::Config(
                "[motion] fixed_window_s and pbc_threshold must be positive".into(),
            ));
        }
        let m = &self.music;
        if m.n_sources == 0
            || !(m.angle_step_deg > 0.0 && m.angle_min_deg < m.angle_max_deg)
            || !(m.angle_min_deg > -90.0 && m.angle_max_deg < 90.0)
        {
            return Err(Error::Config(
                "[music] needs n_sources >= 1 and an angle range inside (-90, 90)".into(),
            ));
        }
        if !(self.flow.horn_schunck.alpha > 0.0) {
            return Err(Error::Config("[flow] alpha must be positive".into()));
        }
        let t = &self.trigger;
        if t.sweep_gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0))
            || !(t.sweep_low_ratio > 0.0 && t.sweep_low_ratio < 1.0)
        {
            return Err(Error::Config(
                "[trigger] sweep gammas and low ratio must lie in (0, 1)".into(),
            ));
        }
        if self.output.frame_stride == 0 {
            return Err(Error::Config("[output] frame_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_toml()?.as_bytes())
    }

    /// The configuration at `path`, or the defaults when none is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => PipelineConfig::load(p),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let text = PipelineConfig::default().to_toml().unwrap();
        let extra = text.replacen("[cfar]", "[cfar]\nbogus = 1", 1);
        assert!(matches!(
            PipelineConfig::from_toml(&extra),
            Err(Error::Config(_))
        ));
        let bad = text.replacen("pfa = 0.0001", "pfa = 2.0", 1);
        assert_ne!(bad, text);
        assert!(PipelineConfig::from_toml(&bad).is_err());
        assert!(PipelineConfig::from_toml("radar = 3").is_err());
    }

    #[test]
    fn stft_seconds_convert_to_whole_samples() {
        let s = StftParams {
            window_s: 0.2,
            hop_s: 0.025,
        };
        assert_eq!(s.samples(3200.0).unwrap(), (640, 80));
        assert!(StftParams {
            window_s: 0.2,
            hop_s: 0.0001
        }
        .samples(3200.0)
        .is_err());
    }
}
