//! Point-scatterer FMCW simulator with exact ground truth.
//!
//! Each chirp uses the stop-and-hop model: a scatterer at range `R(t)`
//! contributes `A exp(j(phi0 + 2 pi f_b n / f_s + 4 pi R / lambda + m omega))`
//! to fast-time sample `n` of virtual element `m`, with `f_b = 2 R gamma / c`
//! and `omega` the inter-element phase of its angle.

mod sequence;

pub use sequence::{
    make_sequence_scene, BurstMotion, LimbMotion, MotionLibrary, PartMotion, StrokeShape,
    WalkMotion, SEQUENCE_KINDS,
};

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datacube::{ChannelKind, IQCube, RadarConfig};
use crate::error::{Error, Result};
use crate::motiondetect::{Mdi, SegmentationMask};
use crate::seqdecode::LabeledMdi;
use crate::util::write_atomic;

/// Ground-truth time step, seconds.
pub const TRUTH_STEP_S: f64 = 0.2;

/// One sinusoidal velocity component `A sin(2 pi f tau + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub velocity_amplitude_mps: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// Motion of a scatterer in range and angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Static {
        range_m: f64,
        angle_rad: f64,
    },
    /// Linear interpolation between `(t_s, range_m, angle_rad)` knots in
    /// absolute scene time, held constant outside them.
    PiecewiseLinear {
        knots: Vec<[f64; 3]>,
    },
    /// `R(tau) = range0 + drift tau + sum A/(2 pi f) (cos(phase) - cos(2 pi f tau + phase))`
    /// with `tau` measured from the start of the active interval.
    Sinusoidal {
        range0_m: f64,
        #[serde(default)]
        drift_mps: f64,
        angle_rad: f64,
        #[serde(default)]
        strokes: Vec<Stroke>,
    },
}

/// Instantaneous kinematic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle_rad: f64,
}

impl Trajectory {
    fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Static { range_m, angle_rad } => finite(&[*range_m, *angle_rad]),
            Trajectory::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::invalid(
                        "piecewise-linear trajectory needs at least one knot",
                    ));
                }
                finite(&knots.concat())?;
                if knots.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::invalid("knot times must be strictly increasing"));
                }
                Ok(())
            }
            Trajectory::Sinusoidal {
                range0_m,
                drift_mps,
                angle_rad,
                strokes,
            } => {
                finite(&[*range0_m, *drift_mps, *angle_rad])?;
                for s in strokes {
                    finite(&[s.velocity_amplitude_mps, s.frequency_hz, s.phase_rad])?;
                    if !(s.frequency_hz > 0.0) {
                        return Err(Error::invalid("stroke frequency must be positive"));
                    }
                }
                Ok(())
            }
        }
    }

    /// State at absolute time `t`; `t0` is the start of the active interval.
    pub fn state(&self, t: f64, t0: f64) -> State {
        match self {
            Trajectory::Static { range_m, angle_rad } => State {
                range_m: *range_m,
                velocity_mps: 0.0,
                angle_rad: *angle_rad,
            },
            Trajectory::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first[0] {
                    return State {
                        range_m: first[1],
                        velocity_mps: 0.0,
                        angle_rad: first[2],
                    };
                }
                if t >= last[0] {
                    return State {
                        range_m: last[1],
                        velocity_mps: 0.0,
                        angle_rad: last[2],
                    };
                }
                let k = knots.partition_point(|k| k[0] <= t) - 1;
                let (a, b) = (knots[k], knots[k + 1]);
                let u = (t - a[0]) / (b[0] - a[0]);
                State {
                    range_m: a[1] + u * (b[1] - a[1]),
                    velocity_mps: (b[1] - a[1]) / (b[0] - a[0]),
                    angle_rad: a[2] + u * (b[2] - a[2]),
                }
            }
            Trajectory::Sinusoidal {
                range0_m,
                drift_mps,
                angle_rad,
                strokes,
            } => {
                let tau = t - t0;
                let mut r = range0_m + drift_mps * tau;
                let mut v = *drift_mps;
                for s in strokes {
                    let w = 2.0 * PI * s.frequency_hz;
                    let arg = w * tau + s.phase_rad;
                    r += s.velocity_amplitude_mps / w * (s.phase_rad.cos() - arg.cos());
                    v += s.velocity_amplitude_mps * arg.sin();
                }
                State {
                    range_m: r,
                    velocity_mps: v,
                    angle_rad: *angle_rad,
                }
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Trajectory::Static { .. })
    }
}

fn finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("trajectory parameters must be finite"))
    }
}

/// A point scatterer. Scatterers with a `label` are the ground-truth
/// motions; unlabeled ones are background (body, furniture).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub name: String,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
    /// Half-open interval `[t0, t1)` in seconds; whole scene when absent.
    #[serde(default)]
    pub active: Option<[f64; 2]>,
    #[serde(default)]
    pub label: Option<String>,
    pub trajectory: Trajectory,
}

impl Scatterer {
    fn interval(&self, duration: f64) -> (f64, f64) {
        match self.active {
            Some([a, b]) => (a, b),
            None => (0.0, duration),
        }
    }

    fn is_active(&self, t: f64, duration: f64) -> bool {
        let (a, b) = self.interval(duration);
        t >= a && t < b
    }

    pub fn state(&self, t: f64, duration: f64) -> State {
        self.trajectory.state(t, self.interval(duration).0)
    }
}

/// A static scatterer present for the whole scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clutter {
    pub range_m: f64,
    pub angle_rad: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub duration_s: f64,
    /// Variance of the complex-Gaussian noise per sample.
    pub noise_power: f64,
    pub seed: u64,
    #[serde(default)]
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub clutter: Vec<Clutter>,
}

impl Scene {
    pub fn empty(duration_s: f64, seed: u64) -> Self {
        Scene {
            duration_s,
            noise_power: 0.0,
            seed,
            scatterers: Vec::new(),
            clutter: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("scene duration must be positive"));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::invalid("noise power must be non-negative"));
        }
        for s in &self.scatterers {
            s.trajectory
                .validate()
                .map_err(|e| Error::invalid(format!("scatterer `{}`: {e}", s.name)))?;
            if !s.amplitude.is_finite() || !s.phase_rad.is_finite() {
                return Err(Error::invalid(format!(
                    "scatterer `{}` has a non-finite amplitude",
                    s.name
                )));
            }
            if let Some([a, b]) = s.active {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::invalid(format!(
                        "scatterer `{}` has an empty active interval",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// All scatterers, clutter included, as one list.
    fn all_scatterers(&self) -> Vec<Scatterer> {
        let mut all = self.scatterers.clone();
        all.extend(self.clutter.iter().enumerate().map(|(i, c)| Scatterer {
            name: format!("clutter[{i}]"),
            amplitude: c.amplitude,
            phase_rad: 0.0,
            active: None,
            label: None,
            trajectory: Trajectory::Static {
                range_m: c.range_m,
                angle_rad: c.angle_rad,
            },
        }));
        all
    }

    pub fn to_json(&self) -> Result<String> {
        let mut doc = serde_json::to_value(self)?;
        doc["schema_version"] = serde_json::json!(1);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("schema_version");
        }
        let scene: Scene = serde_json::from_value(doc)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json(&text)
    }
}

/// A labeled motion interval in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// True state of one scatterer at the centre of each CPI where it is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub scatterer: String,
    pub samples: Vec<TrackSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub cpi: usize,
    pub time_s: f64,
    #[serde(flatten)]
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub step_s: f64,
    /// Motion flag per step: the step centre lies in the active interval of
    /// some labeled scatterer.
    pub mask: SegmentationMask,
    pub segments: Vec<Segment>,
    pub tracks: Vec<Track>,
}

impl GroundTruth {
    /// Segments as step-indexed intervals; boundaries round to the nearest step.
    pub fn labeled_mdis(&self) -> Vec<LabeledMdi> {
        self.segments
            .iter()
            .filter_map(|s| {
                let a = (s.start_s / self.step_s).round() as usize;
                let b = (s.end_s / self.step_s).round() as usize;
                (b > a).then(|| LabeledMdi {
                    mdi: Mdi::new(a, b - 1, self.step_s),
                    label: s.label.clone(),
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut doc = serde_json::to_value(self)?;
        doc["schema_version"] = serde_json::json!(1);
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("schema_version");
        }
        let truth: GroundTruth = serde_json::from_value(doc)?;
        if !(truth.step_s > 0.0) {
            return Err(Error::invalid("truth step must be positive"));
        }
        Ok(truth)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GroundTruth::from_json(&text)
    }
}

/// Number of `TRUTH_STEP_S` steps covering `duration_s`.
pub fn truth_steps(duration_s: f64) -> usize {
    (duration_s / TRUTH_STEP_S - 1e-9).ceil().max(0.0) as usize
}

/// Chirps generated for a scene: whole chirps within the duration, rounded
/// down to an even count under BPM.
pub fn chirp_count(scene: &Scene, config: &RadarConfig) -> usize {
    let n = (scene.duration_s * config.prf_hz + 1e-9).floor() as usize;
    if config.bpm_enabled {
        n - n % 2
    } else {
        n
    }
}

fn check_bounds(
    all: &[Scatterer],
    scene: &Scene,
    config: &RadarConfig,
    n_slow: usize,
) -> Result<()> {
    let max_r = config.max_range_m();
    let max_fd = config.max_doppler_hz();
    for s in all {
        for p in 0..n_slow {
            let t = p as f64 / config.prf_hz;
            if !s.is_active(t, scene.duration_s) {
                continue;
            }
            let st = s.state(t, scene.duration_s);
            if !(st.range_m > 0.0 && st.range_m < max_r) {
                return Err(Error::invalid(format!(
                    "scatterer `{}` at range {:.4} m at t={t:.4} s is outside the unambiguous range (0, {max_r:.4}) m",
                    s.name, st.range_m
                )));
            }
            if config.doppler_hz(st.velocity_mps).abs() > max_fd {
                return Err(Error::invalid(format!(
                    "scatterer `{}` velocity {:.4} m/s at t={t:.4} s exceeds the unambiguous Doppler {max_fd:.1} Hz",
                    s.name, st.velocity_mps
                )));
            }
            if !(st.angle_rad.abs() < PI / 2.0) {
                return Err(Error::invalid(format!(
                    "scatterer `{}` angle must lie in (-pi/2, pi/2)",
                    s.name
                )));
            }
            if s.trajectory.is_static() {
                break;
            }
        }
    }
    Ok(())
}

/// Simulates the physical-channel cube of a scene and its ground truth.
/// Without BPM only the first transmitter is used. Noise on chunk
/// `(chirp, channel)` comes from ChaCha stream `chirp + n_slow * channel`
/// of the scene seed, so the result is independent of thread scheduling.
pub fn simulate(scene: &Scene, config: &RadarConfig) -> Result<(IQCube, GroundTruth)> {
    scene.validate()?;
    config.validate()?;
    let n_slow = chirp_count(scene, config);
    if n_slow == 0 {
        return Err(Error::invalid("scene is shorter than one chirp"));
    }
    let all = scene.all_scatterers();
    check_bounds(&all, scene, config, n_slow)?;

    let mut cube = IQCube::zeros(*config, ChannelKind::Physical, n_slow)?;
    let n_fast = config.samples_per_pulse;
    let n_rx = config.n_rx;
    let fs = config.fast_sample_rate_hz();
    let lambda = config.wavelength_m();
    let sigma = (scene.noise_power / 2.0).sqrt();
    let duration = scene.duration_s;

    cube.data_mut()
        .par_chunks_mut(n_fast)
        .enumerate()
        .for_each(|(idx, pulse)| {
            let p = idx % n_slow;
            let rx = idx / n_slow;
            let t = p as f64 / config.prf_hz;
            let tx2_sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
            for s in &all {
                if !s.is_active(t, duration) {
                    continue;
                }
                let st = s.state(t, duration);
                let omega = config.phase_from_angle(st.angle_rad);
                let fb = config.beat_frequency_hz(st.range_m);
                let base = s.phase_rad + 4.0 * PI * st.range_m / lambda;
                let mut gain = Complex64::from_polar(s.amplitude, base + rx as f64 * omega);
                if config.bpm_enabled {
                    gain += Complex64::from_polar(
                        tx2_sign * s.amplitude,
                        base + (n_rx + rx) as f64 * omega,
                    );
                }
                for (n, z) in pulse.iter_mut().enumerate() {
                    *z += gain * Complex64::from_polar(1.0, 2.0 * PI * fb * n as f64 / fs);
                }
            }
            if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
                rng.set_stream(idx as u64);
                for z in pulse.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *z += Complex64::new(sigma * re, sigma * im);
                }
            }
        });

    let truth = ground_truth(scene, config, &cube);
    Ok((cube, truth))
}

/// Ground truth of a scene as generated on `cube`'s time axis.
fn ground_truth(scene: &Scene, config: &RadarConfig, cube: &IQCube) -> GroundTruth {
    let all = scene.all_scatterers();
    let steps = truth_steps(scene.duration_s);
    let mask = motion_mask(scene, steps);
    let mut segments: Vec<Segment> = Vec::new();
    for s in &scene.scatterers {
        if let Some(label) = &s.label {
            let (a, b) = s.interval(scene.duration_s);
            let seg = Segment {
                label: label.clone(),
                start_s: a,
                end_s: b.min(scene.duration_s),
            };
            if !segments.contains(&seg) {
                segments.push(seg);
            }
        }
    }
    segments.sort_by(|x, y| x.start_s.total_cmp(&y.start_s).then(x.label.cmp(&y.label)));

    let cpi_s = config.cpi_s();
    let frames = cube.n_slow() / config.pulses_per_cpi;
    let tracks = all
        .iter()
        .map(|s| Track {
            scatterer: s.name.clone(),
            samples: (0..frames)
                .filter_map(|k| {
                    let t = (k as f64 + 0.5) * cpi_s;
                    s.is_active(t, scene.duration_s).then(|| TrackSample {
                        cpi: k,
                        time_s: t,
                        state: s.state(t, scene.duration_s),
                    })
                })
                .collect(),
        })
        .collect();
    GroundTruth {
        step_s: TRUTH_STEP_S,
        mask,
        segments,
        tracks,
    }
}

/// Motion mask over `steps` steps from the labeled scatterers' intervals.
pub fn motion_mask(scene: &Scene, steps: usize) -> SegmentationMask {
    (0..steps)
        .map(|k| {
            let centre = (k as f64 + 0.5) * TRUTH_STEP_S;
            scene
                .scatterers
                .iter()
                .any(|s| s.label.is_some() && s.is_active(centre, scene.duration_s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::bpm_demux;
    use crate::rfrep::range_doppler_map;

    fn point(name: &str, r: f64, v: f64, theta: f64, amp: f64) -> Scatterer {
        Scatterer {
            name: name.into(),
            amplitude: amp,
            phase_rad: 0.0,
            active: None,
            label: None,
            trajectory: Trajectory::Sinusoidal {
                range0_m: r,
                drift_mps: v,
                angle_rad: theta,
                strokes: vec![],
            },
        }
    }

    fn scene(scatterers: Vec<Scatterer>, noise: f64) -> Scene {
        Scene {
            duration_s: 0.04,
            noise_power: noise,
            seed: 7,
            scatterers,
            clutter: vec![],
        }
    }

    #[test]
    fn empty_noiseless_scene_is_all_zero() {
        let (cube, truth) = simulate(&scene(vec![], 0.0), &RadarConfig::mimo_77ghz()).unwrap();
        assert_eq!(cube.n_slow(), 256);
        assert!(cube.data().iter().all(|z| z.norm() == 0.0));
        assert_eq!(truth.mask, vec![false]);
        assert!(truth.segments.is_empty());
    }

    #[test]
    fn moving_point_lands_in_expected_bins() {
        let cfg = RadarConfig::mimo_77ghz();
        let s = scene(vec![point("p", 1.0, 0.5, 20f64.to_radians(), 1.0)], 0.0);
        let (cube, _) = simulate(&s, &cfg).unwrap();
        let v = bpm_demux(&cube).unwrap();
        let rd = range_doppler_map(&v, 0, 0).unwrap();
        let (r, d) = rd.magnitude.argmax();
        assert!(r == 26 || r == 27, "range bin {r}");
        let fd = rd.doppler_hz(d);
        assert!(
            (fd - cfg.doppler_hz(0.5)).abs() <= rd.doppler_bin_hz,
            "doppler {fd}"
        );
    }

    #[test]
    fn static_point_is_stationary_at_zero_doppler() {
        let cfg = RadarConfig::compact();
        let mut s = scene(vec![], 0.0);
        s.duration_s = 0.2;
        s.clutter.push(Clutter {
            range_m: 3.0,
            angle_rad: 0.0,
            amplitude: 1.0,
        });
        let (cube, _) = simulate(&s, &cfg).unwrap();
        for k in 0..cube.frame_count() {
            let rd = range_doppler_map(&cube, k, 0).unwrap();
            assert_eq!(rd.magnitude.argmax(), (10, rd.zero_doppler_bin()));
        }
    }

    #[test]
    fn deterministic_and_linear() {
        let cfg = RadarConfig::mimo_77ghz();
        let a = point("a", 1.2, 0.3, 0.1, 1.0);
        let b = point("b", 2.5, -0.7, -0.3, 0.5);
        let (c1, _) = simulate(&scene(vec![a.clone()], 0.0), &cfg).unwrap();
        let (c2, _) = simulate(&scene(vec![b.clone()], 0.0), &cfg).unwrap();
        let (c12, _) = simulate(&scene(vec![a.clone(), b], 0.0), &cfg).unwrap();
        let peak = c12.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..c12.data().len() {
            assert!((c12.data()[i] - c1.data()[i] - c2.data()[i]).norm() < 1e-12 * peak);
        }
        let noisy = scene(vec![a], 0.1);
        let (x, _) = simulate(&noisy, &cfg).unwrap();
        let (y, _) = simulate(&noisy, &cfg).unwrap();
        assert_eq!(x.to_bytes(), y.to_bytes());
    }

    #[test]
    fn energy_scales_with_amplitude_squared() {
        let cfg = RadarConfig::compact();
        let (c1, _) = simulate(&scene(vec![point("a", 2.0, 0.4, 0.0, 1.0)], 0.0), &cfg).unwrap();
        let (c3, _) = simulate(&scene(vec![point("a", 2.0, 0.4, 0.0, 3.0)], 0.0), &cfg).unwrap();
        assert!((c3.energy() / c1.energy() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_scatterer_is_named() {
        let cfg = RadarConfig::compact();
        let far = point("wall", 12.0, 0.0, 0.0, 1.0);
        let e = simulate(&scene(vec![far], 0.0), &cfg)
            .unwrap_err()
            .to_string();
        assert!(e.contains("`wall`"), "{e}");
        let fast = point("runner", 2.0, 5.0, 0.0, 1.0);
        let e = simulate(&scene(vec![fast], 0.0), &cfg)
            .unwrap_err()
            .to_string();
        assert!(e.contains("`runner`") && e.contains("Doppler"), "{e}");
    }

    #[test]
    fn trajectories_integrate_their_velocity() {
        let tr = Trajectory::Sinusoidal {
            range0_m: 2.0,
            drift_mps: -0.2,
            angle_rad: 0.0,
            strokes: vec![Stroke {
                velocity_amplitude_mps: 0.8,
                frequency_hz: 1.3,
                phase_rad: 0.4,
            }],
        };
        let pl = Trajectory::PiecewiseLinear {
            knots: vec![[1.0, 3.0, 0.0], [2.0, 2.0, 0.2]],
        };
        for tr in [tr, pl] {
            let h = 1e-6;
            for k in 1..30 {
                let t = 0.5 + k as f64 * 0.07;
                if (t - 1.0).abs() < 2e-6 || (t - 2.0).abs() < 2e-6 {
                    continue;
                }
                let num = (tr.state(t + h, 0.5).range_m - tr.state(t - h, 0.5).range_m) / (2.0 * h);
                assert!((num - tr.state(t, 0.5).velocity_mps).abs() < 1e-6, "t={t}");
            }
        }
    }

    #[test]
    fn mask_and_segments_follow_labeled_intervals() {
        let mut a = point("hand", 2.0, 0.0, 0.0, 1.0);
        a.label = Some("wave".into());
        a.active = Some([0.4, 1.0]);
        let body = point("body", 2.5, 0.0, 0.0, 1.0);
        let s = Scene {
            duration_s: 1.5,
            noise_power: 0.0,
            seed: 1,
            scatterers: vec![a, body],
            clutter: vec![],
        };
        let (_, truth) = simulate(&s, &RadarConfig::compact()).unwrap();
        let want: Vec<bool> = (0..8).map(|k| (2..5).contains(&k)).collect();
        assert_eq!(truth.mask, want);
        assert_eq!(
            truth.segments,
            vec![Segment {
                label: "wave".into(),
                start_s: 0.4,
                end_s: 1.0
            }]
        );
        let l = truth.labeled_mdis();
        assert_eq!((l[0].mdi.start_step, l[0].mdi.end_step), (2, 4));
        let back = GroundTruth::from_json(&truth.to_json().unwrap()).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn scene_json_round_trip_and_rejects_unknown_keys() {
        let s = scene(vec![point("a", 1.0, 0.1, 0.0, 1.0)], 0.01);
        assert_eq!(Scene::from_json(&s.to_json().unwrap()).unwrap(), s);
        assert!(
            Scene::from_json(r#"{"duration_s":1,"noise_power":0,"seed":1,"bogus":2}"#).is_err()
        );
        let text = r#"{"duration_s":1,"noise_power":0,"seed":1,"scatterers":[
            {"name":"x","amplitude":1,"trajectory":{"type":"piecewise_linear","knots":[[0,1,0],[1,2,0]]}}]}"#;
        assert_eq!(Scene::from_json(text).unwrap().scatterers[0].name, "x");
    }
}
