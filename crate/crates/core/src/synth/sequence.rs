//! Sequence scenes: a walk-in, sit, three signs and stand, separated by
//! still periods, with per-instance jitter drawn from the seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scatterer, Scene, Stroke, Trajectory, TRUTH_STEP_S};
use crate::error::{Error, Result};

/// Number of sequence kinds.
pub const SEQUENCE_KINDS: usize = 5;

/// Sinusoidal velocity component whose frequency is `cycles` per burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeShape {
    pub velocity_amplitude_mps: f64,
    pub cycles: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// One moving part (hand, upper body) of a burst, placed relative to the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartMotion {
    pub range_offset_m: f64,
    #[serde(default)]
    pub angle_rad: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub drift_mps: f64,
    pub strokes: Vec<StrokeShape>,
}

/// A short labeled motion: a sign or a posture transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstMotion {
    pub duration_s: f64,
    pub parts: Vec<PartMotion>,
}

/// A limb swinging around the walking torso at the gait frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimbMotion {
    pub amplitude: f64,
    pub velocity_amplitude_mps: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkMotion {
    pub start_range_m: f64,
    pub end_range_m: f64,
    pub speed_mps: f64,
    pub gait_hz: f64,
    pub torso_amplitude: f64,
    pub limbs: Vec<LimbMotion>,
}

/// Kinematic parameters of the sequence corpus. The values are arbitrary
/// choices that keep the classes separable; they do not model real signers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionLibrary {
    /// Body power over per-sample noise power, dB.
    pub snr_db: f64,
    pub body_amplitude: f64,
    /// Still period before the walk, seconds (uniform range).
    pub lead_s: [f64; 2],
    /// Still period between motions, seconds (uniform range).
    pub gap_s: [f64; 2],
    pub tail_s: [f64; 2],
    /// Relative jitter of burst durations and walk time.
    pub duration_jitter: f64,
    /// Relative jitter of each part's stroke amplitudes.
    pub amplitude_jitter: f64,
    pub walk: WalkMotion,
    pub sit: BurstMotion,
    pub stand: BurstMotion,
    pub signs: BTreeMap<String, BurstMotion>,
    /// The three signs of each sequence kind, in order.
    pub sequences: Vec<[String; 3]>,
}

fn part(offset: f64, angle: f64, drift: f64, strokes: &[(f64, f64, f64)]) -> PartMotion {
    PartMotion {
        range_offset_m: offset,
        angle_rad: angle,
        amplitude: 1.0,
        drift_mps: drift,
        strokes: strokes
            .iter()
            .map(|&(a, c, p)| StrokeShape {
                velocity_amplitude_mps: a,
                cycles: c,
                phase_rad: p,
            })
            .collect(),
    }
}

fn one_hand(duration: f64, amp: f64, cycles: f64, phase: f64) -> BurstMotion {
    BurstMotion {
        duration_s: duration,
        parts: vec![part(-0.3, 0.1, 0.0, &[(amp, cycles, phase)])],
    }
}

/// Both hands moving together.
fn two_same(duration: f64, amp: f64, cycles: f64, phase: f64) -> BurstMotion {
    BurstMotion {
        duration_s: duration,
        parts: vec![
            part(-0.3, 0.15, 0.0, &[(amp, cycles, phase)]),
            part(-0.3, -0.15, 0.0, &[(amp, cycles, phase)]),
        ],
    }
}

/// Both hands in anti-phase, optionally drifting together.
fn two_alternate(duration: f64, amp: f64, cycles: f64, drift: f64) -> BurstMotion {
    BurstMotion {
        duration_s: duration,
        parts: vec![
            part(-0.3, 0.15, drift, &[(amp, cycles, 0.0)]),
            part(-0.3, -0.15, drift, &[(amp, cycles, PI)]),
        ],
    }
}

impl Default for MotionLibrary {
    fn default() -> Self {
        let signs: BTreeMap<String, BurstMotion> = [
            ("tired", two_same(1.6, 0.6, 1.0, 0.0)),
            ("book", two_alternate(1.6, 0.5, 2.0, 0.0)),
            ("sleep", one_hand(1.4, 1.0, 1.0, PI)),
            ("evening", two_same(1.8, 0.8, 2.0, 0.0)),
            ("ready", two_alternate(1.8, 0.7, 3.0, 0.0)),
            ("hot", one_hand(1.2, 0.45, 1.0, 0.0)),
            ("month", two_same(1.8, 0.5, 2.0, PI)),
            ("cook", two_alternate(1.4, 0.95, 2.0, 0.0)),
            ("again", two_alternate(1.4, 0.8, 1.0, 0.0)),
            ("summon", one_hand(1.8, 0.5, 3.0, 0.0)),
            ("maybe", two_alternate(2.0, 0.6, 4.0, 0.0)),
            ("night", two_same(1.6, 0.7, 1.0, PI)),
            ("something", one_hand(1.6, 1.1, 2.0, 0.0)),
            ("teacher", two_same(2.0, 1.2, 2.0, PI)),
            ("teach", two_alternate(2.2, 0.7, 2.0, -0.25)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let seq = |a: &str, b: &str, c: &str| [a.to_string(), b.to_string(), c.to_string()];
        MotionLibrary {
            snr_db: 20.0,
            body_amplitude: 1.0,
            lead_s: [1.0, 1.4],
            gap_s: [2.0, 2.6],
            tail_s: [1.2, 1.6],
            duration_jitter: 0.1,
            amplitude_jitter: 0.08,
            walk: WalkMotion {
                start_range_m: 7.0,
                end_range_m: 2.5,
                speed_mps: 1.0,
                gait_hz: 1.8,
                torso_amplitude: 1.0,
                limbs: vec![
                    LimbMotion {
                        amplitude: 0.6,
                        velocity_amplitude_mps: 0.8,
                        phase_rad: 0.0,
                    },
                    LimbMotion {
                        amplitude: 0.6,
                        velocity_amplitude_mps: 0.8,
                        phase_rad: PI,
                    },
                    LimbMotion {
                        amplitude: 0.4,
                        velocity_amplitude_mps: 0.4,
                        phase_rad: PI,
                    },
                    LimbMotion {
                        amplitude: 0.4,
                        velocity_amplitude_mps: 0.4,
                        phase_rad: 0.0,
                    },
                ],
            },
            sit: BurstMotion {
                duration_s: 1.4,
                parts: vec![part(0.0, 0.0, 0.0, &[(0.8, 0.5, 0.0)])],
            },
            stand: BurstMotion {
                duration_s: 1.4,
                parts: vec![part(0.0, 0.0, 0.0, &[(0.8, 0.5, PI)])],
            },
            signs,
            sequences: vec![
                seq("tired", "book", "sleep"),
                seq("evening", "ready", "hot"),
                seq("month", "cook", "again"),
                seq("summon", "maybe", "night"),
                seq("something", "teacher", "teach"),
            ],
        }
    }
}

impl MotionLibrary {
    pub fn validate(&self) -> Result<()> {
        if self.sequences.len() != SEQUENCE_KINDS {
            return Err(Error::invalid(format!(
                "motion library needs {SEQUENCE_KINDS} sequences"
            )));
        }
        for name in self.sequences.iter().flatten() {
            if !self.signs.contains_key(name) {
                return Err(Error::invalid(format!(
                    "sequence uses unknown sign `{name}`"
                )));
            }
        }
        let ranges = [self.lead_s, self.gap_s, self.tail_s];
        if ranges.iter().any(|r| !(r[0] > 0.0 && r[1] >= r[0])) {
            return Err(Error::invalid(
                "still-period ranges must be positive and ordered",
            ));
        }
        if !(0.0..1.0).contains(&self.duration_jitter)
            || !(0.0..1.0).contains(&self.amplitude_jitter)
        {
            return Err(Error::invalid("jitter must lie in [0, 1)"));
        }
        let w = &self.walk;
        if !(w.speed_mps > 0.0 && w.gait_hz > 0.0 && w.start_range_m != w.end_range_m) {
            return Err(Error::invalid(
                "walk needs positive speed and gait and a non-zero distance",
            ));
        }
        let bursts = self.signs.values().chain([&self.sit, &self.stand]);
        for b in bursts {
            if !(b.duration_s > 0.0) || b.parts.is_empty() {
                return Err(Error::invalid(
                    "bursts need a positive duration and at least one part",
                ));
            }
            if b.parts
                .iter()
                .flat_map(|p| &p.strokes)
                .any(|s| !(s.cycles > 0.0))
            {
                return Err(Error::invalid("stroke cycles must be positive"));
            }
        }
        Ok(())
    }

    /// Class labels in the order of a sequence of the given kind.
    pub fn sequence_labels(&self, kind: usize) -> Result<Vec<String>> {
        check_kind(kind)?;
        let mut out = vec!["walk".to_string(), "sit".to_string()];
        out.extend(self.sequences[kind - 1].iter().cloned());
        out.push("stand".to_string());
        Ok(out)
    }
}

fn check_kind(kind: usize) -> Result<()> {
    if (1..=SEQUENCE_KINDS).contains(&kind) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "sequence kind must be 1..={SEQUENCE_KINDS}, got {kind}"
        )))
    }
}

fn steps_of(seconds: f64) -> usize {
    ((seconds / TRUTH_STEP_S).round() as usize).max(1)
}

fn at(step: usize) -> f64 {
    step as f64 * TRUTH_STEP_S
}

struct Builder<'a> {
    lib: &'a MotionLibrary,
    rng: ChaCha8Rng,
    cursor: usize,
    scatterers: Vec<Scatterer>,
}

impl Builder<'_> {
    fn uniform(&mut self, r: [f64; 2]) -> f64 {
        if r[1] > r[0] {
            self.rng.random_range(r[0]..r[1])
        } else {
            r[0]
        }
    }

    fn jitter(&mut self, rel: f64) -> f64 {
        self.uniform([1.0 - rel, 1.0 + rel])
    }

    fn still(&mut self, r: [f64; 2]) {
        let s = self.uniform(r);
        self.cursor += steps_of(s);
    }

    fn burst(&mut self, label: &str, motion: &BurstMotion, body_range: f64) {
        let dj = self.lib.duration_jitter;
        let aj = self.lib.amplitude_jitter;
        let steps = steps_of(motion.duration_s * self.jitter(dj));
        let (t0, t1) = (at(self.cursor), at(self.cursor + steps));
        let duration = t1 - t0;
        for (i, p) in motion.parts.iter().enumerate() {
            let gain = self.jitter(aj);
            self.scatterers.push(Scatterer {
                name: format!("{label}.part{i}"),
                amplitude: p.amplitude,
                phase_rad: 0.0,
                active: Some([t0, t1]),
                label: Some(label.to_string()),
                trajectory: Trajectory::Sinusoidal {
                    range0_m: body_range + p.range_offset_m,
                    drift_mps: p.drift_mps,
                    angle_rad: p.angle_rad,
                    strokes: p
                        .strokes
                        .iter()
                        .map(|s| Stroke {
                            velocity_amplitude_mps: s.velocity_amplitude_mps * gain,
                            frequency_hz: s.cycles / duration,
                            phase_rad: s.phase_rad,
                        })
                        .collect(),
                },
            });
        }
        self.cursor += steps;
    }
}

/// Builds a sequence scene of the given kind (1-based): still, walk-in,
/// sit, the kind's three signs, stand, still. Boundaries fall on the
/// 0.2 s truth grid. Identical `(kind, library, seed)` give identical scenes.
pub fn make_sequence_scene(kind: usize, lib: &MotionLibrary, seed: u64) -> Result<Scene> {
    check_kind(kind)?;
    lib.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind as u64);
    let mut b = Builder {
        lib,
        rng,
        cursor: 0,
        scatterers: Vec::new(),
    };
    let w = &lib.walk;
    let body = lib.body_amplitude;

    b.still(lib.lead_s);
    let distance = (w.end_range_m - w.start_range_m).abs();
    let walk_jitter = b.jitter(lib.duration_jitter);
    let walk_steps = steps_of(distance / w.speed_mps * walk_jitter);
    let (ws, we) = (at(b.cursor), at(b.cursor + walk_steps));
    let velocity = (w.end_range_m - w.start_range_m) / (we - ws);
    b.scatterers.push(Scatterer {
        name: "body.before".into(),
        amplitude: body,
        phase_rad: 0.0,
        active: Some([0.0, ws]),
        label: None,
        trajectory: Trajectory::Static {
            range_m: w.start_range_m,
            angle_rad: 0.0,
        },
    });
    b.scatterers.push(Scatterer {
        name: "walk.torso".into(),
        amplitude: w.torso_amplitude,
        phase_rad: 0.0,
        active: Some([ws, we]),
        label: Some("walk".into()),
        trajectory: Trajectory::PiecewiseLinear {
            knots: vec![[ws, w.start_range_m, 0.0], [we, w.end_range_m, 0.0]],
        },
    });
    for (i, limb) in w.limbs.iter().enumerate() {
        let gain = b.jitter(lib.amplitude_jitter);
        b.scatterers.push(Scatterer {
            name: format!("walk.limb{i}"),
            amplitude: limb.amplitude,
            phase_rad: 0.0,
            active: Some([ws, we]),
            label: Some("walk".into()),
            trajectory: Trajectory::Sinusoidal {
                range0_m: w.start_range_m,
                drift_mps: velocity,
                angle_rad: 0.0,
                strokes: vec![Stroke {
                    velocity_amplitude_mps: limb.velocity_amplitude_mps * gain,
                    frequency_hz: w.gait_hz,
                    phase_rad: limb.phase_rad,
                }],
            },
        });
    }
    b.cursor += walk_steps;

    b.still(lib.gap_s);
    b.burst("sit", &lib.sit, w.end_range_m);
    for name in &lib.sequences[kind - 1] {
        b.still(lib.gap_s);
        b.burst(name, &lib.signs[name], w.end_range_m);
    }
    b.still(lib.gap_s);
    b.burst("stand", &lib.stand, w.end_range_m);
    b.still(lib.tail_s);

    let duration = at(b.cursor);
    b.scatterers.push(Scatterer {
        name: "body.after".into(),
        amplitude: body,
        phase_rad: 0.0,
        active: Some([we, duration]),
        label: None,
        trajectory: Trajectory::Static {
            range_m: w.end_range_m,
            angle_rad: 0.0,
        },
    });
    let scene = Scene {
        duration_s: duration,
        noise_power: body * body * 10f64.powf(-lib.snr_db / 10.0),
        seed,
        scatterers: b.scatterers,
        clutter: Vec::new(),
    };
    scene.validate()?;
    Ok(scene)
}
