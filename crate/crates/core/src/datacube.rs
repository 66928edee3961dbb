//! Radar acquisition configuration, the raw I/Q data cube and its on-disk
//! format, and binary-phase-modulation (BPM) virtual-array demultiplexing.
//!
//! Samples are addressed as `[fast_time][slow_time][channel]`. In memory the
//! cube keeps `f64` precision; on disk it is stored as interleaved
//! little-endian `f32` I/Q pairs with fast time varying fastest.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::write_atomic;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Magic bytes opening every cube file.
pub const CUBE_MAGIC: &[u8; 8] = b"RSSCUBE1";
/// Size of the fixed cube-file header in bytes.
pub const CUBE_HEADER_LEN: usize = 8 + 4 * 4 + 8 * 8 + 1;

/// Acquisition parameters of an FMCW radar.
///
/// The chirp is assumed to occupy the whole pulse repetition interval, so
/// the chirp rate is `bandwidth * prf` and the fast-time sample rate is
/// `samples_per_pulse * prf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadarConfigDoc")]
pub struct RadarConfig {
    /// Transmit (carrier) frequency, Hz.
    pub carrier_hz: f64,
    /// Swept bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Pulse (chirp) repetition frequency, Hz.
    pub prf_hz: f64,
    /// Fast-time samples per chirp.
    pub samples_per_pulse: usize,
    /// Chirps per coherent processing interval.
    pub pulses_per_cpi: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Inter-element spacing of the receive array, m.
    pub element_spacing_m: f64,
    pub bpm_enabled: bool,
}

/// Serialized form of [`RadarConfig`]; spacing defaults to half a wavelength.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RadarConfigDoc {
    carrier_hz: f64,
    bandwidth_hz: f64,
    prf_hz: f64,
    samples_per_pulse: usize,
    pulses_per_cpi: usize,
    n_tx: usize,
    n_rx: usize,
    #[serde(default)]
    element_spacing_m: Option<f64>,
    #[serde(default)]
    bpm_enabled: bool,
}

impl TryFrom<RadarConfigDoc> for RadarConfig {
    type Error = Error;

    fn try_from(doc: RadarConfigDoc) -> Result<Self> {
        let spacing = doc
            .element_spacing_m
            .unwrap_or(SPEED_OF_LIGHT / doc.carrier_hz / 2.0);
        let cfg = RadarConfig {
            carrier_hz: doc.carrier_hz,
            bandwidth_hz: doc.bandwidth_hz,
            prf_hz: doc.prf_hz,
            samples_per_pulse: doc.samples_per_pulse,
            pulses_per_cpi: doc.pulses_per_cpi,
            n_tx: doc.n_tx,
            n_rx: doc.n_rx,
            element_spacing_m: spacing,
            bpm_enabled: doc.bpm_enabled,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RadarConfig {
    /// The 77 GHz, 2TX/4RX BPM configuration: 4 GHz sweep, 6.4 kHz PRF,
    /// 256 samples per pulse, 40 ms CPI, half-wavelength spacing.
    pub fn mimo_77ghz() -> Self {
        RadarConfig {
            carrier_hz: 77e9,
            bandwidth_hz: 4e9,
            prf_hz: 6400.0,
            samples_per_pulse: 256,
            pulses_per_cpi: 256,
            n_tx: 2,
            n_rx: 4,
            element_spacing_m: SPEED_OF_LIGHT / 77e9 / 2.0,
            bpm_enabled: true,
        }
    }

    /// Single-channel 77 GHz configuration for long activity recordings:
    /// 0.3 m range bins over 9.6 m, 3.2 kHz PRF, 40 ms CPI.
    pub fn compact() -> Self {
        RadarConfig {
            carrier_hz: 77e9,
            bandwidth_hz: 0.5e9,
            prf_hz: 3200.0,
            samples_per_pulse: 32,
            pulses_per_cpi: 128,
            n_tx: 1,
            n_rx: 1,
            element_spacing_m: SPEED_OF_LIGHT / 77e9 / 2.0,
            bpm_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("prf_hz", self.prf_hz),
            ("element_spacing_m", self.element_spacing_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        let counts = [
            ("samples_per_pulse", self.samples_per_pulse),
            ("pulses_per_cpi", self.pulses_per_cpi),
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.bpm_enabled {
            if self.n_tx != 2 {
                return Err(Error::invalid("BPM requires exactly two transmitters"));
            }
            if !self.pulses_per_cpi.is_multiple_of(2) {
                return Err(Error::invalid(
                    "BPM requires an even number of pulses per CPI",
                ));
            }
        }
        Ok(())
    }

    /// Sets `pulses_per_cpi = prf * cpi_seconds`, which must be whole.
    pub fn with_cpi_seconds(mut self, cpi_seconds: f64) -> Result<Self> {
        let pulses = self.prf_hz * cpi_seconds;
        let rounded = pulses.round();
        if !(rounded >= 1.0 && (pulses - rounded).abs() < 1e-6 * rounded.max(1.0)) {
            return Err(Error::invalid(format!(
                "prf {} Hz x cpi {} s = {} pulses is not a whole number",
                self.prf_hz, cpi_seconds, pulses
            )));
        }
        self.pulses_per_cpi = rounded as usize;
        Ok(self)
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Chirp rate in Hz/s (`bandwidth * prf`).
    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth_hz * self.prf_hz
    }

    pub fn chirp_duration_s(&self) -> f64 {
        1.0 / self.prf_hz
    }

    pub fn fast_sample_rate_hz(&self) -> f64 {
        self.samples_per_pulse as f64 * self.prf_hz
    }

    /// Range extent of one fast-time FFT bin, `c * df / (2 * chirp_rate)`.
    pub fn range_bin_m(&self) -> f64 {
        let df = self.fast_sample_rate_hz() / self.samples_per_pulse as f64;
        SPEED_OF_LIGHT * df / (2.0 * self.chirp_rate())
    }

    /// Largest range representable without wrapping the beat frequency.
    pub fn max_range_m(&self) -> f64 {
        self.range_bin_m() * self.samples_per_pulse as f64
    }

    pub fn cpi_s(&self) -> f64 {
        self.pulses_per_cpi as f64 / self.prf_hz
    }

    /// Elements in the array used for angle estimation: the virtual array
    /// when BPM is on, otherwise the physical receive array.
    pub fn array_elements(&self) -> usize {
        if self.bpm_enabled {
            self.n_tx * self.n_rx
        } else {
            self.n_rx
        }
    }

    /// Slow-time sample rate after demultiplexing (half the PRF with BPM).
    pub fn effective_prf_hz(&self) -> f64 {
        if self.bpm_enabled {
            self.prf_hz / 2.0
        } else {
            self.prf_hz
        }
    }

    /// Largest |Doppler| that survives demultiplexing without aliasing.
    pub fn max_doppler_hz(&self) -> f64 {
        self.effective_prf_hz() / 2.0
    }

    pub fn doppler_hz(&self, radial_velocity_mps: f64) -> f64 {
        2.0 * radial_velocity_mps * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Mid-sweep frequency `f_t + B/2`. The chirp-to-chirp phase of a range
    /// bin advances at this frequency, so the measured Doppler of a moving
    /// point is `2 v f_mid / c`, slightly above [`Self::doppler_hz`].
    pub fn centre_frequency_hz(&self) -> f64 {
        self.carrier_hz + self.bandwidth_hz / 2.0
    }

    pub fn beat_frequency_hz(&self, range_m: f64) -> f64 {
        2.0 * range_m * self.chirp_rate() / SPEED_OF_LIGHT
    }

    /// Inter-element phase difference for a target at `theta`.
    pub fn phase_from_angle(&self, theta: f64) -> f64 {
        2.0 * PI * self.element_spacing_m * theta.sin() / self.wavelength_m()
    }
}

/// Whether a cube's channels are the physical receivers or the synthesized
/// virtual array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Physical,
    Virtual,
}

impl ChannelKind {
    fn code(self) -> u32 {
        match self {
            ChannelKind::Physical => 0,
            ChannelKind::Virtual => 1,
        }
    }
}

/// Complex radar data cube, fast time x slow time x channel.
#[derive(Debug, Clone, PartialEq)]
pub struct IQCube {
    config: RadarConfig,
    kind: ChannelKind,
    n_slow: usize,
    n_chan: usize,
    data: Vec<Complex64>,
}

impl IQCube {
    /// All-zero cube with `n_slow` chirps.
    pub fn zeros(config: RadarConfig, kind: ChannelKind, n_slow: usize) -> Result<Self> {
        let n_chan = Self::expected_channels(&config, kind)?;
        let len = config.samples_per_pulse * n_slow * n_chan;
        Self::from_data(config, kind, n_slow, vec![Complex64::new(0.0, 0.0); len])
    }

    /// Wraps `data` laid out with fast time fastest and channel slowest.
    pub fn from_data(
        config: RadarConfig,
        kind: ChannelKind,
        n_slow: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        config.validate()?;
        let n_chan = Self::expected_channels(&config, kind)?;
        let expected = config.samples_per_pulse * n_slow * n_chan;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "cube data has {} samples, expected {}",
                data.len(),
                expected
            )));
        }
        if kind == ChannelKind::Physical && config.bpm_enabled && !n_slow.is_multiple_of(2) {
            return Err(Error::invalid(
                "physical BPM cube needs an even slow-time length",
            ));
        }
        Ok(IQCube {
            config,
            kind,
            n_slow,
            n_chan,
            data,
        })
    }

    fn expected_channels(config: &RadarConfig, kind: ChannelKind) -> Result<usize> {
        Ok(match kind {
            ChannelKind::Physical => config.n_rx,
            ChannelKind::Virtual => config.n_tx * config.n_rx,
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn n_fast(&self) -> usize {
        self.config.samples_per_pulse
    }

    pub fn n_slow(&self) -> usize {
        self.n_slow
    }

    pub fn n_chan(&self) -> usize {
        self.n_chan
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    fn index(&self, fast: usize, slow: usize, chan: usize) -> usize {
        fast + self.n_fast() * (slow + self.n_slow * chan)
    }

    pub fn get(&self, fast: usize, slow: usize, chan: usize) -> Complex64 {
        self.data[self.index(fast, slow, chan)]
    }

    pub fn set(&mut self, fast: usize, slow: usize, chan: usize, value: Complex64) {
        let i = self.index(fast, slow, chan);
        self.data[i] = value;
    }

    /// Fast-time samples of one chirp on one channel.
    pub fn pulse(&self, slow: usize, chan: usize) -> &[Complex64] {
        let start = self.index(0, slow, chan);
        &self.data[start..start + self.n_fast()]
    }

    pub fn pulse_mut(&mut self, slow: usize, chan: usize) -> &mut [Complex64] {
        let start = self.index(0, slow, chan);
        let n = self.n_fast();
        &mut self.data[start..start + n]
    }

    /// Slow-time sample rate of this cube's chirp axis.
    pub fn slow_time_rate_hz(&self) -> f64 {
        match self.kind {
            ChannelKind::Virtual if self.config.bpm_enabled => self.config.prf_hz / 2.0,
            _ => self.config.prf_hz,
        }
    }

    /// Chirps of this cube that make up one CPI.
    pub fn pulses_per_frame(&self) -> usize {
        match self.kind {
            ChannelKind::Virtual if self.config.bpm_enabled => self.config.pulses_per_cpi / 2,
            _ => self.config.pulses_per_cpi,
        }
    }

    /// Number of complete, non-overlapping CPIs.
    pub fn frame_count(&self) -> usize {
        self.n_slow / self.pulses_per_frame()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_slow as f64 / self.slow_time_rate_hz()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Serializes to the cube file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CUBE_HEADER_LEN + self.data.len() * 8);
        out.extend_from_slice(CUBE_MAGIC);
        for v in [
            self.n_fast() as u32,
            self.n_slow as u32,
            self.n_chan as u32,
            self.kind.code(),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let c = &self.config;
        for v in [
            c.carrier_hz,
            c.bandwidth_hz,
            c.prf_hz,
            c.samples_per_pulse as f64,
            c.pulses_per_cpi as f64,
            c.n_tx as f64,
            c.n_rx as f64,
            c.element_spacing_m,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(u8::from(c.bpm_enabled));
        for z in &self.data {
            out.extend_from_slice(&(z.re as f32).to_le_bytes());
            out.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        out
    }

    /// Parses the cube file format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader { bytes, pos: 0 };
        let magic = rd.take(8)?;
        if magic != CUBE_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "missing RSSCUBE1 magic".into(),
            });
        }
        let n_fast = rd.u32()? as usize;
        let n_slow = rd.u32()? as usize;
        let n_chan = rd.u32()? as usize;
        let kind_offset = rd.pos;
        let kind = match rd.u32()? {
            0 => ChannelKind::Physical,
            1 => ChannelKind::Virtual,
            other => {
                return Err(Error::Format {
                    offset: kind_offset as u64,
                    message: format!("unknown channel kind {other}"),
                })
            }
        };
        let cfg_offset = rd.pos;
        let mut f = [0.0f64; 8];
        for v in f.iter_mut() {
            *v = rd.f64()?;
        }
        let bpm = rd.u8()? != 0;
        let as_count = |v: f64, name: &str| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Format {
                    offset: cfg_offset as u64,
                    message: format!("{name} is not a whole count: {v}"),
                })
            }
        };
        let config = RadarConfig {
            carrier_hz: f[0],
            bandwidth_hz: f[1],
            prf_hz: f[2],
            samples_per_pulse: as_count(f[3], "samples_per_pulse")?,
            pulses_per_cpi: as_count(f[4], "pulses_per_cpi")?,
            n_tx: as_count(f[5], "n_tx")?,
            n_rx: as_count(f[6], "n_rx")?,
            element_spacing_m: f[7],
            bpm_enabled: bpm,
        };
        config.validate().map_err(|e| Error::Format {
            offset: cfg_offset as u64,
            message: e.to_string(),
        })?;
        if n_fast != config.samples_per_pulse {
            return Err(Error::Format {
                offset: 8,
                message: format!(
                    "header n_fast {} disagrees with samples_per_pulse {}",
                    n_fast, config.samples_per_pulse
                ),
            });
        }
        let expected_chan = Self::expected_channels(&config, kind)?;
        if n_chan != expected_chan {
            return Err(Error::Format {
                offset: 16,
                message: format!("header n_chan {n_chan} disagrees with config ({expected_chan})"),
            });
        }
        let count = n_fast
            .checked_mul(n_slow)
            .and_then(|v| v.checked_mul(n_chan))
            .ok_or_else(|| Error::Format {
                offset: 8,
                message: "cube dimensions overflow".into(),
            })?;
        let payload_start = rd.pos;
        let needed = count * 8;
        let available = bytes.len() - payload_start;
        if available < needed {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!(
                    "truncated payload: {} of {} bytes ({} complex samples expected)",
                    available, needed, count
                ),
            });
        }
        if available > needed {
            return Err(Error::Format {
                offset: (payload_start + needed) as u64,
                message: format!("{} trailing bytes after payload", available - needed),
            });
        }
        let data = bytes[payload_start..]
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Self::from_data(config, kind, n_slow, data).map_err(|e| Error::Format {
            offset: payload_start as u64,
            message: e.to_string(),
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                message: format!(
                    "truncated header: needed {} bytes at offset {}",
                    n, self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<IQCube> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IQCube::from_bytes(&bytes)
}

pub fn save_cube(cube: &IQCube, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &cube.to_bytes())
}

/// Separates alternating BPM chirp pairs into per-transmitter chirps:
/// `C1 = (Ca + Cb) / 2`, `C2 = (Ca - Cb) / 2`.
///
/// Virtual channels are ordered TX1xRX1..RXn, then TX2xRX1..RXn, which
/// extends the receive ULA by `n_rx` elements.
pub fn bpm_demux(cube: &IQCube) -> Result<IQCube> {
    let cfg = *cube.config();
    if !cfg.bpm_enabled {
        return Err(Error::invalid("cube was not acquired in BPM mode"));
    }
    if cube.kind() != ChannelKind::Physical {
        return Err(Error::invalid("cube is already virtual"));
    }
    if !cube.n_slow().is_multiple_of(2) {
        return Err(Error::invalid("BPM demux needs an even slow-time length"));
    }
    let n_pairs = cube.n_slow() / 2;
    let mut out = IQCube::zeros(cfg, ChannelKind::Virtual, n_pairs)?;
    for rx in 0..cfg.n_rx {
        for p in 0..n_pairs {
            let ca = cube.pulse(2 * p, rx);
            let cb = cube.pulse(2 * p + 1, rx);
            let c1: Vec<Complex64> = ca.iter().zip(cb).map(|(a, b)| (a + b) * 0.5).collect();
            let c2: Vec<Complex64> = ca.iter().zip(cb).map(|(a, b)| (a - b) * 0.5).collect();
            out.pulse_mut(p, rx).copy_from_slice(&c1);
            out.pulse_mut(p, cfg.n_rx + rx).copy_from_slice(&c2);
        }
    }
    Ok(out)
}

/// Inverse of [`bpm_demux`]: `Ca = C1 + C2`, `Cb = C1 - C2`.
pub fn bpm_mux(cube: &IQCube) -> Result<IQCube> {
    let cfg = *cube.config();
    if !cfg.bpm_enabled || cube.kind() != ChannelKind::Virtual {
        return Err(Error::invalid(
            "BPM mux needs a virtual cube from a BPM config",
        ));
    }
    let mut out = IQCube::zeros(cfg, ChannelKind::Physical, cube.n_slow() * 2)?;
    for rx in 0..cfg.n_rx {
        for p in 0..cube.n_slow() {
            let c1 = cube.pulse(p, rx);
            let c2 = cube.pulse(p, cfg.n_rx + rx);
            let ca: Vec<Complex64> = c1.iter().zip(c2).map(|(a, b)| a + b).collect();
            let cb: Vec<Complex64> = c1.iter().zip(c2).map(|(a, b)| a - b).collect();
            out.pulse_mut(2 * p, rx).copy_from_slice(&ca);
            out.pulse_mut(2 * p + 1, rx).copy_from_slice(&cb);
        }
    }
    Ok(out)
}

/// Angular resolution `lambda / (M * d * cos(theta))` of the array used for
/// angle estimation (`M` = [`RadarConfig::array_elements`]).
pub fn angular_resolution(config: &RadarConfig, theta: f64) -> Result<f64> {
    angular_resolution_with(
        config.wavelength_m(),
        config.array_elements(),
        config.element_spacing_m,
        theta,
    )
}

pub fn angular_resolution_with(
    wavelength: f64,
    elements: usize,
    spacing: f64,
    theta: f64,
) -> Result<f64> {
    if elements == 0 || !(spacing > 0.0) {
        return Err(Error::invalid("array needs elements and positive spacing"));
    }
    let cos = theta.cos();
    if !(theta.abs() < FRAC_PI_2) || cos < 1e-12 {
        return Err(Error::Domain(format!(
            "angular resolution undefined at theta = {theta} rad (cos theta = 0)"
        )));
    }
    Ok(wavelength / (elements as f64 * spacing * cos))
}

/// Arrival angle from the phase difference between adjacent receivers,
/// `asin(lambda * omega / (2 pi d))`.
pub fn angle_from_phase(config: &RadarConfig, omega: f64) -> Result<f64> {
    let arg = config.wavelength_m() * omega / (2.0 * PI * config.element_spacing_m);
    if !(arg.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "phase {omega} rad is ambiguous for this spacing (asin argument {arg})"
        )));
    }
    Ok(arg.asin())
}
