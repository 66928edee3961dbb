//! RF data representations computed from the radar data cube: range-Doppler
//! frames and videos, CFAR-gated micro-Doppler spectrograms, MUSIC
//! range-angle frames and their optical-flow enhancement.

mod cfar;
mod export;
mod flow;
mod music;
mod rd;
mod spectrogram;

pub use cfar::{ca_cfar, ca_cfar_alpha, CfarMask, CfarParams};
pub use export::{
    parse_grid_csv, read_grid_csv, read_ra_csv, read_rd_csv, read_spectrogram_csv, write_pgm,
    write_ra_csv, write_rd_csv, write_spectrogram_csv, GridCsv,
};
pub use flow::{enhance_ra, horn_schunck_flow, normalize_pair, HornSchunckParams};
pub use music::{
    angle_grid_deg, bartlett_spectrum, music_pseudo_spectrum, music_range_angle,
    range_bin_snapshots, steering_vector,
};
pub use rd::{range_doppler_map, range_fft_pulse, range_gated_signal, rd_video};
pub use spectrogram::{micro_doppler_spectrogram, spectrogram_of_signal};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major 2D array of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// `(row, col)` of the largest value; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        if self.cols == 0 {
            return (0, 0);
        }
        (best / self.cols, best % self.cols)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Grid, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Amplitude scale of a representation's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Db,
}

/// Range-Doppler magnitude frame for one CPI, `[range_bin][doppler_bin]`
/// with the Doppler axis zero-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct RDFrame {
    pub magnitude: Grid,
    pub range_bin_m: f64,
    pub doppler_bin_hz: f64,
    pub timestamp_s: f64,
    pub scale: Scale,
}

impl RDFrame {
    pub fn n_range(&self) -> usize {
        self.magnitude.rows()
    }

    pub fn n_doppler(&self) -> usize {
        self.magnitude.cols()
    }

    /// Signed Doppler frequency of column `j`.
    pub fn doppler_hz(&self, j: usize) -> f64 {
        (j as f64 - (self.n_doppler() / 2) as f64) * self.doppler_bin_hz
    }

    /// Column holding zero Doppler.
    pub fn zero_doppler_bin(&self) -> usize {
        self.n_doppler() / 2
    }

    pub fn range_m(&self, i: usize) -> f64 {
        i as f64 * self.range_bin_m
    }

    /// `20 log10` presentation copy; zeros map to -inf dB floor of -300.
    pub fn to_db(&self) -> RDFrame {
        if self.scale == Scale::Db {
            return self.clone();
        }
        RDFrame {
            magnitude: self
                .magnitude
                .map(|v| if v > 0.0 { 20.0 * v.log10() } else { -300.0 }),
            scale: Scale::Db,
            ..self.clone()
        }
    }
}

/// Micro-Doppler spectrogram (squared STFT magnitude), `[doppler_bin][time_bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Grid,
    pub window_s: f64,
    pub hop_s: f64,
    pub doppler_bin_hz: f64,
    /// Centre time of each column, seconds.
    pub times_s: Vec<f64>,
}

impl Spectrogram {
    pub fn n_doppler(&self) -> usize {
        self.power.rows()
    }

    pub fn n_time(&self) -> usize {
        self.power.cols()
    }

    pub fn doppler_hz(&self, i: usize) -> f64 {
        (i as f64 - (self.n_doppler() / 2) as f64) * self.doppler_bin_hz
    }

    pub fn doppler_axis(&self) -> Vec<f64> {
        (0..self.n_doppler()).map(|i| self.doppler_hz(i)).collect()
    }

    /// Scales every value by `k > 0`.
    pub fn scaled(&self, k: f64) -> Spectrogram {
        Spectrogram {
            power: self.power.map(|v| v * k),
            ..self.clone()
        }
    }
}

/// Range-angle frame, `[range_bin][angle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RAFrame {
    pub magnitude: Grid,
    /// Scan angles in radians, strictly increasing inside (-pi/2, pi/2).
    pub angles_rad: Vec<f64>,
    pub range_bin_m: f64,
    pub timestamp_s: f64,
}

impl RAFrame {
    /// Angle of the largest value in range row `r`.
    pub fn peak_angle(&self, r: usize) -> f64 {
        let row = self.magnitude.row(r);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        self.angles_rad[best]
    }
}
